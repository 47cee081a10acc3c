// causal-mine: mission simulator, planner, online model adaptation, and
// counterfactual explanation for the grid-world mine-survey drone.

#include <iostream>

#include <CLI11.hpp>

#include "causalmine/cli/cli.hpp"

using namespace causalmine;

int main(int argc, char** argv) {
    CLI::App app{"causal-mine: confounder-robust mine-survey drone stack"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    cli::Overrides overrides;
    std::string seed_str, out_dir, budget_mode;
    app.add_option("--config", config_path, "Run configuration (JSON)");
    app.add_option("--seed", seed_str, "Seed override");
    app.add_option("--out-dir", out_dir, "Output directory override");
    app.add_option("--budget-mode", budget_mode, "Planner budget mode: expansions|wallclock");
    app.add_flag("--log-belief", overrides.log_belief, "Write belief snapshots per adaptation step");

    auto* map_validate = app.add_subcommand("map-validate", "Parse and validate an ASCII mine map");
    std::string map_path;
    map_validate->add_option("path", map_path, "Map file")->required();

    auto* sim_run = app.add_subcommand("sim-run", "Run one seeded mission and write its trace");

    auto* eval_batch = app.add_subcommand("eval-batch", "Run paired mission batches per variant");
    cli::BatchOptions batch;
    eval_batch->add_option("--missions", batch.missions, "Missions per variant");
    std::string variants_csv = "adapt-on,adapt-off";
    eval_batch->add_option("--variants", variants_csv,
                           "Comma list of adapt-on,adapt-off,observational");
    eval_batch->add_option("--threads", batch.threads, "Worker threads (0 = hardware)");

    auto* adapt_demo = app.add_subcommand("adapt-demo", "Stream synthetic batches into the adapter");
    cli::AdaptDemoOptions demo;
    adapt_demo->add_option("--scenario", demo.scenario, "gust-onset|dust-onset");
    adapt_demo->add_option("--batches", demo.batches, "Total batches");
    adapt_demo->add_option("--onset-batch", demo.onset_batch, "Batch index where the truth changes");
    adapt_demo->add_option("--records-per-batch", demo.records_per_batch, "Records per batch");

    auto* explain_cmd = app.add_subcommand("explain", "Rank counterfactual causes for a trace outcome");
    std::string trace_path, query_path;
    explain_cmd->add_option("--trace", trace_path, "Mission trace (JSON lines)")->required();
    explain_cmd->add_option("--query", query_path, "Query file (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return cli::kExitUsage;
    }

    try {
        if (!seed_str.empty()) overrides.seed = std::stoull(seed_str);
        if (!out_dir.empty()) overrides.out_dir = out_dir;
        if (!budget_mode.empty()) overrides.budget_mode = budget_mode;

        if (*map_validate) return cli::cmd_map_validate(map_path);

        if (*explain_cmd) {
            std::string dir = overrides.out_dir.value_or("out");
            return cli::cmd_explain(trace_path, query_path, dir);
        }

        if (config_path.empty()) {
            std::cerr << "--config is required for this subcommand" << std::endl;
            return cli::kExitUsage;
        }
        auto cfg = cli::load_config_file(config_path);
        overrides.apply(cfg);

        if (*sim_run) return cli::cmd_sim_run(cfg);
        if (*eval_batch) {
            batch.variants.clear();
            std::size_t start = 0;
            while (start <= variants_csv.size()) {
                auto comma = variants_csv.find(',', start);
                if (comma == std::string::npos) comma = variants_csv.size();
                if (comma > start) batch.variants.push_back(variants_csv.substr(start, comma - start));
                start = comma + 1;
            }
            return cli::cmd_eval_batch(cfg, batch);
        }
        if (*adapt_demo) {
            demo.log_belief = overrides.log_belief;
            return cli::cmd_adapt_demo(cfg, demo);
        }
    } catch (const cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return cli::kExitUsage;
    } catch (const minesim::MapError& e) {
        std::cerr << "map error: " << e.what() << std::endl;
        return cli::kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return cli::kExitRuntime;
    }
    return cli::kExitUsage;
}
