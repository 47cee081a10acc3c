#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalmine/minesim/mission.hpp"

namespace causalmine::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One config document; flags override keys. See docs/config in README.
struct RunConfig {
    std::string map_path;
    std::string map_text;  // inline alternative to map_path
    minesim::EnvParams env;
    std::optional<minesim::EnvParams> model_env;
    double dust_uniform = 0.0;
    double dust_kappa = 0.5;
    double dust_lambda = 0.3;
    minesim::MissionConfig mission;  // plan, adapt, onset, max_steps, ...
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    minesim::MineMap load_map() const;
    minesim::DustField dust(const minesim::MineMap& map) const;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);
nlohmann::json config_to_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

// Overrides from global flags.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> budget_mode;  // "expansions" | "wallclock"
    bool log_belief = false;
    void apply(RunConfig& cfg) const;
};

int cmd_map_validate(const std::string& path);
int cmd_sim_run(const RunConfig& cfg);
struct BatchOptions {
    int missions = 20;
    std::vector<std::string> variants = {"adapt-on", "adapt-off"};
    int threads = 0;  // 0: hardware concurrency (capped by CAUSAL_MINE_THREADS)
};
int cmd_eval_batch(const RunConfig& cfg, const BatchOptions& opts);
struct AdaptDemoOptions {
    std::string scenario = "gust-onset";  // or "dust-onset"
    int batches = 50;
    int onset_batch = 20;
    int records_per_batch = 20;
    bool log_belief = false;
};
int cmd_adapt_demo(const RunConfig& cfg, const AdaptDemoOptions& opts);
int cmd_explain(const std::string& trace_path, const std::string& query_path,
                const std::string& out_dir);

// Trace persistence (line-delimited JSON) and replay.
void write_trace(const std::string& path, const RunConfig& cfg, const minesim::MissionResult& result);
std::uint64_t trace_hash(const std::vector<nlohmann::json>& step_lines);
std::uint64_t fnv1a(const std::string& s);

}  // namespace causalmine::cli
