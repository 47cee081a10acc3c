#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "causalmine/cli/cli.hpp"

using namespace causalmine;
namespace fs = std::filesystem;

namespace {

std::string bin_path() {
    const char* p = std::getenv("CAUSAL_MINE_BIN");
    REQUIRE(p != nullptr);
    return p;
}

int run_cmd(const std::string& args, std::string* out = nullptr) {
    const std::string tmp = "/tmp/causal_mine_cli_out.txt";
    const int rc = std::system((bin_path() + " " + args + " > " + tmp + " 2>&1").c_str());
    if (out) {
        std::ifstream in(tmp);
        std::stringstream ss;
        ss << in.rdbuf();
        *out = ss.str();
    }
    return WEXITSTATUS(rc);
}

std::string write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
    return path;
}

const char* kTinyMap =
    "######\n"
    "#....#\n"
    "#..H.#\n"
    "######\n";

std::string tiny_config(const std::string& dir, std::uint64_t seed) {
    nlohmann::json j = {
        {"map_text", kTinyMap},
        {"env",
         {{"p0", 1.0}, {"sigma_obs", 0.3}, {"rho", 0.0}, {"p_w", 0.1}, {"wind_prior", {0.5, 0.5, 0.0, 0.0, 0.0}}}},
        {"dust", {{"uniform", 0.1}}},
        {"planner",
         {{"n_scenarios", 8}, {"max_depth", 6}, {"expansion_budget", 150}, {"discount", 0.97}}},
        {"adapt", {{"enabled", false}}},
        {"mission", {{"max_steps", 25}, {"belief_particles", 60}}},
        {"seed", seed},
        {"out_dir", dir}};
    return write_file(dir + "/config.json", j.dump(2));
}

}  // namespace

TEST_CASE("map-validate: valid, missing-home, ragged, bad char") {
    const std::string dir = "/tmp/cm_cli_maps";
    fs::create_directories(dir);
    write_file(dir + "/ok.txt", "###\n#H#\n###\n");
    std::string out;
    CHECK(run_cmd("map-validate " + dir + "/ok.txt", &out) == cli::kExitOk);
    CHECK(out.find("OK") != std::string::npos);

    write_file(dir + "/nohome.txt", "###\n#.#\n###\n");
    CHECK(run_cmd("map-validate " + dir + "/nohome.txt", &out) == cli::kExitUsage);
    CHECK(out.find("Home") != std::string::npos);

    write_file(dir + "/ragged.txt", "###\n#H##\n###\n");
    CHECK(run_cmd("map-validate " + dir + "/ragged.txt", &out) == cli::kExitUsage);

    write_file(dir + "/badchar.txt", "###\n#X#\n###\n");
    CHECK(run_cmd("map-validate " + dir + "/badchar.txt", &out) == cli::kExitUsage);
    CHECK(out.find("row") != std::string::npos);
}

TEST_CASE("sim-run: trace written, summary sane, bad config exits 2") {
    const std::string dir = "/tmp/cm_cli_sim";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cfg = tiny_config(dir, 11);
    std::string out;
    CHECK(run_cmd("--config " + cfg + " sim-run", &out) == cli::kExitOk);
    CHECK(out.find("outcome") != std::string::npos);
    CHECK(fs::exists(dir + "/trace_11.jsonl"));

    // Malformed config -> usage exit code.
    const auto bad = write_file(dir + "/bad.json", "{\"planner\": {\"budget_mode\": \"warp\"}}");
    CHECK(run_cmd("--config " + bad + " sim-run", &out) == cli::kExitUsage);
    CHECK(run_cmd("--config " + dir + "/missing.json sim-run", &out) == cli::kExitUsage);
    // Unknown flag -> usage exit code.
    CHECK(run_cmd("--config " + cfg + " sim-run --frobnicate", &out) == cli::kExitUsage);
}

TEST_CASE("sim-run: repeated seed reproduces the trace byte for byte") {
    const std::string d1 = "/tmp/cm_cli_rep1", d2 = "/tmp/cm_cli_rep2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    fs::create_directories(d1);
    fs::create_directories(d2);
    const auto cfg = tiny_config(d1, 21);
    std::string out;
    REQUIRE(run_cmd("--config " + cfg + " sim-run", &out) == cli::kExitOk);
    REQUIRE(run_cmd("--config " + cfg + " --out-dir " + d2 + " sim-run", &out) == cli::kExitOk);
    std::ifstream a(d1 + "/trace_21.jsonl"), b(d2 + "/trace_21.jsonl");
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    // The header embeds out_dir via the config, so compare step+result lines.
    auto tail = [](const std::string& s) { return s.substr(s.find('\n') + 1); };
    CHECK(tail(sa.str()) == tail(sb.str()));
    CHECK(tail(sa.str()).find("trace_hash") != std::string::npos);
}

TEST_CASE("config: hash is stable and seed overrides apply") {
    const std::string dir = "/tmp/cm_cli_cfg";
    fs::create_directories(dir);
    const auto path = tiny_config(dir, 5);
    auto cfg = cli::load_config_file(path);
    auto h1 = cli::config_hash(cfg);
    auto cfg2 = cli::load_config_file(path);
    CHECK(h1 == cli::config_hash(cfg2));
    cli::Overrides ov;
    ov.seed = 99;
    ov.apply(cfg2);
    CHECK(cfg2.seed == 99);
    CHECK(cfg2.mission.seed == 99);
    CHECK(h1 != cli::config_hash(cfg2));  // seed is part of the hash
}

TEST_CASE("eval-batch: zero missions exits 0 with an empty summary") {
    const std::string dir = "/tmp/cm_cli_batch0";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cfg = tiny_config(dir, 1);
    std::string out;
    CHECK(run_cmd("--config " + cfg + " eval-batch --missions 0", &out) == cli::kExitOk);
    CHECK(fs::exists(dir + "/summary.json"));
    auto j = nlohmann::json::parse(std::ifstream(dir + "/summary.json"));
    CHECK(j.at("missions") == 0);
}

TEST_CASE("eval-batch: paired variants share initial positions") {
    const std::string dir = "/tmp/cm_cli_batch";
    fs::remove_all(dir);
    fs::create_directories(dir);
    nlohmann::json j = nlohmann::json::parse(std::ifstream(tiny_config(dir, 17)));
    j["adapt"] = {{"enabled", true}, {"capacity", 4}, {"period", 3}, {"n_samples", 64}};
    const auto cfg = write_file(dir + "/config.json", j.dump());
    std::string out;
    REQUIRE(run_cmd("--config " + cfg + " eval-batch --missions 4 --threads 1", &out) == cli::kExitOk);
    auto summary = nlohmann::json::parse(std::ifstream(dir + "/summary.json"));
    CHECK(summary.at("variants").contains("adapt-on"));
    CHECK(summary.at("variants").contains("adapt-off"));
    CHECK(summary.contains("comparison"));

    // Paired design: same mission index, same seed, same start cell. The
    // start cell is the first draw of the env stream, so compare the first
    // step's state across variants in missions.csv via the trace replays.
    std::ifstream csv(dir + "/missions.csv");
    std::string line;
    std::getline(csv, line);  // header
    std::map<int, std::string> seeds_on, seeds_off;
    while (std::getline(csv, line)) {
        std::stringstream ss(line);
        std::string variant, mission, seed;
        std::getline(ss, variant, ',');
        std::getline(ss, mission, ',');
        std::getline(ss, seed, ',');
        if (variant == "adapt-on") seeds_on[std::stoi(mission)] = seed;
        if (variant == "adapt-off") seeds_off[std::stoi(mission)] = seed;
    }
    REQUIRE(seeds_on.size() == 4);
    CHECK(seeds_on == seeds_off);
}

TEST_CASE("explain: induced crash trace ranks a wind variable on top") {
    const std::string dir = "/tmp/cm_cli_explain";
    fs::remove_all(dir);
    fs::create_directories(dir);
    // Strong persistent east gust from step 0, stale calm-ish model: find a
    // crashing seed, then explain the crash.
    nlohmann::json j = {
        {"map_text", "######\n#....#\n#..H.#\n######\n"},
        {"env",
         {{"p0", 1.0}, {"sigma_obs", 0.3}, {"rho", 0.0}, {"p_w", 0.05}, {"wind_prior", {0.0, 1.0, 0.0, 0.0, 0.0}}}},
        {"dust", {{"uniform", 0.0}}},
        {"planner", {{"n_scenarios", 8}, {"max_depth", 6}, {"expansion_budget", 150}, {"discount", 0.97}}},
        {"adapt", {{"enabled", false}}},
        {"mission",
         {{"max_steps", 20}, {"belief_particles", 60}, {"onset", {{"step", 0}, {"mode", "E"}, {"p_w", 0.9}}}}},
        {"out_dir", dir}};
    const auto cfg = write_file(dir + "/config.json", j.dump());
    std::string out;
    std::string trace_path;
    for (int seed = 1; seed < 40 && trace_path.empty(); ++seed) {
        REQUIRE(run_cmd("--config " + cfg + " --seed " + std::to_string(seed) + " sim-run", &out) ==
                cli::kExitOk);
        auto summary = nlohmann::json::parse(out);
        if (summary.at("outcome") == "crash") trace_path = summary.at("trace").get<std::string>();
    }
    REQUIRE_FALSE(trace_path.empty());

    const auto query = write_file(dir + "/query.json",
                                  R"({"outcome": {"var": "status", "t": "final", "cmp": "eq", "value": 2},
                                      "n_particles": 300})");
    REQUIRE(run_cmd("explain --trace " + trace_path + " --query " + query + " --out-dir " + dir,
                    &out) == cli::kExitOk);
    auto report = nlohmann::json::parse(std::ifstream(dir + "/explanation.json"));
    REQUIRE(report.contains("top_cause"));
    const auto top = report.at("top_cause").get<std::string>();
    CHECK(top.find("wind@") == 0);

    // Unknown variable in the query -> usage exit.
    const auto badq = write_file(dir + "/badq.json",
                                 R"({"outcome": {"var": "gremlin", "t": "final", "value": 1}})");
    CHECK(run_cmd("explain --trace " + trace_path + " --query " + badq, &out) == cli::kExitUsage);
}

TEST_CASE("adapt-demo: no-change stream keeps the base model as MAP") {
    const std::string dir = "/tmp/cm_cli_demo";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cfg = tiny_config(dir, 9);
    std::string out;
    REQUIRE(run_cmd("--config " + cfg +
                        " adapt-demo --scenario gust-onset --batches 8 --onset-batch 100",
                    &out) == cli::kExitOk);
    auto j = nlohmann::json::parse(out);
    CHECK(j.at("map_edits").empty());
    CHECK(j.at("map_weight").get<double>() > 0.9);
    CHECK(fs::exists(dir + "/posterior.csv"));
}
