#include <fstream>
#include <sstream>

#include "causalmine/cli/cli.hpp"

namespace causalmine::cli {

using nlohmann::json;
namespace ms = minesim;
namespace pl = planner;

namespace {

ms::EnvParams env_from_json(const json& j, ms::EnvParams base = {}) {
    ms::EnvParams e = base;
    if (j.contains("p0")) e.p0 = j.at("p0").get<double>();
    if (j.contains("sigma_obs")) e.sigma_obs = j.at("sigma_obs").get<double>();
    if (j.contains("rho")) e.switch_rho = j.at("rho").get<double>();
    if (j.contains("p_w")) e.drift_pw = j.at("p_w").get<double>();
    if (j.contains("r_success")) e.r_success = j.at("r_success").get<double>();
    if (j.contains("r_crash")) e.r_crash = j.at("r_crash").get<double>();
    if (j.contains("wind_prior")) {
        auto p = j.at("wind_prior").get<std::vector<double>>();
        if (p.size() != std::size_t(ms::kNumWindModes)) throw ConfigError("wind_prior needs 5 entries");
        std::copy(p.begin(), p.end(), e.wind_prior.begin());
    }
    for (double p : {e.p0, e.switch_rho, e.drift_pw})
        if (p < 0.0 || p > 1.0) throw ConfigError("probability out of [0,1] in env config");
    return e;
}

json env_to_json(const ms::EnvParams& e) {
    return {{"p0", e.p0},
            {"sigma_obs", e.sigma_obs},
            {"rho", e.switch_rho},
            {"p_w", e.drift_pw},
            {"r_success", e.r_success},
            {"r_crash", e.r_crash},
            {"wind_prior", std::vector<double>(e.wind_prior.begin(), e.wind_prior.end())}};
}

ms::WindMode wind_mode_from(const std::string& s) {
    if (s == "calm") return ms::WindMode::Calm;
    if (s == "E") return ms::WindMode::GustE;
    if (s == "N") return ms::WindMode::GustN;
    if (s == "S") return ms::WindMode::GustS;
    if (s == "W") return ms::WindMode::GustW;
    throw ConfigError("bad wind mode: " + s);
}

std::string wind_mode_name(ms::WindMode m) {
    switch (m) {
        case ms::WindMode::Calm: return "calm";
        case ms::WindMode::GustE: return "E";
        case ms::WindMode::GustN: return "N";
        case ms::WindMode::GustS: return "S";
        case ms::WindMode::GustW: return "W";
    }
    return "calm";
}

}  // namespace

RunConfig parse_config(const json& j) {
    RunConfig cfg;
    if (j.contains("map")) cfg.map_path = j.at("map").get<std::string>();
    if (j.contains("map_text")) cfg.map_text = j.at("map_text").get<std::string>();
    if (cfg.map_path.empty() && cfg.map_text.empty())
        throw ConfigError("config needs \"map\" (path) or \"map_text\"");
    if (j.contains("env")) cfg.env = env_from_json(j.at("env"));
    if (j.contains("model_env")) cfg.model_env = env_from_json(j.at("model_env"), cfg.env);
    if (j.contains("dust")) {
        const auto& d = j.at("dust");
        if (d.contains("uniform")) cfg.dust_uniform = d.at("uniform").get<double>();
        if (d.contains("kappa")) cfg.dust_kappa = d.at("kappa").get<double>();
        if (d.contains("lambda")) cfg.dust_lambda = d.at("lambda").get<double>();
    }
    if (j.contains("planner")) {
        const auto& p = j.at("planner");
        auto& pc = cfg.mission.plan;
        if (p.contains("n_scenarios")) pc.n_scenarios = p.at("n_scenarios").get<int>();
        if (p.contains("max_depth")) pc.max_depth = p.at("max_depth").get<int>();
        if (p.contains("expansion_budget")) pc.expansion_budget = p.at("expansion_budget").get<long>();
        if (p.contains("time_budget_ms")) pc.time_budget_ms = p.at("time_budget_ms").get<double>();
        if (p.contains("exploration_constant"))
            pc.exploration_constant = p.at("exploration_constant").get<double>();
        if (p.contains("budget_mode")) {
            const auto m = p.at("budget_mode").get<std::string>();
            if (m == "expansions")
                pc.budget_mode = pl::BudgetMode::Expansions;
            else if (m == "wallclock")
                pc.budget_mode = pl::BudgetMode::WallClock;
            else
                throw ConfigError("bad budget_mode: " + m);
        }
        if (p.contains("rollout")) {
            const auto r = p.at("rollout").get<std::string>();
            if (r == "random")
                pc.rollout = pl::RolloutKind::Random;
            else if (r == "greedy-home")
                pc.rollout = pl::RolloutKind::GreedyHome;
            else
                throw ConfigError("bad rollout: " + r);
        }
        if (p.contains("discount")) cfg.mission.discount = p.at("discount").get<double>();
    }
    if (j.contains("adapt")) {
        const auto& a = j.at("adapt");
        auto& ac = cfg.mission.adapt;
        if (a.contains("enabled")) ac.enabled = a.at("enabled").get<bool>();
        if (a.contains("capacity")) ac.capacity = a.at("capacity").get<std::size_t>();
        if (a.contains("epsilon")) ac.epsilon = a.at("epsilon").get<double>();
        if (a.contains("period")) ac.period = a.at("period").get<int>();
        if (a.contains("n_samples")) ac.n_samples = a.at("n_samples").get<std::size_t>();
        if (a.contains("max_new")) ac.max_new = a.at("max_new").get<std::size_t>();
        if (a.contains("gust_mean_grid")) ac.gust_mean_grid = a.at("gust_mean_grid").get<std::vector<double>>();
        if (a.contains("gust_var_grid")) ac.gust_var_grid = a.at("gust_var_grid").get<std::vector<double>>();
    }
    if (j.contains("mission")) {
        const auto& m = j.at("mission");
        if (m.contains("max_steps")) cfg.mission.max_steps = m.at("max_steps").get<int>();
        if (m.contains("belief_particles"))
            cfg.mission.belief_particles = m.at("belief_particles").get<int>();
        if (m.contains("onset")) {
            const auto& o = m.at("onset");
            ms::OnsetSpec onset;
            onset.at_step = o.at("step").get<int>();
            if (o.contains("mode")) onset.mode = wind_mode_from(o.at("mode").get<std::string>());
            if (o.contains("p_w")) onset.drift_pw = o.at("p_w").get<double>();
            cfg.mission.onset = onset;
        }
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    cfg.mission.seed = cfg.seed;
    if (cfg.model_env) cfg.mission.model_params = *cfg.model_env;
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    auto cfg = parse_config(j);
    // Resolve a relative map path against the config file's directory.
    if (!cfg.map_path.empty() && cfg.map_path[0] != '/') {
        const auto slash = path.find_last_of('/');
        if (slash != std::string::npos) cfg.map_path = path.substr(0, slash + 1) + cfg.map_path;
    }
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    json j;
    if (!cfg.map_path.empty()) j["map"] = cfg.map_path;
    j["map_text"] = cfg.load_map().emit();  // inline for replayability
    j["env"] = env_to_json(cfg.env);
    if (cfg.model_env) j["model_env"] = env_to_json(*cfg.model_env);
    j["dust"] = {{"uniform", cfg.dust_uniform}, {"kappa", cfg.dust_kappa}, {"lambda", cfg.dust_lambda}};
    const auto& pc = cfg.mission.plan;
    j["planner"] = {{"n_scenarios", pc.n_scenarios},
                    {"max_depth", pc.max_depth},
                    {"expansion_budget", pc.expansion_budget},
                    {"time_budget_ms", pc.time_budget_ms},
                    {"exploration_constant", pc.exploration_constant},
                    {"budget_mode", pc.budget_mode == pl::BudgetMode::Expansions ? "expansions" : "wallclock"},
                    {"rollout", pc.rollout == pl::RolloutKind::Random ? "random" : "greedy-home"},
                    {"discount", cfg.mission.discount}};
    const auto& ac = cfg.mission.adapt;
    j["adapt"] = {{"enabled", ac.enabled},     {"capacity", ac.capacity},
                  {"epsilon", ac.epsilon},     {"period", ac.period},
                  {"n_samples", ac.n_samples}, {"max_new", ac.max_new},
                  {"gust_mean_grid", ac.gust_mean_grid}, {"gust_var_grid", ac.gust_var_grid}};
    json mj = {{"max_steps", cfg.mission.max_steps},
               {"belief_particles", cfg.mission.belief_particles}};
    if (cfg.mission.onset)
        mj["onset"] = {{"step", cfg.mission.onset->at_step},
                       {"mode", wind_mode_name(cfg.mission.onset->mode)},
                       {"p_w", cfg.mission.onset->drift_pw}};
    j["mission"] = std::move(mj);
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    return j;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const RunConfig& cfg) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(config_to_json(cfg).dump())));
    return buf;
}

void Overrides::apply(RunConfig& cfg) const {
    if (seed) {
        cfg.seed = *seed;
        cfg.mission.seed = *seed;
    }
    if (out_dir) cfg.out_dir = *out_dir;
    if (budget_mode) {
        if (*budget_mode == "expansions")
            cfg.mission.plan.budget_mode = pl::BudgetMode::Expansions;
        else if (*budget_mode == "wallclock")
            cfg.mission.plan.budget_mode = pl::BudgetMode::WallClock;
        else
            throw ConfigError("bad --budget-mode: " + *budget_mode);
    }
    if (log_belief) cfg.mission.log_belief = true;
}

minesim::MineMap RunConfig::load_map() const {
    if (!map_text.empty()) return ms::load_map(map_text);
    return ms::load_map_file(map_path);
}

minesim::DustField RunConfig::dust(const minesim::MineMap& map) const {
    return ms::DustField::uniform(map, dust_uniform, dust_kappa, dust_lambda);
}

}  // namespace causalmine::cli
