#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "causalmine/cli/cli.hpp"
#include "causalmine/planner/observational.hpp"
#include "causalmine/scm/serialize.hpp"
#include "causalmine/util/math.hpp"
#include "causalmine/util/parallel.hpp"

namespace causalmine::cli {

using nlohmann::json;
namespace ms = minesim;
namespace pl = planner;
namespace ex = explain;

namespace {

const char* outcome_name(ms::MissionOutcome o) {
    switch (o) {
        case ms::MissionOutcome::Success: return "success";
        case ms::MissionOutcome::Crash: return "crash";
        case ms::MissionOutcome::Timeout: return "timeout";
    }
    return "timeout";
}

json step_line(const ms::StepLog& s, bool deterministic_stats) {
    json planner_stats = {{"expansions", s.plan_stats.expansions},
                          {"depth", s.plan_stats.depth_reached},
                          {"lower", s.plan_stats.lower},
                          {"upper", s.plan_stats.upper},
                          {"elapsed_ms", deterministic_stats ? 0.0 : s.plan_stats.elapsed_ms},
                          {"fallback", s.plan_stats.fallback}};
    json adapt;
    if (s.adapted)
        adapt = {{"map_weight", s.map_hypothesis_weight}, {"map_edit", s.map_edit}};
    json line = {{"type", "step"},
                 {"t", s.t},
                 {"state",
                  {{"x", s.state_before.x},
                   {"y", s.state_before.y},
                   {"wind", int(s.state_before.wind)},
                   {"status", int(s.state_before.status)}}},
                 {"action", s.action},
                 {"obs", {{"ranges", s.obs.ranges}, {"landed", s.obs.landed_flag}}},
                 {"reward", s.reward},
                 {"belief", {{"map_pos", s.belief_map_pos}, {"map_wind", s.belief_map_wind}}},
                 {"planner", std::move(planner_stats)}};
    if (!adapt.is_null()) line["adapt"] = std::move(adapt);
    return line;
}

}  // namespace

std::uint64_t trace_hash(const std::vector<json>& step_lines) {
    std::string acc;
    for (const auto& l : step_lines) {
        acc += l.dump();
        acc += '\n';
    }
    return fnv1a(acc);
}

void write_trace(const std::string& path, const RunConfig& cfg, const ms::MissionResult& result) {
    const bool deterministic = cfg.mission.plan.budget_mode == pl::BudgetMode::Expansions;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace: " + path);
    json header = {{"type", "header"},
                   {"config_hash", config_hash(cfg)},
                   {"seed", cfg.seed},
                   {"config", config_to_json(cfg)}};
    out << header.dump() << "\n";
    std::vector<json> lines;
    for (const auto& s : result.log) lines.push_back(step_line(s, deterministic));
    for (const auto& l : lines) out << l.dump() << "\n";
    json final_state = {{"pos", result.trace.final_state.at("pos")},
                        {"wind", result.trace.final_state.at("wind")},
                        {"status", result.trace.final_state.at("status")}};
    json tail = {{"type", "result"},
                 {"outcome", outcome_name(result.outcome)},
                 {"steps", result.steps},
                 {"total_reward", result.total_reward},
                 {"final_state", std::move(final_state)},
                 {"trace_hash", trace_hash(lines)}};
    if (!result.error.empty()) tail["error"] = result.error;
    out << tail.dump() << "\n";
}

int cmd_map_validate(const std::string& path) {
    try {
        auto map = ms::load_map_file(path);
        std::cout << "OK: " << map.width << "x" << map.height << ", " << map.free_cells().size()
                  << " free cells, " << map.landable_cells().size() << " landable" << std::endl;
        return kExitOk;
    } catch (const ms::MapError& e) {
        std::cerr << "map validation failed: " << e.what() << std::endl;
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << e.what() << std::endl;
        return kExitRuntime;
    }
}

int cmd_sim_run(const RunConfig& cfg) {
    const auto map = cfg.load_map();
    const auto dust = cfg.dust(map);
    auto result = ms::run_mission(map, dust, cfg.env, cfg.mission);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string trace_path = cfg.out_dir + "/trace_" + std::to_string(cfg.seed) + ".jsonl";
    write_trace(trace_path, cfg, result);
    if (cfg.mission.log_belief) {
        for (std::size_t i = 0; i < result.belief_snapshots.size(); ++i) {
            std::ofstream bout(cfg.out_dir + "/belief_t" + std::to_string(i) + ".json");
            bout << result.belief_snapshots[i].dump(2) << "\n";
        }
    }
    json summary = {{"outcome", outcome_name(result.outcome)},
                    {"steps", result.steps},
                    {"total_reward", result.total_reward},
                    {"trace", trace_path},
                    {"config_hash", config_hash(cfg)},
                    {"seed", cfg.seed}};
    if (!result.error.empty()) summary["error"] = result.error;
    std::cout << summary.dump(2) << std::endl;
    return result.error.empty() ? kExitOk : kExitRuntime;
}

namespace {

// Observational-baseline policy: finite-horizon value iteration over the
// conditional tables fitted from confounded pilot logs.
struct ObservationalPolicy {
    pl::ObservationalModel model;
    ms::MineMap map;
    double r_success, r_crash;
    int horizon;
    std::map<pl::StateKey, double> value;

    double reward_of(const pl::StateKey& s, const pl::StateKey& s2) const {
        (void)s;
        if (s2[1] == 1.0) return -1.0 + r_success;
        if (s2[1] == 2.0) return -1.0 - r_crash;
        return -1.0;
    }

    void solve() {
        for (int d = 0; d < horizon; ++d) {
            std::map<pl::StateKey, double> next;
            for (const auto& s : model.support) {
                if (s[1] != 0.0) {
                    next[s] = 0.0;
                    continue;
                }
                double best = -1.0 + (value.count(s) ? value.at(s) : 0.0);  // hover-like floor
                for (int a = 0; a < ms::kNumActions; ++a) {
                    auto row = model.row(s, a);
                    if (!row.supported) continue;
                    double q = 0.0;
                    for (const auto& [s2, p] : row.probs) {
                        double v = 0.0;
                        if (s2[1] == 0.0 && value.count(s2)) v = value.at(s2);
                        q += p * (reward_of(s, s2) + v);
                    }
                    best = std::max(best, q);
                }
                next[s] = best;
            }
            value = std::move(next);
        }
    }

    int act(int pos) const {
        pl::StateKey s{double(pos), 0.0};
        int best_a = int(ms::Action::Hover);
        double best_q = kNegInf;
        for (int a = 0; a < ms::kNumActions; ++a) {
            auto row = model.row(s, a);
            if (!row.supported) continue;
            double q = 0.0;
            for (const auto& [s2, p] : row.probs) {
                double v = 0.0;
                if (s2[1] == 0.0 && value.count(s2)) v = value.at(s2);
                q += p * (reward_of(s, s2) + v);
            }
            if (q > best_q) {
                best_q = q;
                best_a = a;
            }
        }
        return best_a;
    }
};

// Mission driven by the observational baseline; the belief filter supplies
// the position estimate, the fitted tables choose the action.
ms::MissionResult run_observational_mission(const ms::MineMap& map, const ms::DustField& dust,
                                            const ms::EnvParams& env, const ms::MissionConfig& cfg,
                                            const ObservationalPolicy& policy) {
    ms::MissionResult result;
    ms::EnvParams true_env = env;
    Rng env_rng(derive_seed(cfg.seed, 1));
    Rng belief_rng(derive_seed(cfg.seed, 2));
    ms::EnvState state;
    const auto free = map.free_cells();
    const int start = free[env_rng() % free.size()];
    state.x = start % map.width;
    state.y = start / map.width;
    state.wind = static_cast<ms::WindMode>(
        draw_categorical(env_rng, {true_env.wind_prior.begin(), true_env.wind_prior.end()}));
    state.link_lost = true;
    try {
        const ms::EnvParams model = cfg.model_params.value_or(env);
        ms::EnvScmOptions opt;
        opt.drift_spec_set = true;
        opt.drift = ms::DriftSpec::base(model.drift_pw);
        auto view = ms::make_view(ms::env_scm(map, dust, model, opt), map, model, cfg.discount);
        auto belief = ms::initial_belief(map, model, cfg.belief_particles, belief_rng);
        {
            auto obs0 = ms::make_observation(state, map, dust, true_env, env_rng);
            belief = pl::reweight_by_observation(belief, ms::obs_to_assignment(obs0), view, belief_rng)
                         .first;
        }
        for (int t = 0; t < cfg.max_steps; ++t) {
            if (cfg.onset && t == cfg.onset->at_step) {
                true_env.drift_pw = cfg.onset->drift_pw;
                state.wind = cfg.onset->mode;
            }
            int map_pos = -1;
            double best_w = -1.0;
            for (const auto& [s, w] : belief.particles)
                if (w > best_w) {
                    best_w = w;
                    map_pos = int(s.at(ms::EnvScmVars::pos));
                }
            const auto action = static_cast<ms::Action>(policy.act(map_pos));
            auto out = ms::step(state, map, dust, true_env, action, env_rng);
            result.total_reward += out.reward;
            ms::StepLog slog;
            slog.t = t;
            slog.state_before = state;
            slog.action = int(action);
            slog.obs = out.obs;
            slog.reward = out.reward;
            result.log.push_back(slog);
            belief = pl::update_belief(belief, double(int(action)), ms::obs_to_assignment(out.obs),
                                       view, belief_rng)
                         .first;
            state = out.state;
            result.steps = t + 1;
            if (out.done) {
                result.outcome = state.status == ms::Status::Landed ? ms::MissionOutcome::Success
                                                                    : ms::MissionOutcome::Crash;
                break;
            }
        }
    } catch (const std::exception& e) {
        result.outcome = ms::MissionOutcome::Crash;
        result.error = e.what();
    }
    return result;
}

struct PairedCounts {
    int win = 0, lose = 0;
};

// One-sided exact binomial test on discordant pairs: P(X >= win | n, 1/2).
double discordant_p_value(int win, int lose) {
    const int n = win + lose;
    if (n == 0) return 1.0;
    double p = 0.0;
    for (int k = win; k <= n; ++k) {
        double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        p += std::exp(logc - n * std::log(2.0));
    }
    return std::min(1.0, p);
}

}  // namespace

int cmd_eval_batch(const RunConfig& cfg, const BatchOptions& opts) {
    if (opts.missions < 0) throw ConfigError("missions must be >= 0");
    const auto map = cfg.load_map();
    const auto dust = cfg.dust(map);
    std::filesystem::create_directories(cfg.out_dir);

    // Pre-fit the observational baseline once if requested.
    std::optional<ObservationalPolicy> obs_policy;
    for (const auto& v : opts.variants) {
        if (v == "observational") {
            Rng rng(derive_seed(cfg.seed, 0xb5e));
            auto log = ms::gen_observational_log(map, dust, cfg.env, 2000, 30, rng);
            std::vector<pl::SasSample> data;
            for (const auto& r : log)
                data.push_back({{double(r.pos), double(r.status)},
                                r.action,
                                {double(r.pos_next), double(r.status_next)}});
            obs_policy = ObservationalPolicy{pl::fit_observational(data), map, cfg.env.r_success,
                                             cfg.env.r_crash, cfg.mission.max_steps,
                                             {}};
            obs_policy->solve();
        } else if (v != "adapt-on" && v != "adapt-off") {
            throw ConfigError("unknown variant: " + v);
        }
    }

    json summary;
    summary["config_hash"] = config_hash(cfg);
    summary["seed"] = cfg.seed;
    summary["missions"] = opts.missions;
    std::map<std::string, std::vector<ms::MissionResult>> results;

    int threads = opts.threads > 0 ? opts.threads : int(std::thread::hardware_concurrency());
    threads = env_thread_cap(std::max(1, threads));

    std::ofstream csv(cfg.out_dir + "/missions.csv");
    csv << "variant,mission,seed,outcome,steps,total_reward\n";
    for (const auto& variant : opts.variants) {
        std::vector<ms::MissionResult> rs(opts.missions);
        parallel_for_indexed(opts.missions, threads, [&](std::size_t i) {
            ms::MissionConfig mc = cfg.mission;
            mc.seed = derive_seed(cfg.seed, i);  // paired across variants
            mc.adapt.enabled = variant == "adapt-on" && cfg.mission.adapt.enabled;
            if (variant == "observational")
                rs[i] = run_observational_mission(map, dust, cfg.env, mc, *obs_policy);
            else
                rs[i] = ms::run_mission(map, dust, cfg.env, mc);
        });
        int succ = 0;
        double steps = 0.0, reward = 0.0;
        std::vector<double> plan_ms;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            succ += rs[i].outcome == ms::MissionOutcome::Success;
            steps += rs[i].steps;
            reward += rs[i].total_reward;
            for (const auto& l : rs[i].log) plan_ms.push_back(l.plan_stats.elapsed_ms);
            csv << variant << "," << i << "," << derive_seed(cfg.seed, i) << ","
                << outcome_name(rs[i].outcome) << "," << rs[i].steps << "," << rs[i].total_reward
                << "\n";
        }
        json v;
        v["successes"] = succ;
        v["success_rate"] = opts.missions > 0 ? double(succ) / opts.missions : 0.0;
        v["mean_steps"] = opts.missions > 0 ? steps / opts.missions : 0.0;
        v["mean_reward"] = opts.missions > 0 ? reward / opts.missions : 0.0;
        if (!plan_ms.empty() && cfg.mission.plan.budget_mode == pl::BudgetMode::WallClock) {
            std::sort(plan_ms.begin(), plan_ms.end());
            auto pct = [&](double q) { return plan_ms[std::size_t(q * (plan_ms.size() - 1))]; };
            v["plan_ms_p50"] = pct(0.5);
            v["plan_ms_p90"] = pct(0.9);
            v["plan_ms_p99"] = pct(0.99);
        }
        summary["variants"][variant] = std::move(v);
        results[variant] = std::move(rs);
    }

    // Paired comparison: adaptation on vs off.
    if (results.count("adapt-on") && results.count("adapt-off") && opts.missions > 0) {
        const auto& on = results["adapt-on"];
        const auto& off = results["adapt-off"];
        PairedCounts pc;
        for (int i = 0; i < opts.missions; ++i) {
            const bool a = on[i].outcome == ms::MissionOutcome::Success;
            const bool b = off[i].outcome == ms::MissionOutcome::Success;
            if (a && !b) pc.win++;
            if (!a && b) pc.lose++;
        }
        const double diff = double(pc.win - pc.lose) / opts.missions;
        // Wald interval on the paired difference.
        double var = 0.0;
        {
            const double p_win = double(pc.win) / opts.missions;
            const double p_lose = double(pc.lose) / opts.missions;
            var = (p_win + p_lose - (p_win - p_lose) * (p_win - p_lose)) / opts.missions;
        }
        const double half = 1.959963984540054 * std::sqrt(std::max(0.0, var));
        summary["comparison"] = {{"success_rate_diff", diff},
                                 {"ci95_low", diff - half},
                                 {"ci95_high", diff + half},
                                 {"discordant_win", pc.win},
                                 {"discordant_lose", pc.lose},
                                 {"p_value_one_sided", discordant_p_value(pc.win, pc.lose)}};
    }

    std::ofstream out(cfg.out_dir + "/summary.json");
    out << summary.dump(2) << "\n";
    std::cout << summary.dump(2) << std::endl;
    return kExitOk;
}

int cmd_adapt_demo(const RunConfig& cfg, const AdaptDemoOptions& opts) {
    using X = scm::StructuralExpr;
    std::filesystem::create_directories(cfg.out_dir);

    // Fig-style force model: f_total = f_prop + noise, with a root gust
    // indicator g. The truth after onset adds a gated exogenous force.
    scm::Scm base;
    base.exogenous = {{"u_g", scm::NoiseDistribution::categorical({0.5, 0.5})},
                      {"u_prop", scm::NoiseDistribution::gaussian(1.0, 0.01)},
                      {"u_tot", scm::NoiseDistribution::gaussian(0.0, 0.0625)}};
    base.endogenous = {{"g", {}, X::noise_ref(), "u_g"},
                       {"f_prop", {}, X::noise_ref(), "u_prop"},
                       {"f_total", {"f_prop"}, X::linear({1.0}, 0.0, 1.0), "u_tot"}};
    base.validate();

    std::vector<adapt::ProposalRule> rules;
    scm::Scm truth = base;
    if (opts.scenario == "gust-onset") {
        rules.push_back(adapt::ProposalRule::add_gated("f_total", "g", {1.0, 2.0, 3.0}, {0.25}));
        adapt::ModelBelief seed_belief = adapt::ModelBelief::initial(base, 4);
        Rng tmp(1);
        auto props = adapt::gen_alt_scms(seed_belief, {adapt::ProposalRule::add_gated("f_total", "g", {2.0}, {0.25})},
                                         tmp, 1);
        if (props.empty()) throw ConfigError("internal: could not build the truth model");
        truth = props[0].model;
    } else if (opts.scenario == "dust-onset") {
        rules.push_back(adapt::ProposalRule::adjust_linear("f_total", 0, {-0.4, -0.2, 0.2}));
        truth.endogenous[2].mechanism.weights[0] = 0.6;
        truth.validate();
    } else {
        throw ConfigError("unknown scenario: " + opts.scenario);
    }

    auto belief = adapt::ModelBelief::initial(base, cfg.mission.adapt.capacity);
    adapt::AdaptConfig acfg;
    acfg.new_hypothesis_mass = cfg.mission.adapt.epsilon;
    acfg.n_samples = cfg.mission.adapt.n_samples;
    acfg.max_new = cfg.mission.adapt.max_new;

    scm::CompiledScm gen_base(base), gen_truth(truth);
    Rng data_rng(derive_seed(cfg.seed, 7));
    Rng step_rng(derive_seed(cfg.seed, 8));
    std::ofstream csvf(cfg.out_dir + "/posterior.csv");
    csvf << "t,map_edits,map_weight,edited_mass\n";
    std::ofstream summaryf;
    for (int t = 0; t < opts.batches; ++t) {
        adapt::DataBatch batch;
        batch.timestamp = t;
        const auto& gen = t < opts.onset_batch ? gen_base : gen_truth;
        for (int r = 0; r < opts.records_per_batch; ++r) {
            auto full = gen.sample(data_rng);
            batch.records.push_back(
                {{"g", full.at("g")}, {"f_prop", full.at("f_prop")}, {"f_total", full.at("f_total")}});
        }
        belief = adapt::adapt_step(belief, batch, rules, step_rng, acfg);
        const auto& map_hyp = adapt::map_hypothesis(belief);
        double edited_mass = 0.0;
        for (const auto& h : belief.hypotheses)
            if (!h.provenance.empty()) edited_mass += std::exp(h.log_weight);
        csvf << t << "," << map_hyp.provenance.size() << "," << std::exp(map_hyp.log_weight) << ","
             << edited_mass << "\n";
        if (opts.log_belief || cfg.mission.log_belief) {
            std::ofstream bout(cfg.out_dir + "/belief_t" + std::to_string(t) + ".json");
            bout << adapt::belief_to_json(belief).dump(2) << "\n";
        }
    }
    const auto& final_map = adapt::map_hypothesis(belief);
    json summary = {{"scenario", opts.scenario},
                    {"batches", opts.batches},
                    {"onset_batch", opts.onset_batch},
                    {"map_edits", json::array()},
                    {"map_weight", std::exp(final_map.log_weight)},
                    {"posterior_csv", cfg.out_dir + "/posterior.csv"}};
    for (const auto& e : final_map.provenance) summary["map_edits"].push_back(e.id);
    std::cout << summary.dump(2) << std::endl;
    return kExitOk;
}

int cmd_explain(const std::string& trace_path, const std::string& query_path,
                const std::string& out_dir) {
    std::ifstream in(trace_path);
    if (!in) throw ConfigError("cannot open trace: " + trace_path);
    json header;
    ex::Trace trace;
    std::string line;
    json result_line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        const auto type = j.at("type").get<std::string>();
        if (type == "header") {
            header = std::move(j);
        } else if (type == "step") {
            ex::TraceStep step;
            const auto& st = j.at("state");
            const int width = 0;  // state carries x/y; pos index needs the map, resolved below
            (void)width;
            step.state = {{"x_tmp", st.at("x").get<double>()},
                          {"y_tmp", st.at("y").get<double>()},
                          {ms::EnvScmVars::wind, st.at("wind").get<double>()},
                          {ms::EnvScmVars::status, st.at("status").get<double>()}};
            step.action = j.at("action").get<double>();
            const auto& ranges = j.at("obs").at("ranges");
            for (int d = 0; d < 4; ++d)
                step.observation[ms::EnvScmVars::beams[d]] = ranges.at(d).get<double>();
            step.reward = j.at("reward").get<double>();
            trace.steps.push_back(std::move(step));
        } else if (type == "result") {
            result_line = std::move(j);
        }
    }
    if (header.is_null()) throw ConfigError("trace has no header record");
    if (trace.steps.empty()) throw ConfigError("trace has no steps");
    auto cfg = parse_config(header.at("config"));
    const auto map = cfg.load_map();
    const auto dust = cfg.dust(map);
    for (auto& step : trace.steps) {
        const int pos = map.index(int(step.state.at("x_tmp")), int(step.state.at("y_tmp")));
        step.state.erase("x_tmp");
        step.state.erase("y_tmp");
        step.state[ms::EnvScmVars::pos] = double(pos);
    }
    if (!result_line.is_null() && result_line.contains("final_state")) {
        const auto& fs = result_line.at("final_state");
        trace.final_state = {{ms::EnvScmVars::pos, fs.at("pos").get<double>()},
                             {ms::EnvScmVars::wind, fs.at("wind").get<double>()},
                             {ms::EnvScmVars::status, fs.at("status").get<double>()}};
    } else {
        throw ConfigError("trace has no result record with the final state");
    }

    std::ifstream qin(query_path);
    if (!qin) throw ConfigError("cannot open query: " + query_path);
    json q;
    qin >> q;

    const int T = trace.horizon();
    // The observed environment dynamics include any mid-mission onset; the
    // ground-truth model for explanation uses the post-onset drift strength
    // when the onset happened before the end of the trace.
    ms::EnvParams env = cfg.env;
    if (cfg.mission.onset && cfg.mission.onset->at_step < T) env.drift_pw = cfg.mission.onset->drift_pw;
    auto one_step = ms::env_scm(map, dust, env);
    auto unrolled = ex::unroll(one_step, T);
    scm::CompiledScm compiled(std::move(unrolled));

    ex::OutcomePredicate outcome;
    {
        const auto& oj = q.at("outcome");
        std::string var = oj.at("var").get<std::string>();
        int t = T;
        if (oj.contains("t")) {
            if (oj.at("t").is_string()) {
                if (oj.at("t").get<std::string>() != "final") throw ConfigError("bad outcome time");
            } else {
                t = oj.at("t").get<int>();
            }
        }
        outcome.var = ex::at_time(var, t);
        if (compiled.slot_of(outcome.var) < 0)
            throw ConfigError("outcome variable not in the unrolled model: " + outcome.var);
        const auto cmp = oj.contains("cmp") ? oj.at("cmp").get<std::string>() : "eq";
        if (cmp == "eq")
            outcome.cmp = ex::OutcomePredicate::Cmp::Eq;
        else if (cmp == "ne")
            outcome.cmp = ex::OutcomePredicate::Cmp::Ne;
        else if (cmp == "gt")
            outcome.cmp = ex::OutcomePredicate::Cmp::Gt;
        else if (cmp == "lt")
            outcome.cmp = ex::OutcomePredicate::Cmp::Lt;
        else if (cmp == "ge")
            outcome.cmp = ex::OutcomePredicate::Cmp::Ge;
        else if (cmp == "le")
            outcome.cmp = ex::OutcomePredicate::Cmp::Le;
        else
            throw ConfigError("bad outcome comparator: " + cmp);
        outcome.value = oj.at("value").get<double>();
    }

    std::vector<ex::CauseCandidate> candidates;
    if (q.contains("candidates") && !q.at("candidates").empty()) {
        for (const auto& cj : q.at("candidates")) {
            ex::CauseCandidate c;
            c.var = cj.at("var").get<std::string>();
            c.t = cj.at("t").get<int>();
            if (compiled.slot_of(c.unrolled_name()) < 0)
                throw ConfigError("candidate variable not in the unrolled model: " + c.unrolled_name());
            if (cj.contains("factual")) {
                c.factual = cj.at("factual").get<double>();
            } else if (c.t < T && trace.steps[c.t].state.count(c.var)) {
                c.factual = trace.steps[c.t].state.at(c.var);
            } else if (c.t < T && c.var == ms::EnvScmVars::action) {
                c.factual = trace.steps[c.t].action;
            } else {
                throw ConfigError("candidate needs an explicit factual value: " + c.unrolled_name());
            }
            if (cj.contains("alternatives"))
                c.alternatives = cj.at("alternatives").get<std::vector<double>>();
            if (c.alternatives.empty())
                throw ConfigError("candidate needs alternatives: " + c.unrolled_name());
            candidates.push_back(std::move(c));
        }
    } else {
        candidates = ms::default_candidates(trace);
    }
    const std::size_t n_particles = q.contains("n_particles") ? q.at("n_particles").get<std::size_t>() : 400;

    Rng rng(derive_seed(header.at("seed").get<std::uint64_t>(), 0xe8b1a));
    auto evidence = ex::trace_evidence(trace, one_step);
    auto explanation = ex::rank_causes(compiled, evidence, outcome, candidates, n_particles, rng);

    json report;
    report["query"] = q;
    report["trace"] = trace_path;
    report["model"] = {{"kind", "ground-truth-env"}, {"hash", header.at("config_hash")}, {"horizon", T}};
    json ranked = json::array();
    for (const auto& cs : explanation.ranked) {
        ranked.push_back({{"var", cs.candidate.unrolled_name()},
                          {"factual", cs.candidate.factual},
                          {"best_alternative", cs.best_alternative},
                          {"pn", cs.pn},
                          {"pn_se", cs.pn_se},
                          {"ps", cs.ps},
                          {"ps_se", cs.ps_se},
                          {"score", cs.score},
                          {"counterfactual_outcome_prob", cs.counterfactual_outcome_prob}});
    }
    report["ranked"] = std::move(ranked);
    report["summary"] = explanation.summary;
    if (!explanation.ranked.empty())
        report["top_cause"] = explanation.ranked[0].candidate.unrolled_name();

    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/explanation.json");
    out << report.dump(2) << "\n";
    std::cout << "outcome: " << outcome.text() << "\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, explanation.summary.size()); ++i)
        std::cout << (i == 0 ? "top cause: " : "           ") << explanation.summary[i] << "\n";
    std::cout << "report: " << out_dir << "/explanation.json" << std::endl;
    return kExitOk;
}

}  // namespace causalmine::cli
