#include "causalmine/minesim/mission.hpp"
#include <memory>

#include <algorithm>
#include <cmath>

#include "causalmine/scm/serialize.hpp"

namespace causalmine::minesim {

scm::Assignment obs_to_assignment(const ObsRecord& obs) {
    scm::Assignment a;
    for (int dir = 0; dir < 4; ++dir) a[EnvScmVars::beams[dir]] = double(obs.ranges[dir]);
    return a;
}

namespace {

struct MapState {
    int pos = -1;
    int wind = 0;
    double weight = 0.0;
};

MapState belief_map_state(const planner::BeliefState& b) {
    MapState m;
    for (const auto& [state, w] : b.particles) {
        if (w > m.weight) {
            m.weight = w;
            m.pos = static_cast<int>(state.at(EnvScmVars::pos));
            m.wind = static_cast<int>(state.at(EnvScmVars::wind));
        }
    }
    return m;
}

int axis_of_delta(int delta, int width) { return std::abs(delta) == 1 ? 0 : (delta == 0 ? -1 : 1); }

// Drift evidence from consecutive position estimates. Returns nullopt when
// the displacement is aliased (move along the gust axis) or inconsistent
// with the transition rules (estimation error).
std::optional<int> detect_drift(int pos_before, int pos_after, Action action, WindMode wind,
                                const MineMap& map) {
    if (wind == WindMode::Calm) return std::nullopt;
    const int g = gust_dx(wind) + gust_dy(wind) * map.width;
    const int dx = action_dx(action), dy = action_dy(action);
    const int m = dx + dy * map.width;
    if (m != 0 && axis_of_delta(m, map.width) == axis_of_delta(g, map.width)) return std::nullopt;
    const int disp = pos_after - pos_before;
    if (disp == g || disp == m + g) return 1;
    if (disp == 0 || disp == m) return 0;
    return std::nullopt;
}

}  // namespace

MissionResult run_mission(const MineMap& map, const DustField& dust, const EnvParams& true_params,
                          const MissionConfig& config) {
    MissionResult result;
    EnvParams env = true_params;
    const EnvParams model = config.model_params.value_or(true_params);

    Rng env_rng(derive_seed(config.seed, 1));
    Rng belief_rng(derive_seed(config.seed, 2));
    Rng adapt_rng(derive_seed(config.seed, 3));

    // Drop at a uniformly random free cell; the link is lost from the start.
    EnvState state;
    {
        const auto free = map.free_cells();
        const int start = free[env_rng() % free.size()];
        state.x = start % map.width;
        state.y = start / map.width;
        state.wind = static_cast<WindMode>(
            draw_categorical(env_rng, {env.wind_prior.begin(), env.wind_prior.end()}));
        state.link_lost = true;
    }

    try {
        EnvScmOptions opt;
        opt.drift_spec_set = true;
        opt.drift = DriftSpec::base(model.drift_pw);
        auto view = std::make_unique<planner::PomdpView>(
            make_view(env_scm(map, dust, model, opt), map, model, config.discount));

        auto belief = initial_belief(map, model, config.belief_particles, belief_rng);
        {
            auto obs0 = make_observation(state, map, dust, env, env_rng);
            auto [b, st] = planner::reweight_by_observation(belief, obs_to_assignment(obs0), *view,
                                                            belief_rng);
            belief = std::move(b);
        }

        adapt::ModelBelief model_belief;
        std::vector<adapt::ProposalRule> rules;
        std::string map_key;
        if (config.adapt.enabled) {
            model_belief = adapt::ModelBelief::initial(drift_model_scm(model.drift_pw),
                                                       config.adapt.capacity);
            rules.push_back(adapt::ProposalRule::add_gated(EnvScmVars::f_wind, "wind_active",
                                                           config.adapt.gust_mean_grid,
                                                           config.adapt.gust_var_grid));
            map_key = scm::canonical_key(adapt::map_model(model_belief));
        }
        adapt::DataBatch pending;

        for (int t = 0; t < config.max_steps; ++t) {
            if (config.onset && t == config.onset->at_step) {
                env.drift_pw = config.onset->drift_pw;
                state.wind = config.onset->mode;
            }

            auto plan_cfg = config.plan;
            plan_cfg.seed = derive_seed(config.seed, 1000 + t);
            const auto before = belief_map_state(belief);
            auto planned = planner::plan(belief, *view, plan_cfg);
            const auto action = static_cast<Action>(int(planned.action));

            auto out = step(state, map, dust, env, action, env_rng);
            result.total_reward += out.reward;

            explain::TraceStep ts;
            ts.state = {{EnvScmVars::pos, double(map.index(state.x, state.y))},
                        {EnvScmVars::wind, double(int(state.wind))},
                        {EnvScmVars::status, double(int(state.status))}};
            ts.action = planned.action;
            ts.observation = obs_to_assignment(out.obs);
            ts.reward = out.reward;
            result.trace.steps.push_back(std::move(ts));

            StepLog slog;
            slog.t = t;
            slog.state_before = state;
            slog.action = int(action);
            slog.obs = out.obs;
            slog.reward = out.reward;
            slog.plan_stats = planned.stats;

            auto [nb, ust] = planner::update_belief(belief, planned.action,
                                                    obs_to_assignment(out.obs), *view, belief_rng);
            belief = std::move(nb);
            const auto after = belief_map_state(belief);
            slog.belief_map_pos = after.pos;
            slog.belief_map_wind = after.wind;

            if (config.adapt.enabled) {
                // Drift evidence: the estimated displacement versus the
                // commanded move, gated on the believed wind regime. The
                // post-update estimate is used: this step's beams have
                // already corrected it.
                if (before.pos >= 0) {
                    auto drift = detect_drift(before.pos, after.pos, action,
                                              static_cast<WindMode>(after.wind), map);
                    if (drift)
                        pending.records.push_back(
                            {{"wind_active", 1.0}, {"drift", double(*drift)}});
                }
                if ((t + 1) % config.adapt.period == 0 && !pending.records.empty()) {
                    adapt::AdaptConfig acfg;
                    acfg.new_hypothesis_mass = config.adapt.epsilon;
                    acfg.max_new = config.adapt.max_new;
                    acfg.n_samples = config.adapt.n_samples;
                    pending.timestamp = model_belief.t;
                    model_belief = adapt::adapt_step(model_belief, pending, rules, adapt_rng, acfg);
                    pending.records.clear();
                    slog.adapted = true;
                    if (config.log_belief)
                        result.belief_snapshots.push_back(adapt::belief_to_json(model_belief));
                    const auto& map_hyp = adapt::map_hypothesis(model_belief);
                    slog.map_hypothesis_weight = std::exp(map_hyp.log_weight);
                    if (!map_hyp.provenance.empty()) slog.map_edit = map_hyp.provenance.back().id;
                    auto key = scm::canonical_key(map_hyp.model);
                    if (key != map_key) {
                        map_key = std::move(key);
                        EnvScmOptions nopt;
                        nopt.drift_spec_set = true;
                        nopt.drift = extract_drift_spec(map_hyp.model);
                        view = std::make_unique<planner::PomdpView>(
                            make_view(env_scm(map, dust, model, nopt), map, model, config.discount));
                    }
                }
            }

            result.log.push_back(std::move(slog));
            state = out.state;
            result.steps = t + 1;
            if (out.done) {
                result.outcome = state.status == Status::Landed ? MissionOutcome::Success
                                                                : MissionOutcome::Crash;
                break;
            }
        }
    } catch (const std::exception& e) {
        result.outcome = MissionOutcome::Crash;
        result.error = e.what();
    }
    result.trace.final_state = {{EnvScmVars::pos, double(map.index(state.x, state.y))},
                                {EnvScmVars::wind, double(int(state.wind))},
                                {EnvScmVars::status, double(int(state.status))}};
    return result;
}

std::vector<explain::CauseCandidate> default_candidates(const explain::Trace& trace) {
    std::vector<explain::CauseCandidate> out;
    for (int t = 0; t < trace.horizon(); ++t) {
        const auto& step = trace.steps[t];
        explain::CauseCandidate wind;
        wind.var = EnvScmVars::wind;
        wind.t = t;
        wind.factual = step.state.at(EnvScmVars::wind);
        for (int w = 0; w < kNumWindModes; ++w)
            if (double(w) != wind.factual) wind.alternatives.push_back(double(w));
        out.push_back(std::move(wind));

        explain::CauseCandidate act;
        act.var = EnvScmVars::action;
        act.t = t;
        act.factual = step.action;
        for (int a = 0; a < kNumActions; ++a)
            if (double(a) != act.factual) act.alternatives.push_back(double(a));
        out.push_back(std::move(act));
    }
    return out;
}

}  // namespace causalmine::minesim
