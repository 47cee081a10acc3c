#include "causalmine/planner/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "causalmine/util/math.hpp"

namespace causalmine::planner {

namespace {

std::vector<int> obs_own_sources(const scm::CompiledScm& scm, int ei) {
    std::vector<int> s{scm.noise_slot(ei)};
    for (int ps : scm.parent_slots(ei))
        if (!scm.slot_is_endo(ps) && std::find(s.begin(), s.end(), ps) == s.end()) s.push_back(ps);
    return s;
}

}  // namespace

PomdpView::PomdpView(scm::Scm model, std::vector<double> action_domain, double discount)
    : compiled_(std::move(model)), action_domain_(std::move(action_domain)), discount_(discount) {
    const auto& m = compiled_.model();
    const auto& labels = m.labels;
    state_vars_ = labels.state;
    observation_vars_ = labels.observation;
    confounder_vars_ = labels.confounder;
    if (labels.action.size() != 1) throw PlannerError("view needs exactly one action variable");
    if (labels.reward.size() != 1) throw PlannerError("view needs exactly one reward variable");
    action_var_ = labels.action[0];
    reward_var_ = labels.reward[0];
    if (!(discount_ > 0.0 && discount_ <= 1.0)) throw PlannerError("discount must be in (0,1]");
    if (action_domain_.empty()) throw PlannerError("empty action domain");

    // Functional label sets must be pairwise disjoint (confounders may
    // overlap state: an unobserved state variable).
    std::set<std::string> seen;
    for (const auto& v : state_vars_)
        if (!seen.insert(v).second) throw PlannerError("duplicate state label " + v);
    for (const auto& v : observation_vars_)
        if (!seen.insert(v).second) throw PlannerError("label sets not disjoint at " + v);
    if (!seen.insert(action_var_).second) throw PlannerError("action label overlaps");
    if (!seen.insert(reward_var_).second) throw PlannerError("reward label overlaps");
    for (const auto& c : confounder_vars_)
        if (c == action_var_ || c == reward_var_ ||
            std::find(observation_vars_.begin(), observation_vars_.end(), c) != observation_vars_.end())
            throw PlannerError("confounder " + c + " must be unobserved");

    const int ai = m.endo_index(action_var_);
    if (ai < 0) throw PlannerError("action variable must be endogenous");
    action_slot_ = compiled_.endo_slot(ai);
    const int ri = m.endo_index(reward_var_);
    if (ri < 0) throw PlannerError("reward variable must be endogenous");
    reward_slot_ = compiled_.endo_slot(ri);
    // The reward adds no stochasticity of its own.
    if (!m.exogenous[compiled_.noise_slot(ri)].dist.degenerate() &&
        m.endogenous[ri].mechanism.uses_noise())
        throw PlannerError("reward variable must be deterministic given its parents");

    for (const auto& s : state_vars_) {
        const int si = m.endo_index(s);
        if (si < 0) throw PlannerError("state variable must be endogenous: " + s);
        state_slots_.push_back(compiled_.endo_slot(si));
        auto it = labels.next_of.find(s);
        if (it == labels.next_of.end()) throw PlannerError("state variable lacks next wiring: " + s);
        const int ni = m.endo_index(it->second);
        if (ni < 0) throw PlannerError("next-state variable must be endogenous: " + it->second);
        next_slots_.push_back(compiled_.endo_slot(ni));
    }
    for (const auto& o : observation_vars_) {
        const int oi = m.endo_index(o);
        if (oi < 0) throw PlannerError("observation variable must be endogenous: " + o);
        obs_slots_.push_back(compiled_.endo_slot(oi));
        obs_endo_.push_back(oi);
    }
}

std::vector<double> PomdpView::state_to_vec(const scm::Assignment& a) const {
    std::vector<double> v;
    v.reserve(state_vars_.size());
    for (const auto& name : state_vars_) {
        auto it = a.find(name);
        if (it == a.end()) throw PlannerError("state assignment missing " + name);
        v.push_back(it->second);
    }
    return v;
}

scm::Assignment PomdpView::vec_to_state(std::span<const double> v) const {
    scm::Assignment a;
    for (std::size_t i = 0; i < state_vars_.size(); ++i) a[state_vars_[i]] = v[i];
    return a;
}

scm::Assignment PomdpView::vec_to_obs(std::span<const double> v) const {
    scm::Assignment a;
    for (std::size_t i = 0; i < observation_vars_.size(); ++i) a[observation_vars_[i]] = v[i];
    return a;
}

double PomdpView::heuristic(std::span<const double> state, int remaining) const {
    if (remaining <= 0 || terminal(state)) return 0.0;
    if (upper_heuristic) return upper_heuristic(state, remaining);
    // Admissible generic bound: the best per-step reward at every remaining step.
    double u = 0.0, g = 1.0;
    for (int k = 0; k < remaining; ++k) {
        u += g * reward_max;
        g *= discount_;
    }
    return u;
}

int PomdpView::default_action_index(std::span<const double> state, Rng& rng) const {
    if (rollout_policy) return rollout_policy(state, rng);
    return static_cast<int>(rng() % action_domain_.size());
}

void BeliefState::normalize() {
    double s = weight_sum();
    if (s <= 0.0) throw EmptyBelief("belief has zero total weight");
    for (auto& [a, w] : particles) w /= s;
}

double BeliefState::weight_sum() const {
    double s = 0.0;
    for (const auto& [a, w] : particles) s += w;
    return s;
}

double BeliefState::ess() const {
    double s = 0.0, s2 = 0.0;
    for (const auto& [a, w] : particles) {
        s += w;
        s2 += w * w;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

BeliefState BeliefState::point_mass(const scm::Assignment& state) {
    BeliefState b;
    b.particles.push_back({state, 1.0});
    return b;
}

void PlanConfig::validate() const {
    if (n_scenarios < 1) throw PlannerError("n_scenarios must be >= 1");
    if (max_depth < 1) throw PlannerError("max_depth must be >= 1");
    if (budget_mode == BudgetMode::Expansions && expansion_budget < 1)
        throw PlannerError("expansion budget must be >= 1");
    if (budget_mode == BudgetMode::WallClock && time_budget_ms <= 0.0)
        throw PlannerError("time budget must be > 0");
}

namespace {

// Deterministic transition into caller-provided buffers.
struct FastTransition {
    const PomdpView& view;
    std::vector<double> values;
    std::vector<int> forced;

    explicit FastTransition(const PomdpView& v) : view(v), values(v.compiled().n_slots(), 0.0) {
        forced = view.state_slots();
        forced.push_back(view.action_slot());
    }

    // noise: span over all exogenous slots. Returns reward.
    double run(std::span<const double> state, double action, std::span<const double> noise,
               std::vector<double>& next, std::vector<double>& obs) {
        const auto& c = view.compiled();
        std::copy(noise.begin(), noise.end(), values.begin());
        for (std::size_t i = 0; i < view.state_slots().size(); ++i)
            values[view.state_slots()[i]] = state[i];
        values[view.action_slot()] = action;
        c.eval_endogenous(values, forced);
        next.resize(view.next_slots().size());
        for (std::size_t i = 0; i < view.next_slots().size(); ++i) next[i] = values[view.next_slots()[i]];
        obs.resize(view.obs_slots().size());
        for (std::size_t i = 0; i < view.obs_slots().size(); ++i) obs[i] = values[view.obs_slots()[i]];
        return values[view.reward_slot()];
    }
};

int action_index(const PomdpView& view, double action) {
    const auto& dom = view.action_domain();
    for (std::size_t i = 0; i < dom.size(); ++i)
        if (dom[i] == action) return static_cast<int>(i);
    return -1;
}

}  // namespace

TransitionOut causal_transition(const PomdpView& view, const scm::Assignment& state, double action,
                                const scm::Assignment& scenario_noise) {
    if (action_index(view, action) < 0)
        throw UnknownAction("causal_transition: action outside the domain");
    const auto& c = view.compiled();
    std::vector<double> noise(c.n_exo(), 0.0);
    for (std::size_t i = 0; i < c.n_exo(); ++i) {
        const auto& name = c.model().exogenous[i].name;
        auto it = scenario_noise.find(name);
        noise[i] = it != scenario_noise.end() ? it->second : c.model().exogenous[i].dist.degenerate_value();
    }
    FastTransition ft(view);
    std::vector<double> next, obs;
    auto sv = view.state_to_vec(state);
    const double reward = ft.run(sv, action, noise, next, obs);
    TransitionOut out;
    out.next_state = view.vec_to_state(next);
    out.observation = view.vec_to_obs(obs);
    out.reward = reward;
    out.terminal = view.terminal(next);
    return out;
}

namespace {

struct Scenario {
    std::vector<double> start;
    std::vector<double> noise;  // [depth][exo] flattened
};

struct QNode;

struct VNode {
    int depth = 0;
    std::vector<int> scen;                   // scenario ids
    std::vector<std::vector<double>> state;  // per scenario state vector
    double lb = 0.0, ub = 0.0;
    bool expanded = false;
    bool all_terminal = false;
    long visits = 0;
    std::vector<QNode> q;
};

struct QNode {
    double immediate = 0.0;  // scenario-mean immediate reward
    double lb = 0.0, ub = 0.0;
    long visits = 0;
    std::vector<int> children;       // vnode ids
    std::vector<double> child_frac;  // |child scen| / |node scen|
};

struct Search {
    const PomdpView& view;
    const PlanConfig& cfg;
    std::vector<Scenario> scenarios;
    std::vector<VNode> nodes;
    FastTransition ft;
    long expansions = 0;
    int depth_reached = 0;
    std::uint64_t rollout_seed;

    Search(const PomdpView& v, const PlanConfig& c) : view(v), cfg(c), ft(v) {
        rollout_seed = derive_seed(cfg.seed, 0x9011);
    }

    std::span<const double> noise_at(int scen, int depth) const {
        const std::size_t e = view.compiled().n_exo();
        return {scenarios[scen].noise.data() + std::size_t(depth) * e, e};
    }

    double rollout(int scen, std::span<const double> state0, int depth) {
        Rng rng(derive_seed(rollout_seed, scen, depth));
        std::vector<double> s(state0.begin(), state0.end()), next, obs;
        double value = 0.0, g = 1.0;
        for (int d = depth; d < cfg.max_depth; ++d) {
            if (view.terminal(s)) break;
            const int ai = view.default_action_index(s, rng);
            const double r = ft.run(s, view.action_domain()[ai], noise_at(scen, d), next, obs);
            value += g * r;
            g *= view.discount();
            s = next;
        }
        return value;
    }

    void init_bounds(VNode& v) {
        double lb = 0.0, ub = 0.0;
        bool all_term = true;
        for (std::size_t i = 0; i < v.scen.size(); ++i) {
            const auto& s = v.state[i];
            if (view.terminal(s)) continue;
            all_term = false;
            lb += rollout(v.scen[i], s, v.depth);
            ub += view.heuristic(s, cfg.max_depth - v.depth);
        }
        const double n = double(v.scen.size());
        v.lb = lb / n;
        v.ub = ub / n;
        if (v.ub < v.lb) v.ub = v.lb;  // heuristic and rollout agree at worst
        v.all_terminal = all_term;
    }

    // nodes may reallocate while children are appended; work from copies and
    // only touch the arena through indices.
    void expand(int vid) {
        const auto& dom = view.action_domain();
        const int depth = nodes[vid].depth;
        const std::vector<int> scen = nodes[vid].scen;
        const std::vector<std::vector<double>> states = nodes[vid].state;
        std::vector<QNode> qs(dom.size());
        std::vector<double> next, obs;
        for (std::size_t a = 0; a < dom.size(); ++a) {
            QNode& q = qs[a];
            double imm = 0.0;
            std::map<std::vector<double>, int> child_of;  // obs -> child vnode id
            for (std::size_t i = 0; i < scen.size(); ++i) {
                if (view.terminal(states[i])) continue;
                const double r = ft.run(states[i], dom[a], noise_at(scen[i], depth), next, obs);
                imm += r;
                if (view.terminal(next) || depth + 1 >= cfg.max_depth) continue;
                auto [it, inserted] = child_of.try_emplace(obs, -1);
                if (inserted) {
                    it->second = static_cast<int>(nodes.size());
                    nodes.push_back({});
                    nodes.back().depth = depth + 1;
                    q.children.push_back(it->second);
                }
                nodes[it->second].scen.push_back(scen[i]);
                nodes[it->second].state.push_back(next);
            }
            q.immediate = imm / double(scen.size());
            for (int cid : q.children) {
                init_bounds(nodes[cid]);
                q.child_frac.push_back(double(nodes[cid].scen.size()) / double(scen.size()));
            }
        }
        nodes[vid].q = std::move(qs);
        nodes[vid].expanded = true;
        ++expansions;
        depth_reached = std::max(depth_reached, depth);
        backup_q(nodes[vid]);
    }

    void backup_q(VNode& v) {
        double best_lb = kNegInf, best_ub = kNegInf;
        for (auto& q : v.q) {
            double lb = q.immediate, ub = q.immediate;
            for (std::size_t c = 0; c < q.children.size(); ++c) {
                lb += view.discount() * q.child_frac[c] * nodes[q.children[c]].lb;
                ub += view.discount() * q.child_frac[c] * nodes[q.children[c]].ub;
            }
            q.lb = lb;
            q.ub = ub;
            best_lb = std::max(best_lb, lb);
            best_ub = std::max(best_ub, ub);
        }
        // Keep the default-policy value as a valid fallback lower bound.
        v.lb = std::max(v.lb, best_lb);
        v.ub = std::min(v.ub, std::max(best_ub, v.lb));
    }

    // One trial: descend optimistically, expand one leaf, back up the path.
    void trial() {
        std::vector<int> path;
        int cur = 0;
        while (true) {
            path.push_back(cur);
            if (!nodes[cur].expanded) {
                if (nodes[cur].all_terminal || nodes[cur].depth >= cfg.max_depth) break;
                expand(cur);
                break;
            }
            if (nodes[cur].all_terminal || nodes[cur].q.empty()) break;
            // Action: optimistic upper bound + exploration bonus.
            nodes[cur].visits++;
            std::size_t best_a = 0;
            double best_score = kNegInf;
            for (std::size_t a = 0; a < nodes[cur].q.size(); ++a) {
                const double bonus =
                    cfg.exploration_constant *
                    std::sqrt(std::log(double(nodes[cur].visits + 1)) / double(nodes[cur].q[a].visits + 1));
                const double score = nodes[cur].q[a].ub + bonus;
                if (score > best_score) {
                    best_score = score;
                    best_a = a;
                }
            }
            QNode& q = nodes[cur].q[best_a];
            q.visits++;
            if (q.children.empty()) break;
            // Observation child: widest weighted gap.
            int best_c = -1;
            double best_gap = -1.0;
            for (std::size_t c = 0; c < q.children.size(); ++c) {
                const VNode& ch = nodes[q.children[c]];
                const double gap = q.child_frac[c] * (ch.ub - ch.lb);
                if (gap > best_gap) {
                    best_gap = gap;
                    best_c = q.children[c];
                }
            }
            if (best_c < 0 || best_gap <= 1e-12) break;
            cur = best_c;
        }
        for (auto it = path.rbegin(); it != path.rend(); ++it)
            if (nodes[*it].expanded) backup_q(nodes[*it]);
    }
};

}  // namespace

PlanResult plan(const BeliefState& belief, const PomdpView& view, const PlanConfig& cfg) {
    cfg.validate();
    if (belief.particles.empty()) throw EmptyBelief("plan: empty belief");
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    };

    Search search(view, cfg);
    Rng rng(derive_seed(cfg.seed, 0x5ce7));
    // Scenarios: belief-sampled start states plus pre-drawn noise streams.
    std::vector<double> cdf;
    double acc = 0.0;
    for (const auto& [a, w] : belief.particles) cdf.push_back(acc += w);
    const std::size_t n_exo = view.compiled().n_exo();
    search.scenarios.resize(cfg.n_scenarios);
    for (int k = 0; k < cfg.n_scenarios; ++k) {
        const double u = draw_uniform(rng) * acc;
        std::size_t pick = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        pick = std::min(pick, belief.particles.size() - 1);
        search.scenarios[k].start = view.state_to_vec(belief.particles[pick].first);
        search.scenarios[k].noise.resize(n_exo * (cfg.max_depth + 1));
        for (int d = 0; d <= cfg.max_depth; ++d)
            view.compiled().draw_exogenous(
                {search.scenarios[k].noise.data() + std::size_t(d) * n_exo, n_exo}, rng);
    }

    search.nodes.push_back({});
    VNode& root0 = search.nodes[0];
    for (int k = 0; k < cfg.n_scenarios; ++k) {
        root0.scen.push_back(k);
        root0.state.push_back(search.scenarios[k].start);
    }
    search.init_bounds(search.nodes[0]);

    while (true) {
        const VNode& root = search.nodes[0];
        if (root.expanded && root.ub - root.lb <= 1e-9) break;
        if (root.all_terminal) break;
        if (cfg.budget_mode == BudgetMode::Expansions) {
            if (search.expansions >= cfg.expansion_budget) break;
        } else if (elapsed_ms() >= cfg.time_budget_ms) {
            break;
        }
        search.trial();
    }

    PlanResult out;
    const VNode& root = search.nodes[0];
    out.stats.expansions = search.expansions;
    out.stats.depth_reached = search.depth_reached + 1;
    out.stats.elapsed_ms = elapsed_ms();
    if (!root.expanded || root.q.empty()) {
        // Budget exhausted before the first expansion: fall back to the
        // rollout policy's choice on the highest-weight particle.
        std::size_t best = 0;
        for (std::size_t i = 1; i < belief.particles.size(); ++i)
            if (belief.particles[i].second > belief.particles[best].second) best = i;
        Rng frng(derive_seed(cfg.seed, 0xfa11));
        const auto sv = view.state_to_vec(belief.particles[best].first);
        out.action = view.action_domain()[view.default_action_index(sv, frng)];
        out.lower = root.lb;
        out.upper = root.ub;
        out.stats.fallback = true;
        out.stats.lower = out.lower;
        out.stats.upper = out.upper;
        return out;
    }
    std::size_t best_a = 0;
    for (std::size_t a = 1; a < root.q.size(); ++a)
        if (root.q[a].lb > root.q[best_a].lb) best_a = a;
    out.action = view.action_domain()[best_a];
    out.lower = root.q[best_a].lb;
    out.upper = root.q[best_a].ub;
    out.stats.lower = root.lb;
    out.stats.upper = root.ub;
    return out;
}

namespace {

double observation_loglik(const PomdpView& view, std::vector<double>& values,
                          const std::vector<double>& obs) {
    const auto& c = view.compiled();
    std::vector<char> known(c.n_slots(), 1);
    double ll = 0.0;
    for (std::size_t i = 0; i < view.obs_endo().size(); ++i) {
        const int ei = view.obs_endo()[i];
        const auto srcs = obs_own_sources(c, ei);
        auto cond = scm::analyze_conditional(c, ei, values, known, srcs);
        if (cond.exact) {
            ll += cond.log_prob_at(obs[i]);
        } else {
            // Fall back to exact match on the sampled draw.
            ll += std::abs(values[view.obs_slots()[i]] - obs[i]) <= 1e-9 ? 0.0 : kNegInf;
        }
        if (!std::isfinite(ll)) return kNegInf;
        values[view.obs_slots()[i]] = obs[i];
    }
    return ll;
}

BeliefState systematic_resample(const BeliefState& b, std::size_t n, Rng& rng) {
    BeliefState out;
    std::vector<double> cdf;
    double acc = 0.0;
    for (const auto& [a, w] : b.particles) cdf.push_back(acc += w);
    const double step = acc / double(n);
    double u = draw_uniform(rng) * step;
    std::size_t idx = 0;
    for (std::size_t k = 0; k < n; ++k) {
        while (idx + 1 < cdf.size() && cdf[idx] < u) ++idx;
        out.particles.push_back({b.particles[idx].first, 1.0 / double(n)});
        u += step;
    }
    return out;
}

}  // namespace

std::pair<BeliefState, BeliefUpdateStats> update_belief(const BeliefState& belief, double action,
                                                        const scm::Assignment& observation,
                                                        const PomdpView& view, Rng& rng) {
    if (belief.particles.empty()) throw EmptyBelief("update_belief: empty belief");
    if (action_index(view, action) < 0) throw UnknownAction("update_belief: action outside the domain");
    BeliefUpdateStats stats;
    const auto& c = view.compiled();
    std::vector<double> obs_vec;
    for (const auto& name : view.observation_vars()) obs_vec.push_back(observation.at(name));

    FastTransition ft(view);
    BeliefState next;
    std::vector<double> noise(c.n_exo());
    std::vector<double> nx, ob;
    for (const auto& [state, w] : belief.particles) {
        auto sv = view.state_to_vec(state);
        if (view.terminal(sv)) {
            next.particles.push_back({state, 0.0});
            continue;
        }
        c.draw_exogenous(noise, rng);
        ft.run(sv, action, noise, nx, ob);
        const double ll = observation_loglik(view, ft.values, obs_vec);
        next.particles.push_back({view.vec_to_state(nx), w * std::exp(ll)});
    }
    double wsum = next.weight_sum();
    if (wsum <= 0.0) {
        // Depletion: reinitialize from the observation-consistent state set.
        if (!view.state_space) throw ParticleDepletion("belief depleted and no state space to recover from");
        BeliefState recovered;
        for (const auto& sv : view.state_space()) {
            std::copy(noise.begin(), noise.end(), ft.values.begin());
            for (std::size_t i = 0; i < view.state_slots().size(); ++i) {
                ft.values[view.state_slots()[i]] = sv[i];
                ft.values[view.next_slots()[i]] = sv[i];
            }
            std::vector<int> forced = view.state_slots();
            forced.insert(forced.end(), view.next_slots().begin(), view.next_slots().end());
            forced.push_back(view.action_slot());
            ft.values[view.action_slot()] = action;
            c.eval_endogenous(ft.values, forced);
            const double ll = observation_loglik(view, ft.values, obs_vec);
            if (std::isfinite(ll)) recovered.particles.push_back({view.vec_to_state(sv), std::exp(ll)});
        }
        if (recovered.particles.empty() || recovered.weight_sum() <= 0.0)
            throw ParticleDepletion("no observation-consistent state exists");
        recovered.normalize();
        stats.depletion_recovered = true;
        stats.ess_before_resample = recovered.ess();
        auto out = systematic_resample(recovered, belief.particles.size(), rng);
        stats.resampled = true;
        return {out, stats};
    }
    next.normalize();
    stats.ess_before_resample = next.ess();
    if (stats.ess_before_resample < double(next.particles.size()) / 2.0) {
        auto out = systematic_resample(next, next.particles.size(), rng);
        stats.resampled = true;
        return {out, stats};
    }
    return {next, stats};
}

std::pair<BeliefState, BeliefUpdateStats> reweight_by_observation(const BeliefState& belief,
                                                                  const scm::Assignment& observation,
                                                                  const PomdpView& view, Rng& rng) {
    if (belief.particles.empty()) throw EmptyBelief("reweight: empty belief");
    BeliefUpdateStats stats;
    const auto& c = view.compiled();
    std::vector<double> obs_vec;
    for (const auto& name : view.observation_vars()) obs_vec.push_back(observation.at(name));
    FastTransition ft(view);
    BeliefState next = belief;
    std::vector<double> noise(c.n_exo());
    for (auto& [state, w] : next.particles) {
        auto sv = view.state_to_vec(state);
        c.draw_exogenous(noise, rng);
        std::copy(noise.begin(), noise.end(), ft.values.begin());
        std::vector<int> forced = view.state_slots();
        forced.insert(forced.end(), view.next_slots().begin(), view.next_slots().end());
        forced.push_back(view.action_slot());
        for (std::size_t i = 0; i < view.state_slots().size(); ++i) {
            ft.values[view.state_slots()[i]] = sv[i];
            ft.values[view.next_slots()[i]] = sv[i];
        }
        ft.values[view.action_slot()] = view.action_domain()[0];
        c.eval_endogenous(ft.values, forced);
        w *= std::exp(observation_loglik(view, ft.values, obs_vec));
    }
    if (next.weight_sum() <= 0.0) {
        BeliefState uniform = belief;
        stats.depletion_recovered = true;
        return {uniform, stats};
    }
    next.normalize();
    stats.ess_before_resample = next.ess();
    return {next, stats};
}

}  // namespace causalmine::planner
