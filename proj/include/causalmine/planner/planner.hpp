#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "causalmine/scm/analyze.hpp"
#include "causalmine/scm/engine.hpp"
#include "causalmine/util/rng.hpp"

namespace causalmine::planner {

struct PlannerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyBelief : PlannerError {
    using PlannerError::PlannerError;
};
struct UnknownAction : PlannerError {
    using PlannerError::PlannerError;
};
struct ParticleDepletion : PlannerError {
    using PlannerError::PlannerError;
};

// SCM viewed as a POMDP: label-selected state/action/observation/reward
// variables, the next-state wiring, and the action domain. Candidate actions
// are always applied with do-semantics, severing the action mechanism (and
// with it any confounder -> action edge).
class PomdpView {
  public:
    PomdpView(scm::Scm model, std::vector<double> action_domain, double discount);

    const scm::CompiledScm& compiled() const { return compiled_; }
    const std::vector<std::string>& state_vars() const { return state_vars_; }
    const std::vector<std::string>& observation_vars() const { return observation_vars_; }
    const std::string& action_var() const { return action_var_; }
    const std::string& reward_var() const { return reward_var_; }
    const std::vector<std::string>& confounder_vars() const { return confounder_vars_; }
    const std::vector<double>& action_domain() const { return action_domain_; }
    double discount() const { return discount_; }

    std::vector<double> state_to_vec(const scm::Assignment& a) const;
    scm::Assignment vec_to_state(std::span<const double> v) const;
    scm::Assignment vec_to_obs(std::span<const double> v) const;

    // Domain hooks (all optional). The heuristic must upper-bound the
    // achievable discounted return within the remaining depth.
    std::function<double(std::span<const double>, int)> upper_heuristic;
    std::function<int(std::span<const double>, Rng&)> rollout_policy;  // returns action index
    std::function<bool(std::span<const double>)> is_terminal;
    std::function<std::vector<std::vector<double>>()> state_space;  // for depletion recovery
    double reward_max = 0.0;  // fallback admissible per-step bound

    // slots
    const std::vector<int>& state_slots() const { return state_slots_; }
    const std::vector<int>& next_slots() const { return next_slots_; }
    const std::vector<int>& obs_slots() const { return obs_slots_; }
    const std::vector<int>& obs_endo() const { return obs_endo_; }
    int action_slot() const { return action_slot_; }
    int reward_slot() const { return reward_slot_; }

    bool terminal(std::span<const double> state) const { return is_terminal && is_terminal(state); }
    double heuristic(std::span<const double> state, int remaining) const;
    int default_action_index(std::span<const double> state, Rng& rng) const;

  private:
    scm::CompiledScm compiled_;
    std::vector<std::string> state_vars_, observation_vars_, confounder_vars_;
    std::string action_var_, reward_var_;
    std::vector<double> action_domain_;
    double discount_;
    std::vector<int> state_slots_, next_slots_, obs_slots_, obs_endo_;
    int action_slot_ = -1, reward_slot_ = -1;
};

struct BeliefState {
    std::vector<std::pair<scm::Assignment, double>> particles;

    void normalize();
    double weight_sum() const;
    double ess() const;
    static BeliefState point_mass(const scm::Assignment& state);
};

struct TransitionOut {
    scm::Assignment next_state;
    scm::Assignment observation;
    double reward = 0.0;
    bool terminal = false;
};

// Evaluate the SCM under do(action) with the given exogenous noises; the
// confounders' influence on action selection is severed by construction.
TransitionOut causal_transition(const PomdpView& view, const scm::Assignment& state, double action,
                                const scm::Assignment& scenario_noise);

enum class BudgetMode { Expansions, WallClock };
enum class RolloutKind { Random, GreedyHome };

struct PlanConfig {
    int n_scenarios = 32;   // K
    int max_depth = 10;     // D
    BudgetMode budget_mode = BudgetMode::Expansions;
    long expansion_budget = 2000;
    double time_budget_ms = 1000.0;
    double exploration_constant = 10.0;
    RolloutKind rollout = RolloutKind::GreedyHome;
    std::uint64_t seed = 1;

    void validate() const;
};

struct PlanStats {
    long expansions = 0;
    int depth_reached = 0;
    double lower = 0.0;
    double upper = 0.0;
    double elapsed_ms = 0.0;
    bool fallback = false;
};

struct PlanResult {
    double action = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    PlanStats stats;
};

// Anytime determinized sparse tree search over K scenarios; returns the root
// action maximizing the lower bound within the budget. Deterministic given
// the seed in expansion-count mode.
PlanResult plan(const BeliefState& belief, const PomdpView& view, const PlanConfig& config);

struct BeliefUpdateStats {
    double ess_before_resample = 0.0;
    bool resampled = false;
    bool depletion_recovered = false;
};

// Bootstrap particle filter step: propagate with fresh noise, reweight by the
// exact observation conditionals, systematic-resample when ESS < K/2. On
// total depletion, reinitializes from observation-consistent states (throws
// ParticleDepletion only if none exists).
std::pair<BeliefState, BeliefUpdateStats> update_belief(const BeliefState& belief, double action,
                                                        const scm::Assignment& observation,
                                                        const PomdpView& view, Rng& rng);

// Reweight an existing belief by an observation of the *current* state (used
// for the initial sense, before any action).
std::pair<BeliefState, BeliefUpdateStats> reweight_by_observation(const BeliefState& belief,
                                                                  const scm::Assignment& observation,
                                                                  const PomdpView& view, Rng& rng);

}  // namespace causalmine::planner
