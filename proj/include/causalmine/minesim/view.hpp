#pragma once

#include "causalmine/minesim/env_scm.hpp"
#include "causalmine/planner/planner.hpp"

namespace causalmine::minesim {

// Wraps an environment SCM as a PomdpView with the mine-specific hooks:
// shortest-path admissible upper bound (drift can shorten travel, so the
// best case covers two cells per move), greedy return-to-home rollout, the
// terminal predicate, and the state-space enumerator for belief recovery.
planner::PomdpView make_view(const scm::Scm& model, const MineMap& map, const EnvParams& params,
                             double discount);

// Uniform belief over all free cells (wind from the prior, flying).
planner::BeliefState initial_belief(const MineMap& map, const EnvParams& params, int n_particles,
                                    Rng& rng);

}  // namespace causalmine::minesim
