#pragma once

#include <optional>

#include <json.hpp>

#include "causalmine/adapt/adapt.hpp"
#include "causalmine/explain/explain.hpp"
#include "causalmine/minesim/env_scm.hpp"
#include "causalmine/minesim/view.hpp"

namespace causalmine::minesim {

struct AdaptSettings {
    bool enabled = false;
    std::size_t capacity = 6;
    double epsilon = 0.01;
    int period = 3;  // adapt after every `period` steps
    std::size_t n_samples = 200;
    std::size_t max_new = 8;
    std::vector<double> gust_mean_grid = {1.2, 2.4, 3.6};
    std::vector<double> gust_var_grid = {0.25};
};

// Mid-mission regime change in the true environment: at `at_step` the wind
// becomes `mode` and gusts strengthen to `drift_pw`.
struct OnsetSpec {
    int at_step = 0;
    WindMode mode = WindMode::GustE;
    double drift_pw = 0.75;
};

struct MissionConfig {
    planner::PlanConfig plan;
    double discount = 0.98;
    AdaptSettings adapt;
    // The drone's assumed dynamics; defaults to the true parameters. A stale
    // model plus an onset is the adaptation test case.
    std::optional<EnvParams> model_params;
    int max_steps = 60;
    int belief_particles = 120;
    std::uint64_t seed = 1;
    std::optional<OnsetSpec> onset;
    bool log_belief = false;
};

enum class MissionOutcome { Success, Crash, Timeout };

struct StepLog {
    int t = 0;
    EnvState state_before;
    int action = 0;
    ObsRecord obs;
    double reward = 0.0;
    int belief_map_pos = -1;
    int belief_map_wind = 0;
    planner::PlanStats plan_stats;
    bool adapted = false;          // an adaptation step ran after this step
    double map_hypothesis_weight = 1.0;
    std::string map_edit = "";     // provenance id of the MAP hypothesis, if any
};

struct MissionResult {
    MissionOutcome outcome = MissionOutcome::Timeout;
    int steps = 0;
    double total_reward = 0.0;
    explain::Trace trace;  // ground-truth trace for explanation
    std::vector<StepLog> log;
    std::vector<nlohmann::json> belief_snapshots;  // per adapt step when log_belief
    std::string error;  // component failure recorded; outcome becomes Crash
};

scm::Assignment obs_to_assignment(const ObsRecord& obs);

MissionResult run_mission(const MineMap& map, const DustField& dust, const EnvParams& true_params,
                          const MissionConfig& config);

// Candidate set for post-hoc explanation: wind mode and action at every step.
std::vector<explain::CauseCandidate> default_candidates(const explain::Trace& trace);

}  // namespace causalmine::minesim
