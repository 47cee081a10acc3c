#pragma once

#include <array>
#include <optional>
#include <vector>

#include "causalmine/minesim/map.hpp"
#include "causalmine/util/rng.hpp"

namespace causalmine::minesim {

struct EnvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidAction : EnvError {
    using EnvError::EnvError;
};
struct StateNotFlying : EnvError {
    using EnvError::EnvError;
};

enum class Action : int { North = 0, South = 1, East = 2, West = 3, Hover = 4, Land = 5 };
constexpr int kNumActions = 6;

// Wind regime. Calm or a gust along one compass direction; the regime
// re-draws uniformly over all five modes with probability rho per step.
enum class WindMode : int { Calm = 0, GustE = 1, GustN = 2, GustS = 3, GustW = 4 };
constexpr int kNumWindModes = 5;

enum class Status : int { Flying = 0, Landed = 1, Crashed = 2 };

// Per-cell dust plus its couplings: kappa scales actuation degradation,
// lambda scales sensor dropout.
struct DustField {
    std::vector<double> level;  // per cell, in [0,1]
    double kappa = 0.5;
    double lambda = 0.3;

    static DustField uniform(const MineMap& map, double d, double kappa = 0.5, double lambda = 0.3);
    // Distinct dust levels in ascending order (the SCM builder branches on
    // these; keep maps to a handful of levels).
    std::vector<double> distinct_levels() const;
    void validate(const MineMap& map) const;
};

struct EnvParams {
    double p0 = 0.95;         // actuation success at zero dust
    double sigma_obs = 0.5;   // beam noise scale, in cells
    double switch_rho = 0.05; // wind regime re-draw probability
    double drift_pw = 0.3;    // drift probability while a gust is active
    double r_success = 100.0;
    double r_crash = 100.0;
    std::array<double, kNumWindModes> wind_prior = {1.0, 0.0, 0.0, 0.0, 0.0};
};

struct EnvState {
    int x = 0;
    int y = 0;
    Status status = Status::Flying;
    WindMode wind = WindMode::Calm;
    bool link_lost = false;
    int step = 0;
};

// Four beam ranges (N, S, E, W); -1 encodes sensor dropout.
struct ObsRecord {
    std::array<int, 4> ranges = {-1, -1, -1, -1};
    bool landed_flag = false;
};

struct StepOut {
    EnvState state;
    ObsRecord obs;
    double reward = 0.0;
    bool done = false;
    bool bumped = false;
    bool drifted = false;
};

// Discretized Gaussian beam-noise offsets: values -half_width..half_width
// with probabilities from unit-cell CDF differences, truncated and
// renormalized. Shared by the simulator and the SCM builder so both draw
// from the identical distribution.
struct OffsetDist {
    int half_width = 0;
    std::vector<double> probs;  // index k -> offset k - half_width
};
OffsetDist beam_offset_dist(double sigma);

int action_dx(Action a);
int action_dy(Action a);
int gust_dx(WindMode m);
int gust_dy(WindMode m);
// The move action a remote pilot uses to fight a gust (None for Calm).
std::optional<Action> against_gust(WindMode m);

// One environment transition; the rule order is: actuation, wind drift,
// collision resolution, landing, regime re-draw, observation, reward.
// Intended moves into walls bump (extra -1); wind-forced wall contact
// crashes. Throws StateNotFlying / InvalidAction.
StepOut step(const EnvState& state, const MineMap& map, const DustField& dust,
             const EnvParams& params, Action action, Rng& rng);

// Observation only (used for the initial sense before any action).
ObsRecord make_observation(const EnvState& state, const MineMap& map, const DustField& dust,
                           const EnvParams& params, Rng& rng);

// Logged pilot transition; the wind regime is deliberately absent (it
// confounds action and next position).
struct SasRecord {
    int pos = 0;
    int status = 0;
    int action = 0;
    int pos_next = 0;
    int status_next = 0;
};

// Scripted remote pilot: sees the wind and, while a gust is active, moves
// against it with probability 0.8 (uniform over all actions otherwise).
Action pilot_action(WindMode wind, Rng& rng);

// Simulates pilot episodes and logs (s, a, s') without the wind variable.
std::vector<SasRecord> gen_observational_log(const MineMap& map, const DustField& dust,
                                             const EnvParams& params, int episodes,
                                             int max_episode_steps, Rng& rng);

}  // namespace causalmine::minesim
