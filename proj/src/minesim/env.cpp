#include "causalmine/minesim/env.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "causalmine/util/math.hpp"

namespace causalmine::minesim {

DustField DustField::uniform(const MineMap& map, double d, double kappa, double lambda) {
    DustField f;
    f.level.assign(map.width * map.height, d);
    f.kappa = kappa;
    f.lambda = lambda;
    return f;
}

std::vector<double> DustField::distinct_levels() const {
    std::set<double> s(level.begin(), level.end());
    return {s.begin(), s.end()};
}

void DustField::validate(const MineMap& map) const {
    if (static_cast<int>(level.size()) != map.width * map.height)
        throw EnvError("dust field size does not match map");
    for (double d : level)
        if (d < 0.0 || d > 1.0) throw EnvError("dust level out of [0,1]");
    if (kappa < 0.0 || kappa > 1.0 || lambda < 0.0 || lambda > 1.0)
        throw EnvError("dust coefficients out of [0,1]");
    if (distinct_levels().size() > 8) throw EnvError("too many distinct dust levels (max 8)");
}

OffsetDist beam_offset_dist(double sigma) {
    OffsetDist d;
    if (sigma <= 0.0) {
        d.half_width = 0;
        d.probs = {1.0};
        return d;
    }
    d.half_width = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    double sum = 0.0;
    for (int k = -d.half_width; k <= d.half_width; ++k) {
        const double p = normal_cdf((k + 0.5) / sigma) - normal_cdf((k - 0.5) / sigma);
        d.probs.push_back(p);
        sum += p;
    }
    for (double& p : d.probs) p /= sum;
    return d;
}

int action_dx(Action a) {
    switch (a) {
        case Action::East: return 1;
        case Action::West: return -1;
        default: return 0;
    }
}
int action_dy(Action a) {
    switch (a) {
        case Action::North: return -1;
        case Action::South: return 1;
        default: return 0;
    }
}
int gust_dx(WindMode m) {
    switch (m) {
        case WindMode::GustE: return 1;
        case WindMode::GustW: return -1;
        default: return 0;
    }
}
int gust_dy(WindMode m) {
    switch (m) {
        case WindMode::GustN: return -1;
        case WindMode::GustS: return 1;
        default: return 0;
    }
}

std::optional<Action> against_gust(WindMode m) {
    switch (m) {
        case WindMode::GustE: return Action::West;
        case WindMode::GustW: return Action::East;
        case WindMode::GustN: return Action::South;
        case WindMode::GustS: return Action::North;
        case WindMode::Calm: return std::nullopt;
    }
    return std::nullopt;
}

namespace {

constexpr int kBeamDx[4] = {0, 0, 1, -1};  // N, S, E, W
constexpr int kBeamDy[4] = {-1, 1, 0, 0};

int beam_reading(const MineMap& map, const DustField& dust, const EnvParams& params, int x, int y,
                 int dir, Rng& rng) {
    const double p_drop = dust.lambda * dust.level[map.index(x, y)];
    if (draw_uniform(rng) < p_drop) return -1;
    const auto offd = beam_offset_dist(params.sigma_obs);
    const int off = draw_categorical(rng, offd.probs) - offd.half_width;
    const int dist = map.wall_distance(x, y, kBeamDx[dir], kBeamDy[dir]);
    return std::clamp(dist + off, 0, map.diagonal());
}

}  // namespace

ObsRecord make_observation(const EnvState& state, const MineMap& map, const DustField& dust,
                           const EnvParams& params, Rng& rng) {
    ObsRecord obs;
    for (int dir = 0; dir < 4; ++dir)
        obs.ranges[dir] = beam_reading(map, dust, params, state.x, state.y, dir, rng);
    obs.landed_flag = state.status == Status::Landed;
    return obs;
}

StepOut step(const EnvState& state, const MineMap& map, const DustField& dust,
             const EnvParams& params, Action action, Rng& rng) {
    if (state.status != Status::Flying) throw StateNotFlying("step: drone is not flying");
    const int ai = static_cast<int>(action);
    if (ai < 0 || ai >= kNumActions) throw InvalidAction("step: bad action id");

    StepOut out;
    out.state = state;
    out.state.step = state.step + 1;
    double reward = -1.0;

    // (1) actuation: the intended move succeeds with p0 * (1 - kappa * dust);
    // on failure the drone holds position.
    const bool is_move = action_dx(action) != 0 || action_dy(action) != 0;
    const double p_act = params.p0 * (1.0 - dust.kappa * dust.level[map.index(state.x, state.y)]);
    const bool success = draw_uniform(rng) < p_act;
    int x = state.x, y = state.y;
    if (is_move && success) {
        const int tx = x + action_dx(action), ty = y + action_dy(action);
        if (map.wall(tx, ty)) {
            out.bumped = true;  // intended wall contact: bump, stay put
            reward -= 1.0;
        } else {
            x = tx;
            y = ty;
        }
    }

    // (2)+(3) wind drift; a wind-forced push into a wall crashes.
    if (state.wind != WindMode::Calm && draw_uniform(rng) < params.drift_pw) {
        out.drifted = true;
        const int px = x + gust_dx(state.wind), py = y + gust_dy(state.wind);
        if (map.wall(px, py)) {
            out.state.x = x;
            out.state.y = y;
            out.state.status = Status::Crashed;
            reward -= params.r_crash;
        } else {
            x = px;
            y = py;
        }
    }
    out.state.x = x;
    out.state.y = y;

    // (4) landing resolves at the post-drift position.
    if (out.state.status == Status::Flying && action == Action::Land) {
        if (map.landable(x, y)) {
            out.state.status = Status::Landed;
            reward += params.r_success;
        } else {
            out.state.status = Status::Crashed;
            reward -= params.r_crash;
        }
    }

    // (5) regime re-draw (applies from the next step).
    if (draw_uniform(rng) < params.switch_rho)
        out.state.wind = static_cast<WindMode>(draw_categorical(
            rng, std::vector<double>(kNumWindModes, 1.0 / kNumWindModes)));

    // (6) observation from the final position.
    out.obs = make_observation(out.state, map, dust, params, rng);

    // (7) step cost already applied; terminal rewards folded in above.
    out.reward = reward;
    out.done = out.state.status != Status::Flying;
    return out;
}

Action pilot_action(WindMode wind, Rng& rng) {
    const auto fight = against_gust(wind);
    if (fight && draw_uniform(rng) < 0.8) return *fight;
    return static_cast<Action>(draw_categorical(rng, std::vector<double>(kNumActions, 1.0 / kNumActions)));
}

std::vector<SasRecord> gen_observational_log(const MineMap& map, const DustField& dust,
                                             const EnvParams& params, int episodes,
                                             int max_episode_steps, Rng& rng) {
    std::vector<SasRecord> log;
    const auto free = map.free_cells();
    for (int ep = 0; ep < episodes; ++ep) {
        EnvState s;
        const int start = free[rng() % free.size()];
        s.x = start % map.width;
        s.y = start / map.width;
        s.wind = static_cast<WindMode>(
            draw_categorical(rng, {params.wind_prior.begin(), params.wind_prior.end()}));
        for (int t = 0; t < max_episode_steps && s.status == Status::Flying; ++t) {
            const Action a = pilot_action(s.wind, rng);
            auto res = step(s, map, dust, params, a, rng);
            log.push_back({map.index(s.x, s.y), static_cast<int>(s.status), static_cast<int>(a),
                           map.index(res.state.x, res.state.y), static_cast<int>(res.state.status)});
            s = res.state;
        }
    }
    return log;
}

}  // namespace causalmine::minesim
