#include "causalmine/minesim/view.hpp"

#include <cmath>

namespace causalmine::minesim {

planner::PomdpView make_view(const scm::Scm& model, const MineMap& map, const EnvParams& params,
                             double discount) {
    planner::PomdpView view(model, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}, discount);
    const auto bfs = map.distance_to_landable();
    const double land_reward = params.r_success - 1.0;
    const int width = map.width;

    // State vector layout follows labels.state = {pos, wind, status}.
    view.is_terminal = [](std::span<const double> s) { return s[2] != 0.0; };

    view.upper_heuristic = [bfs, land_reward, discount](std::span<const double> s, int remaining) {
        const int d = bfs[static_cast<int>(s[0])];
        double best = 0.0, g = 1.0;  // no landing within the horizon: every step costs 1
        double cum = 0.0;
        for (int k = 0; k < remaining; ++k) {
            cum += g * -1.0;
            g *= discount;
        }
        best = cum;
        if (d >= 0) {
            // Minimal steps to land: moves may cover two cells under a
            // favorable drift, and the landing step itself can drift one.
            const int steps = 1 + std::max(0, (d - 1 + 1) / 2);
            if (steps <= remaining) {
                double u = 0.0;
                g = 1.0;
                for (int k = 0; k < steps - 1; ++k) {
                    u += g * -1.0;
                    g *= discount;
                }
                u += g * land_reward;
                best = std::max(best, u);
            }
        }
        return best;
    };

    view.rollout_policy = [bfs, width, map](std::span<const double> s, Rng& rng) -> int {
        (void)rng;
        const int pos = static_cast<int>(s[0]);
        const int x = pos % width, y = pos / width;
        if (map.landable(x, y)) return static_cast<int>(Action::Land);
        const int here = bfs[pos];
        if (here < 0) return static_cast<int>(Action::Hover);
        // First descending neighbor in N, S, E, W order.
        const int dx[] = {0, 0, 1, -1};
        const int dy[] = {-1, 1, 0, 0};
        for (int a = 0; a < 4; ++a) {
            const int nx = x + dx[a], ny = y + dy[a];
            if (!map.wall(nx, ny) && bfs[map.index(nx, ny)] >= 0 && bfs[map.index(nx, ny)] < here)
                return a;
        }
        return static_cast<int>(Action::Hover);
    };

    view.state_space = [map]() {
        std::vector<std::vector<double>> states;
        for (int i : map.free_cells())
            for (int w = 0; w < kNumWindModes; ++w)
                states.push_back({double(i), double(w), 0.0});
        return states;
    };

    view.reward_max = params.r_success - 1.0;
    return view;
}

planner::BeliefState initial_belief(const MineMap& map, const EnvParams& params, int n_particles,
                                    Rng& rng) {
    planner::BeliefState b;
    const auto free = map.free_cells();
    for (int k = 0; k < n_particles; ++k) {
        const int pos = free[rng() % free.size()];
        const int wind = draw_categorical(rng, {params.wind_prior.begin(), params.wind_prior.end()});
        scm::Assignment state{{EnvScmVars::pos, double(pos)},
                              {EnvScmVars::wind, double(wind)},
                              {EnvScmVars::status, 0.0}};
        b.particles.push_back({std::move(state), 1.0 / n_particles});
    }
    return b;
}

}  // namespace causalmine::minesim
