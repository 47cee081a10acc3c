#include "causalmine/minesim/env_scm.hpp"

#include <functional>

namespace causalmine::minesim {

using scm::EndogenousVar;
using scm::ExogenousVar;
using scm::NoiseDistribution;
using scm::Scm;
using X = scm::StructuralExpr;
using Row = X::TableRow;

namespace {

X P(int i) { return X::parent_ref(i); }
X C(double v) { return X::constant(v); }

// Absorption wrapper: once status > 0 (terminal) keep `frozen`, else `live`.
X absorb(int status_parent, X frozen, X live) {
    return X::gate(P(status_parent), 0.5, std::move(frozen), std::move(live));
}

// Select expression by dust level: nested gates over the midpoints between
// the (ascending) distinct levels.
X select_by_level(X dust_expr, const std::vector<double>& levels, const std::vector<X>& leaves) {
    X out = leaves[0];
    for (std::size_t l = 1; l < levels.size(); ++l) {
        const double mid = 0.5 * (levels[l - 1] + levels[l]);
        out = X::gate(dust_expr, mid, leaves[l], std::move(out));
    }
    return out;
}

}  // namespace

Scm env_scm(const MineMap& map, const DustField& dust, const EnvParams& params,
            const EnvScmOptions& options) {
    dust.validate(map);
    Scm m;
    const auto free = map.free_cells();
    const auto levels = dust.distinct_levels();
    const int n_cells = map.width * map.height;
    const DriftSpec drift = options.drift_spec_set ? options.drift : DriftSpec::base(params.drift_pw);

    // --- roots -------------------------------------------------------------
    {
        std::vector<double> pos_prior(n_cells, 0.0);
        for (int i : free) pos_prior[i] = 1.0 / free.size();
        m.exogenous.push_back({"u_pos", NoiseDistribution::categorical(pos_prior)});
        m.endogenous.push_back({EnvScmVars::pos, {}, X::noise_ref(), "u_pos"});

        m.exogenous.push_back(
            {"u_wind", NoiseDistribution::categorical({params.wind_prior.begin(), params.wind_prior.end()})});
        m.endogenous.push_back({EnvScmVars::wind, {}, X::noise_ref(), "u_wind"});

        m.exogenous.push_back({"u_status", NoiseDistribution::categorical({1.0, 0.0, 0.0})});
        m.endogenous.push_back({EnvScmVars::status, {}, X::noise_ref(), "u_status"});
    }

    // --- action ------------------------------------------------------------
    if (options.policy_variant) {
        // Pilot whim: categories 0..5 fight the gust (p=0.8 total), 6..11
        // pick a uniform action. Deterministic table over (wind, whim).
        std::vector<double> whim(12);
        for (int k = 0; k < 6; ++k) whim[k] = 0.8 / 6.0;
        for (int k = 6; k < 12; ++k) whim[k] = 0.2 / 6.0;
        m.exogenous.push_back({"u_whim", NoiseDistribution::categorical(whim)});
        std::vector<Row> rows;
        for (int w = 0; w < kNumWindModes; ++w) {
            const auto fight = against_gust(static_cast<WindMode>(w));
            for (int k = 0; k < 12; ++k) {
                const int uniform_pick = k % 6;
                const int a = (k < 6 && fight) ? static_cast<int>(*fight) : uniform_pick;
                rows.push_back({{double(w), double(k)}, double(a)});
            }
        }
        m.endogenous.push_back({EnvScmVars::action,
                                {EnvScmVars::wind, "u_whim"},
                                X::table(std::move(rows), 0.0),
                                ""});
    } else {
        m.exogenous.push_back(
            {"u_action", NoiseDistribution::categorical(std::vector<double>(kNumActions, 1.0 / kNumActions))});
        m.endogenous.push_back({EnvScmVars::action, {}, X::noise_ref(), "u_action"});
    }

    // --- wind indicator & dust --------------------------------------------
    {
        std::vector<Row> rows;
        for (int w = 1; w < kNumWindModes; ++w) rows.push_back({{double(w)}, 1.0});
        m.endogenous.push_back(
            {EnvScmVars::wind_active, {EnvScmVars::wind}, X::table(std::move(rows), 0.0), ""});
    }
    {
        std::vector<Row> rows;
        for (int i : free) rows.push_back({{double(i)}, dust.level[i]});
        m.endogenous.push_back({"dust_here", {EnvScmVars::pos}, X::table(std::move(rows), 0.0), ""});
    }

    // --- actuation success (per-dust-level Bernoulli draws) -----------------
    {
        std::vector<std::string> parents = {"dust_here"};
        std::vector<X> leaves;
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const double p_act = params.p0 * (1.0 - dust.kappa * levels[l]);
            const std::string name = "u_act_l" + std::to_string(l);
            m.exogenous.push_back({name, NoiseDistribution::categorical({1.0 - p_act, p_act})});
            parents.push_back(name);
            leaves.push_back(P(static_cast<int>(l) + 1));
        }
        m.endogenous.push_back(
            {"success", std::move(parents), select_by_level(P(0), levels, leaves), ""});
    }

    // --- drift block ---------------------------------------------------------
    {
        // f_wind = drift force while a gust is active; parent 0 is
        // wind_active, parents 1.. are the (adaptation-added) extra noises.
        std::vector<std::string> parents = {EnvScmVars::wind_active};
        for (const auto& e : drift.extra_exo) {
            m.exogenous.push_back(e);
            parents.push_back(e.name);
        }
        m.exogenous.push_back({"u_turb", NoiseDistribution::gaussian(0.0, 1.0)});
        m.endogenous.push_back({EnvScmVars::f_wind, std::move(parents), drift.force, "u_turb"});
        // drift_mag = gust active and force above threshold.
        m.endogenous.push_back({EnvScmVars::drift_mag,
                                {EnvScmVars::wind_active, EnvScmVars::f_wind},
                                X::gate(P(0), 0.5, X::gate(P(1), drift.threshold, C(1.0), C(0.0)), C(0.0)),
                                ""});
    }

    // --- movement ------------------------------------------------------------
    {
        std::vector<Row> move_rows, bump_rows;
        for (int i : free) {
            const int x = i % map.width, y = i / map.width;
            for (int a = 0; a < kNumActions; ++a) {
                const Action act = static_cast<Action>(a);
                const int dx = action_dx(act), dy = action_dy(act);
                if (dx == 0 && dy == 0) continue;
                if (map.wall(x + dx, y + dy))
                    bump_rows.push_back({{double(i), double(a)}, 1.0});
                else
                    move_rows.push_back({{double(i), double(a)}, double(dx + dy * map.width)});
            }
        }
        m.endogenous.push_back({"move_delta",
                                {EnvScmVars::pos, EnvScmVars::action},
                                X::table(std::move(move_rows), 0.0),
                                ""});
        m.endogenous.push_back({"blocked_bump",
                                {EnvScmVars::pos, EnvScmVars::action},
                                X::table(std::move(bump_rows), 0.0),
                                ""});
    }
    m.endogenous.push_back({"pos_mid",
                            {EnvScmVars::status, EnvScmVars::pos, "success", "move_delta"},
                            absorb(0, P(1), X::add(P(1), X::mul(P(2), P(3)))),
                            ""});
    {
        // Wind-forced wall contact at the post-move position.
        std::vector<Row> rows;
        for (int i : free) {
            const int x = i % map.width, y = i / map.width;
            for (int w = 1; w < kNumWindModes; ++w) {
                const WindMode mode = static_cast<WindMode>(w);
                if (map.wall(x + gust_dx(mode), y + gust_dy(mode)))
                    rows.push_back({{double(i), double(w)}, 1.0});
            }
        }
        m.endogenous.push_back(
            {"push_wall", {"pos_mid", EnvScmVars::wind}, X::table(std::move(rows), 0.0), ""});
    }
    {
        std::vector<Row> rows = {{{1.0}, 1.0}, {{2.0}, double(-map.width)}, {{3.0}, double(map.width)},
                                 {{4.0}, -1.0}};
        m.endogenous.push_back({"gust_delta", {EnvScmVars::wind}, X::table(std::move(rows), 0.0), ""});
    }
    m.endogenous.push_back({"crash_push",
                            {EnvScmVars::status, EnvScmVars::drift_mag, "push_wall"},
                            absorb(0, C(0.0), X::mul(P(1), P(2))),
                            ""});
    m.endogenous.push_back(
        {EnvScmVars::pos_next,
         {EnvScmVars::status, EnvScmVars::pos, "pos_mid", EnvScmVars::drift_mag, "gust_delta", "crash_push"},
         absorb(0, P(1),
                X::add(P(2), X::mul(P(3), X::mul(P(4), X::gate(P(5), 0.5, C(0.0), C(1.0)))))),
         ""});

    // --- landing & status ------------------------------------------------------
    m.endogenous.push_back(
        {"is_land", {EnvScmVars::action}, X::table({Row{{double(Action::Land)}, 1.0}}, 0.0), ""});
    {
        std::vector<Row> rows;
        for (int i : free) {
            const int x = i % map.width, y = i / map.width;
            if (map.landable(x, y)) rows.push_back({{double(i)}, 1.0});
        }
        m.endogenous.push_back(
            {"landable_next", {EnvScmVars::pos_next}, X::table(std::move(rows), 0.0), ""});
    }
    m.endogenous.push_back(
        {EnvScmVars::status_next,
         {EnvScmVars::status, "crash_push", "is_land", "landable_next"},
         absorb(0, P(0),
                X::gate(P(1), 0.5, C(double(Status::Crashed)),
                        X::gate(P(2), 0.5,
                                X::gate(P(3), 0.5, C(double(Status::Landed)), C(double(Status::Crashed))),
                                C(double(Status::Flying))))),
         ""});

    // --- reward -----------------------------------------------------------------
    m.endogenous.push_back({"bump",
                            {EnvScmVars::status, "success", "blocked_bump"},
                            absorb(0, C(0.0), X::mul(P(1), P(2))),
                            ""});
    m.endogenous.push_back({"landed_now",
                            {EnvScmVars::status, EnvScmVars::status_next},
                            absorb(0, C(0.0), X::gate(P(1), 0.5, X::gate(P(1), 1.5, C(0.0), C(1.0)), C(0.0))),
                            ""});
    m.endogenous.push_back({"crashed_now",
                            {EnvScmVars::status, EnvScmVars::status_next},
                            absorb(0, C(0.0), X::gate(P(1), 1.5, C(1.0), C(0.0))),
                            ""});
    m.endogenous.push_back(
        {EnvScmVars::reward,
         {EnvScmVars::status, "bump", "landed_now", "crashed_now"},
         absorb(0, C(0.0),
                X::add(C(-1.0),
                       X::add(X::mul(P(1), C(-1.0)),
                              X::add(X::mul(P(2), C(params.r_success)),
                                     X::mul(P(3), C(-params.r_crash)))))),
         ""});

    // --- wind evolution -----------------------------------------------------------
    {
        std::vector<double> sw(kNumWindModes + 1, params.switch_rho / kNumWindModes);
        sw[0] = 1.0 - params.switch_rho;
        m.exogenous.push_back({"u_switch", NoiseDistribution::categorical(sw)});
        m.endogenous.push_back({EnvScmVars::wind_next,
                                {EnvScmVars::wind},
                                X::gate(X::noise_ref(), 0.5, X::add(X::noise_ref(), C(-1.0)), P(0)),
                                "u_switch"});
    }

    // --- observation -----------------------------------------------------------
    {
        m.endogenous.push_back({"dust_next", {EnvScmVars::pos_next}, [&] {
                                    std::vector<Row> rows;
                                    for (int i : free) rows.push_back({{double(i)}, dust.level[i]});
                                    return X::table(std::move(rows), 0.0);
                                }(),
                                ""});
        const auto offd = beam_offset_dist(params.sigma_obs);
        const int diag = map.diagonal();
        constexpr int dirs_dx[4] = {0, 0, 1, -1};
        constexpr int dirs_dy[4] = {-1, 1, 0, 0};
        for (int dir = 0; dir < 4; ++dir) {
            const std::string beam = EnvScmVars::beams[dir];
            m.exogenous.push_back({"u_off_" + beam, NoiseDistribution::categorical(offd.probs)});
            std::vector<std::string> parents = {EnvScmVars::pos_next, "dust_next"};
            std::vector<X> drop_leaves;
            for (std::size_t l = 0; l < levels.size(); ++l) {
                const double p_drop = dust.lambda * levels[l];
                const std::string dn = "u_drop_" + beam + "_l" + std::to_string(l);
                m.exogenous.push_back({dn, NoiseDistribution::categorical({1.0 - p_drop, p_drop})});
                parents.push_back(dn);
                drop_leaves.push_back(P(2 + static_cast<int>(l)));
            }
            std::vector<Row> dist_rows;
            for (int i : free) {
                const int x = i % map.width, y = i / map.width;
                dist_rows.push_back({{double(i)}, double(map.wall_distance(x, y, dirs_dx[dir], dirs_dy[dir]))});
            }
            X raw = X::add(X::table(std::move(dist_rows), 0.0),
                           X::add(X::noise_ref(), C(double(-offd.half_width))));
            X hi = X::gate(raw, diag - 0.5, C(double(diag)), raw);
            X lo = X::gate(hi, -0.5, hi, C(0.0));
            X dropped = X::gate(select_by_level(P(1), levels, drop_leaves), 0.5, C(-1.0), std::move(lo));
            m.endogenous.push_back({beam, std::move(parents), std::move(dropped), "u_off_" + beam});
        }
    }

    m.labels.state = {EnvScmVars::pos, EnvScmVars::wind, EnvScmVars::status};
    m.labels.action = {EnvScmVars::action};
    m.labels.observation = {EnvScmVars::beams.begin(), EnvScmVars::beams.end()};
    m.labels.reward = {EnvScmVars::reward};
    m.labels.confounder = {EnvScmVars::wind};
    m.labels.next_of = {{EnvScmVars::pos, EnvScmVars::pos_next},
                        {EnvScmVars::wind, EnvScmVars::wind_next},
                        {EnvScmVars::status, EnvScmVars::status_next}};
    m.validate();
    return m;
}

Scm drift_model_scm(double p_w) {
    const auto spec = DriftSpec::base(p_w);
    Scm m;
    m.exogenous.push_back({"u_active", NoiseDistribution::categorical({0.5, 0.5})});
    m.endogenous.push_back({"wind_active", {}, X::noise_ref(), "u_active"});
    m.exogenous.push_back({"u_turb", NoiseDistribution::gaussian(0.0, 1.0)});
    m.endogenous.push_back({EnvScmVars::f_wind, {}, X::noise_ref(), "u_turb"});
    m.endogenous.push_back({"drift",
                            {"wind_active", EnvScmVars::f_wind},
                            X::gate(P(0), 0.5, X::gate(P(1), spec.threshold, C(1.0), C(0.0)), C(0.0)),
                            ""});
    m.validate();
    return m;
}

DriftSpec extract_drift_spec(const Scm& drift_model) {
    DriftSpec spec;
    const int fi = drift_model.endo_index(EnvScmVars::f_wind);
    const int di = drift_model.endo_index("drift");
    if (fi < 0 || di < 0) throw EnvError("drift model lacks f_wind/drift variables");
    const auto& f = drift_model.endogenous[fi];
    // f_wind parents: the adaptation edit appends [wind_active, W...]; the
    // grafted force keeps that order with wind_active at index 0.
    spec.force = f.mechanism;
    std::vector<int> remap(f.parents.size(), -1);
    int next = 1;
    for (std::size_t i = 0; i < f.parents.size(); ++i) {
        if (f.parents[i] == "wind_active") {
            remap[i] = 0;
            continue;
        }
        const int xi = drift_model.exo_index(f.parents[i]);
        if (xi < 0) throw EnvError("drift force references unexpected endogenous parent");
        spec.extra_exo.push_back(drift_model.exogenous[xi]);
        remap[i] = next++;
    }
    // Rewrite parent indices in the force expression.
    std::function<void(X&)> rewrite = [&](X& e) {
        if (e.op == X::Op::Parent) e.parent = remap[e.parent];
        for (auto& a : e.args) rewrite(a);
    };
    rewrite(spec.force);
    const auto& d = drift_model.endogenous[di].mechanism;
    // drift = Gate(active, 0.5, Gate(f_wind > c, 1, 0), 0)
    if (d.op != X::Op::Gate || d.args[1].op != X::Op::Gate) throw EnvError("unexpected drift mechanism");
    spec.threshold = d.args[1].threshold;
    return spec;
}

}  // namespace causalmine::minesim
