#pragma once

#include "causalmine/minesim/env.hpp"
#include "causalmine/scm/types.hpp"
#include "causalmine/util/math.hpp"

namespace causalmine::minesim {

// Drift block of the environment SCM: while a gust is active, the drone is
// displaced one cell downwind when (force > threshold), where force is an
// expression over [wind_active, extra exogenous...] plus a unit-Gaussian
// turbulence noise. The online adaptation loop edits exactly this block
// (adding gated exogenous force terms), so it is pluggable.
struct DriftSpec {
    double threshold = 0.0;
    scm::StructuralExpr force = scm::StructuralExpr::noise_ref();
    std::vector<scm::ExogenousVar> extra_exo;

    // Base spec with P(drift | gust) = p_w: force = turbulence only.
    static DriftSpec base(double p_w) {
        DriftSpec d;
        d.threshold = p_w <= 0.0   ? std::numeric_limits<double>::infinity()
                      : p_w >= 1.0 ? -std::numeric_limits<double>::infinity()
                                   : normal_quantile(1.0 - p_w);
        return d;
    }
    // Effective drift probability of a force N(mean, variance) gated in on
    // top of the base turbulence.
    static double gated_drift_prob(double threshold, double mean, double variance) {
        return 1.0 - normal_cdf((threshold - mean) / std::sqrt(1.0 + variance));
    }
};

struct EnvScmOptions {
    // Include the pilot policy as the action mechanism (wind -> action edge,
    // the confounding path severed by do(action)). Without it the action is
    // a uniform root.
    bool policy_variant = false;
    DriftSpec drift;  // defaults overwritten from EnvParams when unset
    bool drift_spec_set = false;
};

// Well-known variable names of the environment SCM.
struct EnvScmVars {
    static constexpr const char* pos = "pos";
    static constexpr const char* wind = "wind";
    static constexpr const char* status = "status";
    static constexpr const char* action = "action";
    static constexpr const char* wind_active = "wind_active";
    static constexpr const char* f_wind = "f_wind";
    static constexpr const char* drift_mag = "drift_mag";
    static constexpr const char* pos_next = "pos_next";
    static constexpr const char* wind_next = "wind_next";
    static constexpr const char* status_next = "status_next";
    static constexpr const char* reward = "reward";
    static constexpr std::array<const char*, 4> beams = {"beam_n", "beam_s", "beam_e", "beam_w"};
};

// One-step SCM over {pos, wind, status, action, ..., pos', wind', status',
// beams, reward} whose kernel under do(action) equals step()'s kernel.
scm::Scm env_scm(const MineMap& map, const DustField& dust, const EnvParams& params,
                 const EnvScmOptions& options = {});

// The small drift-model SCM the mission adaptation loop maintains beliefs
// over: variables {wind_active, f_wind, drift}. Records are pairs of
// (wind_active, drift) indicators.
scm::Scm drift_model_scm(double p_w);

// Reads an (edited) drift-model hypothesis back into a DriftSpec for
// grafting into the full environment SCM.
DriftSpec extract_drift_spec(const scm::Scm& drift_model);

}  // namespace causalmine::minesim
