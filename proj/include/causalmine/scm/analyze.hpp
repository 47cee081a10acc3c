#pragma once

#include <map>
#include <span>
#include <vector>

#include "causalmine/scm/engine.hpp"
#include "causalmine/util/rng.hpp"

namespace causalmine::scm {

// Affine form over noise-source slots: a + sum(coeff_i * value[slot_i]).
// Only Gaussian sources with positive variance appear as terms; everything
// else is folded into the constant or enumerated.
struct AffineForm {
    double a = 0.0;
    std::vector<std::pair<int, double>> terms;  // slot -> coefficient, sorted by slot

    bool is_const() const { return terms.empty(); }
    void add_term(int slot, double coeff);
    AffineForm& operator+=(const AffineForm& o);
    void scale(double s);
    bool operator==(const AffineForm&) const = default;
};

// Sign constraint on an affine-Gaussian form: form > threshold (greater) or
// form <= threshold.
struct Halfspace {
    AffineForm form;
    double threshold = 0.0;
    bool greater = true;
};

// One mixture component of a variable's conditional distribution given
// determined inputs: a point mass or a Gaussian, reached with probability
// `prob`, under the recorded categorical assignments and halfspace
// constraints on its noise sources.
struct CondComponent {
    double prob = 0.0;
    bool atom = true;
    double value = 0.0;     // atom value, or Gaussian mean
    double variance = 0.0;  // 0 for atoms
    AffineForm form;        // value as a function of Gaussian sources
    std::map<int, int> cats;
    std::vector<Halfspace> halfspaces;
};

// Conditional distribution of one endogenous variable given its determined
// context, marginalizing the listed noise-source slots (its own noise, its
// undetermined exogenous parents, and the noises of inlined single-consumer
// latent parents). `exact` is false when the mechanism falls outside the
// closed-form family (then callers use the sampling fallback).
struct VarConditional {
    bool exact = false;
    std::vector<CondComponent> comps;
    std::vector<int> sources;

    // log P(var = v | context); point masses dominate densities.
    double log_prob_at(double v, double atom_tol = 1e-9) const;
    // Whether conditioning on v pins every reached source to a single value.
    bool point_posterior_at(double v, double atom_tol = 1e-9) const;
    // Sample source slots from their posterior given var = v, writing into
    // `values`; returns the log marginal factor log P(var = v | context).
    // Slots not reached by the selected component keep their current values.
    double posterior_draw(double v, const Scm& scm, Rng& rng, std::span<double> values,
                          double atom_tol = 1e-9) const;
};

struct AnalyzeLimits {
    int max_components = 4096;
    int max_inline_depth = 16;
};

// Analyze endogenous variable `endo_index` against a value buffer.
// `known[slot]` marks determined slots; unknown slots must be noise sources
// (own noise, exogenous parents) or single-consumer latent endogenous parents
// (inlined recursively). `force_unknown` lets callers re-marginalize slots
// whose buffer values are stale samples.
VarConditional analyze_conditional(const CompiledScm& scm, int endo_index,
                                   std::span<const double> values, std::span<const char> known,
                                   std::span<const int> force_unknown = {},
                                   const AnalyzeLimits& limits = {});

}  // namespace causalmine::scm
