#pragma once

#include <map>
#include <optional>
#include <vector>

#include "causalmine/scm/analyze.hpp"
#include "causalmine/scm/engine.hpp"
#include "causalmine/util/rng.hpp"

namespace causalmine::scm {

struct InferConfig {
    double kernel_bandwidth = 0.1;  // Gaussian kernel for non-closed-form continuous evidence
    double atom_tol = 1e-9;
    AnalyzeLimits limits;
};

struct LogLikResult {
    double log_prob = 0.0;
    bool exact = false;       // closed-form path taken (no sampling)
    double se_log = 0.0;      // approximate standard error of log estimate (0 when exact)
    std::size_t n_used = 0;
};

// log P(evidence) over endogenous evidence. Exact when every evidence
// variable's conditional given determined inputs is in the closed-form family
// and its endogenous inputs are determined; otherwise a likelihood-weighting
// estimate over n_samples draws of the latent exogenous variables. Returns
// -inf (never throws) when the evidence has zero density/mass under the
// model.
LogLikResult log_likelihood_stats(const CompiledScm& scm, const Assignment& evidence,
                                  std::size_t n_samples, Rng& rng, const InferConfig& cfg = {});
double log_likelihood(const CompiledScm& scm, const Assignment& evidence, std::size_t n_samples,
                      Rng& rng, const InferConfig& cfg = {});

struct Particle {
    Assignment noise;  // full exogenous assignment
    double weight = 0.0;
};

struct ParticleSet {
    std::vector<Particle> particles;
    bool exact = false;
};

// Posterior over exogenous assignments given endogenous evidence. Single
// unit-weight particle when the evidence pins every noise; otherwise a
// self-normalized importance sample. Throws DegenerateEvidence when the
// evidence is impossible under the model.
ParticleSet abduct(const CompiledScm& scm, const Assignment& evidence, std::size_t n_particles,
                   Rng& rng, const InferConfig& cfg = {});

struct CounterfactualSummary {
    double mean = 0.0;
    double variance = 0.0;
    // Present when the posterior predictive concentrates on few distinct
    // values (discrete queries); value -> probability, sums to 1.
    std::optional<std::map<double, double>> table;
    bool exact = false;
};

// Twin-world counterfactual: abduct P(U | evidence), apply the intervention
// in a duplicate model, propagate each particle, aggregate the query.
CounterfactualSummary counterfactual(const CompiledScm& scm, const Assignment& evidence,
                                     const Intervention& intervention, const std::string& query,
                                     std::size_t n_particles, Rng& rng, const InferConfig& cfg = {});

}  // namespace causalmine::scm
