#pragma once

#include <optional>
#include <string>
#include <vector>

#include "causalmine/scm/infer.hpp"

namespace causalmine::explain {

struct ExplainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LabelMismatch : ExplainError {
    using ExplainError::ExplainError;
};

// Time-indexed variable name in an unrolled model: "pos@3". Step indices run
// 0..T-1 for per-step variables; state variables also exist at T.
std::string at_time(const std::string& var, int t);

// Chains a one-step SCM over T steps: step t's next-state variables become
// step t+1's state variables; every step draws fresh exogenous noises (the
// full per-step noise set is instantiated each step, so the exogenous count
// is exactly T times the one-step count). Requires state/next labels.
scm::Scm unroll(const scm::Scm& one_step, int horizon);

struct TraceStep {
    scm::Assignment state;  // ground-truth state variables, when available
    double action = 0.0;
    scm::Assignment observation;
    double reward = 0.0;
};

struct Trace {
    std::vector<TraceStep> steps;
    scm::Assignment final_state;  // state at the horizon
    int horizon() const { return static_cast<int>(steps.size()); }
};

// Evidence over the unrolled model: states, actions, and observations from
// every step, plus the final state. Rewards are deterministic given these
// and are omitted.
scm::Assignment trace_evidence(const Trace& trace, const scm::Scm& one_step);

struct OutcomePredicate {
    enum class Cmp { Eq, Ne, Gt, Lt, Ge, Le };
    std::string var;  // unrolled name, e.g. "status@14"
    Cmp cmp = Cmp::Eq;
    double value = 0.0;

    bool eval(double v) const;
    std::string text() const;
};

struct CauseCandidate {
    std::string var;  // base variable name
    int t = -1;       // time index; -1 addresses `var` as-is (plain models)
    double factual = 0.0;
    std::vector<double> alternatives;

    std::string unrolled_name() const { return t < 0 ? var : at_time(var, t); }
};

struct PnPs {
    double value = 0.0;
    double se = 0.0;
};

struct CauseScore {
    CauseCandidate candidate;
    double best_alternative = 0.0;
    double pn = 0.0;
    double ps = 0.0;
    double score = 0.0;  // pn * ps at the best alternative
    double pn_se = 0.0;
    double ps_se = 0.0;
    double counterfactual_outcome_prob = 0.0;  // P(outcome | do(best alternative))
};

struct Explanation {
    std::vector<CauseScore> ranked;
    std::vector<std::string> summary;
};

// Probability of necessity: P(outcome false in the twin world under
// do(candidate = alternative) | trace). Candidates with no directed path to
// the outcome variable score exactly 0.
PnPs pn(const scm::CompiledScm& scm_T, const scm::Assignment& evidence,
        const CauseCandidate& candidate, double alternative, const OutcomePredicate& outcome,
        std::size_t n_particles, Rng& rng, const scm::InferConfig& cfg = {});

// Probability of sufficiency: P(outcome true in the twin world under
// do(candidate = factual) | trace), the role-swapped dual of pn.
PnPs ps(const scm::CompiledScm& scm_T, const scm::Assignment& evidence,
        const CauseCandidate& candidate, const OutcomePredicate& outcome, std::size_t n_particles,
        Rng& rng, const scm::InferConfig& cfg = {});

// Scores every candidate over its alternative set (best-scoring alternative
// wins), sorts by PN*PS descending with PN then declaration-order
// tie-breaks. The abducted posterior is shared across candidates.
Explanation rank_causes(const scm::CompiledScm& scm_T, const scm::Assignment& evidence,
                        const OutcomePredicate& outcome, const std::vector<CauseCandidate>& candidates,
                        std::size_t n_particles, Rng& rng, const scm::InferConfig& cfg = {});

}  // namespace causalmine::explain
