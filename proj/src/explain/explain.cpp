#include "causalmine/explain/explain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "causalmine/util/math.hpp"

namespace causalmine::explain {

using scm::Scm;
using X = scm::StructuralExpr;

std::string at_time(const std::string& var, int t) { return var + "@" + std::to_string(t); }

scm::Scm unroll(const Scm& one_step, int horizon) {
    if (horizon < 1) throw ExplainError("unroll: horizon must be >= 1");
    if (one_step.labels.next_of.empty()) throw LabelMismatch("unroll: model has no next-state wiring");
    for (const auto& s : one_step.labels.state)
        if (!one_step.labels.next_of.count(s))
            throw LabelMismatch("unroll: state variable without next wiring: " + s);
    std::map<std::string, std::string> state_of_next;  // next var -> state var
    for (const auto& [s, nx] : one_step.labels.next_of) {
        if (one_step.endo_index(s) < 0 || one_step.endo_index(nx) < 0)
            throw LabelMismatch("unroll: next wiring references unknown variable");
        state_of_next[nx] = s;
    }

    Scm out;
    for (int t = 0; t < horizon; ++t) {
        // Fresh copy of every exogenous variable for this step.
        for (const auto& e : one_step.exogenous) out.exogenous.push_back({at_time(e.name, t), e.dist});
        for (const auto& v : one_step.endogenous) {
            const bool is_state = one_step.labels.next_of.count(v.name) > 0;
            const auto next_it = state_of_next.find(v.name);
            const bool is_next = next_it != state_of_next.end();
            if (is_state && t > 0) continue;  // state@t (t>0) is written by step t-1
            scm::EndogenousVar nv;
            nv.name = is_next ? at_time(next_it->second, t + 1) : at_time(v.name, t);
            nv.noise = at_time(v.noise, t);
            for (const auto& p : v.parents) {
                // References to next-state variables point at the renamed
                // state copy of the following step.
                auto pn = state_of_next.find(p);
                nv.parents.push_back(pn != state_of_next.end() ? at_time(pn->second, t + 1)
                                                               : at_time(p, t));
            }
            nv.mechanism = v.mechanism;
            out.endogenous.push_back(std::move(nv));
        }
    }
    // Labels: per-step tags so downstream tooling can find roles.
    for (const auto& s : one_step.labels.state)
        for (int t = 0; t <= horizon; ++t) out.labels.state.push_back(at_time(s, t));
    for (const auto& a : one_step.labels.action)
        for (int t = 0; t < horizon; ++t) out.labels.action.push_back(at_time(a, t));
    for (const auto& o : one_step.labels.observation)
        for (int t = 0; t < horizon; ++t) out.labels.observation.push_back(at_time(o, t));
    for (const auto& r : one_step.labels.reward)
        for (int t = 0; t < horizon; ++t) out.labels.reward.push_back(at_time(r, t));
    for (const auto& c : one_step.labels.confounder)
        for (int t = 0; t <= horizon; ++t)
            if (out.has_var(at_time(c, t))) out.labels.confounder.push_back(at_time(c, t));
    out.validate();
    return out;
}

scm::Assignment trace_evidence(const Trace& trace, const Scm& one_step) {
    scm::Assignment ev;
    const auto& labels = one_step.labels;
    const std::string action_var = labels.action.empty() ? "" : labels.action[0];
    for (int t = 0; t < trace.horizon(); ++t) {
        const auto& step = trace.steps[t];
        for (const auto& [name, v] : step.state) ev[at_time(name, t)] = v;
        if (!action_var.empty()) ev[at_time(action_var, t)] = step.action;
        for (const auto& [name, v] : step.observation) ev[at_time(name, t)] = v;
    }
    for (const auto& [name, v] : trace.final_state) ev[at_time(name, trace.horizon())] = v;
    return ev;
}

bool OutcomePredicate::eval(double v) const {
    switch (cmp) {
        case Cmp::Eq: return std::abs(v - value) <= 1e-9;
        case Cmp::Ne: return std::abs(v - value) > 1e-9;
        case Cmp::Gt: return v > value;
        case Cmp::Lt: return v < value;
        case Cmp::Ge: return v >= value + 0.0;
        case Cmp::Le: return v <= value;
    }
    return false;
}

std::string OutcomePredicate::text() const {
    const char* op = "==";
    switch (cmp) {
        case Cmp::Eq: op = "=="; break;
        case Cmp::Ne: op = "!="; break;
        case Cmp::Gt: op = ">"; break;
        case Cmp::Lt: op = "<"; break;
        case Cmp::Ge: op = ">="; break;
        case Cmp::Le: op = "<="; break;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s %s %g", var.c_str(), op, value);
    return buf;
}

namespace {

// Directed-path reachability from one endogenous variable to another.
bool has_directed_path(const Scm& m, const std::string& from, const std::string& to) {
    if (from == to) return true;
    std::set<std::string> visited{from};
    std::vector<std::string> frontier{from};
    while (!frontier.empty()) {
        const auto cur = frontier.back();
        frontier.pop_back();
        for (const auto& v : m.endogenous) {
            if (visited.count(v.name)) continue;
            if (std::find(v.parents.begin(), v.parents.end(), cur) != v.parents.end()) {
                if (v.name == to) return true;
                visited.insert(v.name);
                frontier.push_back(v.name);
            }
        }
    }
    return false;
}

struct TwinEval {
    const scm::CompiledScm& scm;
    int query_slot;
    std::vector<double> values;

    TwinEval(const scm::CompiledScm& c, const std::string& query)
        : scm(c), query_slot(c.slot_of(query)), values(c.n_slots(), 0.0) {
        if (query_slot < 0) throw ExplainError("outcome variable not in model: " + query);
    }

    double run(const scm::Particle& p, std::span<const int> fslots, std::span<const double> fvals) {
        for (const auto& [name, v] : p.noise) values[scm.slot_of(name)] = v;
        for (std::size_t i = 0; i < fslots.size(); ++i) values[fslots[i]] = fvals[i];
        scm.eval_endogenous(values, fslots);
        return values[query_slot];
    }
};

// Weighted probability that the predicate holds under do(candidate = value),
// with its self-normalized standard error.
PnPs twin_prob(const scm::CompiledScm& scm_T, const scm::ParticleSet& posterior,
               const std::string& target, double forced, const OutcomePredicate& outcome) {
    std::vector<int> fslots;
    std::vector<double> fvals;
    scm::Intervention iv;
    iv.forced[target] = forced;
    scm_T.resolve_intervention(iv, fslots, fvals);
    TwinEval twin(scm_T, outcome.var);
    double p = 0.0;
    std::vector<double> xs(posterior.particles.size());
    for (std::size_t i = 0; i < posterior.particles.size(); ++i) {
        xs[i] = outcome.eval(twin.run(posterior.particles[i], fslots, fvals)) ? 1.0 : 0.0;
        p += posterior.particles[i].weight * xs[i];
    }
    double var = 0.0;
    for (std::size_t i = 0; i < posterior.particles.size(); ++i) {
        const double w = posterior.particles[i].weight;
        var += w * w * (xs[i] - p) * (xs[i] - p);
    }
    return {std::clamp(p, 0.0, 1.0), std::sqrt(var)};
}

}  // namespace

PnPs pn(const scm::CompiledScm& scm_T, const scm::Assignment& evidence,
        const CauseCandidate& candidate, double alternative, const OutcomePredicate& outcome,
        std::size_t n_particles, Rng& rng, const scm::InferConfig& cfg) {
    const auto name = candidate.unrolled_name();
    if (!has_directed_path(scm_T.model(), name, outcome.var)) return {0.0, 0.0};
    auto posterior = scm::abduct(scm_T, evidence, n_particles, rng, cfg);
    auto hit = twin_prob(scm_T, posterior, name, alternative, outcome);
    return {std::clamp(1.0 - hit.value, 0.0, 1.0), hit.se};
}

PnPs ps(const scm::CompiledScm& scm_T, const scm::Assignment& evidence,
        const CauseCandidate& candidate, const OutcomePredicate& outcome, std::size_t n_particles,
        Rng& rng, const scm::InferConfig& cfg) {
    const auto name = candidate.unrolled_name();
    auto posterior = scm::abduct(scm_T, evidence, n_particles, rng, cfg);
    return twin_prob(scm_T, posterior, name, candidate.factual, outcome);
}

Explanation rank_causes(const scm::CompiledScm& scm_T, const scm::Assignment& evidence,
                        const OutcomePredicate& outcome, const std::vector<CauseCandidate>& candidates,
                        std::size_t n_particles, Rng& rng, const scm::InferConfig& cfg) {
    if (candidates.empty()) throw ExplainError("rank_causes: no candidates");
    auto posterior = scm::abduct(scm_T, evidence, n_particles, rng, cfg);

    Explanation out;
    for (const auto& cand : candidates) {
        const auto name = cand.unrolled_name();
        CauseScore cs;
        cs.candidate = cand;
        const bool connected = has_directed_path(scm_T.model(), name, outcome.var);
        // PS is alternative-independent given the shared posterior.
        const auto ps_hit = twin_prob(scm_T, posterior, name, cand.factual, outcome);
        bool first = true;
        for (double alt : cand.alternatives) {
            if (alt == cand.factual) continue;
            PnPs pn_a{0.0, 0.0};
            double cf_prob = ps_hit.value;
            if (connected) {
                const auto hit = twin_prob(scm_T, posterior, name, alt, outcome);
                pn_a = {std::clamp(1.0 - hit.value, 0.0, 1.0), hit.se};
                cf_prob = hit.value;
            }
            const double score = pn_a.value * ps_hit.value;
            if (first || score > cs.score) {
                cs.best_alternative = alt;
                cs.pn = pn_a.value;
                cs.pn_se = pn_a.se;
                cs.ps = ps_hit.value;
                cs.ps_se = ps_hit.se;
                cs.score = score;
                cs.counterfactual_outcome_prob = cf_prob;
                first = false;
            }
        }
        if (first) {
            // No admissible alternative: scores default to zero.
            cs.ps = ps_hit.value;
            cs.ps_se = ps_hit.se;
        }
        out.ranked.push_back(std::move(cs));
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const CauseScore& a, const CauseScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.pn > b.pn;
    });
    for (const auto& cs : out.ranked) {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "had %s been %g, outcome %s would have occurred with probability %.4f "
                      "(PN=%.4f, PS=%.4f, score=%.4f)",
                      cs.candidate.unrolled_name().c_str(), cs.best_alternative,
                      outcome.text().c_str(), cs.counterfactual_outcome_prob, cs.pn, cs.ps, cs.score);
        out.summary.push_back(buf);
    }
    return out;
}

}  // namespace causalmine::explain
