#include "causalmine/scm/infer.hpp"

#include <algorithm>
#include <cmath>

#include "causalmine/util/math.hpp"

namespace causalmine::scm {

namespace {

struct EvidencePlan {
    std::vector<int> endo_index;  // evidence variables, topo position order
    std::vector<double> value;
    std::vector<char> is_evidence;  // per endogenous index
};

EvidencePlan plan_evidence(const CompiledScm& scm, const Assignment& evidence) {
    EvidencePlan plan;
    plan.is_evidence.assign(scm.n_endo(), 0);
    std::map<int, double> by_index;
    for (const auto& [name, v] : evidence) {
        const int ei = scm.model().endo_index(name);
        if (ei < 0) throw UnknownVariable("evidence variable " + name + " is not endogenous");
        by_index[ei] = v;
        plan.is_evidence[ei] = 1;
    }
    for (int ei : scm.topo()) {
        auto it = by_index.find(ei);
        if (it != by_index.end()) {
            plan.endo_index.push_back(ei);
            plan.value.push_back(it->second);
        }
    }
    return plan;
}

// Marginalized noise sources for one evidence variable in the sampling path:
// its own noise plus its undetermined exogenous parents.
std::vector<int> own_sources(const CompiledScm& scm, int ei) {
    std::vector<int> s{scm.noise_slot(ei)};
    for (int ps : scm.parent_slots(ei))
        if (!scm.slot_is_endo(ps) && std::find(s.begin(), s.end(), ps) == s.end()) s.push_back(ps);
    return s;
}

// Exact sweep shared by log_likelihood and abduct. Walks the topological
// order keeping a determined-value frontier; returns false as soon as any
// evidence conditional leaves the closed-form family (or, for abduction,
// fails to pin its sources).
struct ExactSweep {
    bool ok = false;
    double log_prob = 0.0;
    std::vector<double> values;
    std::vector<char> known;
};

ExactSweep exact_sweep(const CompiledScm& scm, const EvidencePlan& plan, const InferConfig& cfg,
                       bool need_point_posterior) {
    ExactSweep s;
    s.values.assign(scm.n_slots(), 0.0);
    s.known.assign(scm.n_slots(), 0);
    const auto& model = scm.model();
    for (std::size_t i = 0; i < model.exogenous.size(); ++i) {
        if (model.exogenous[i].dist.degenerate()) {
            s.values[i] = model.exogenous[i].dist.degenerate_value();
            s.known[i] = 1;
        }
    }
    std::size_t ev_cursor = 0;
    for (int ei : scm.topo()) {
        const int slot = scm.endo_slot(ei);
        if (plan.is_evidence[ei]) {
            const double v = plan.value[ev_cursor];
            ++ev_cursor;
            auto cond = analyze_conditional(scm, ei, s.values, s.known, {}, cfg.limits);
            if (!cond.exact) return s;
            const double lp = cond.log_prob_at(v, cfg.atom_tol);
            if (need_point_posterior) {
                if (!std::isfinite(lp)) {
                    s.ok = true;  // impossible evidence is detected exactly
                    s.log_prob = kNegInf;
                    return s;
                }
                if (!cond.point_posterior_at(v, cfg.atom_tol)) return s;
                // Pin the sources: single consistent component.
                for (const auto& c : cond.comps) {
                    const bool consistent =
                        c.atom ? std::abs(c.value - v) <= cfg.atom_tol : c.variance > 0.0;
                    if (!consistent) continue;
                    for (const auto& [src, k] : c.cats) {
                        s.values[src] = static_cast<double>(k);
                        s.known[src] = 1;
                    }
                    if (c.form.terms.size() == 1) {
                        const auto& [src, coeff] = c.form.terms[0];
                        s.values[src] = (v - c.form.a) / coeff;
                        s.known[src] = 1;
                    }
                    break;
                }
            }
            s.log_prob += lp;
            s.values[slot] = v;
            s.known[slot] = 1;
            if (!std::isfinite(s.log_prob) && !need_point_posterior) {
                s.ok = true;
                s.log_prob = kNegInf;
                return s;
            }
            continue;
        }
        // Deterministic propagation of non-evidence variables.
        bool parents_known = true;
        for (int ps : scm.parent_slots(ei)) parents_known = parents_known && s.known[ps];
        const bool noise_fixed = s.known[scm.noise_slot(ei)];
        if (parents_known && (noise_fixed || !model.endogenous[ei].mechanism.uses_noise())) {
            s.values[slot] = scm.eval_mechanism(ei, s.values);
            s.known[slot] = 1;
        }
    }
    s.ok = true;
    return s;
}

}  // namespace

LogLikResult log_likelihood_stats(const CompiledScm& scm, const Assignment& evidence,
                                  std::size_t n_samples, Rng& rng, const InferConfig& cfg) {
    if (n_samples < 1) throw ScmError("log_likelihood: n_samples must be >= 1");
    const auto plan = plan_evidence(scm, evidence);
    if (plan.endo_index.empty()) return {0.0, true, 0.0, 0};

    auto sweep = exact_sweep(scm, plan, cfg, false);
    if (sweep.ok) return {sweep.log_prob, true, 0.0, 0};

    // Likelihood weighting: sample latent noises forward, score each evidence
    // variable by its conditional given the sampled context, clamp it, and
    // continue.
    std::vector<double> logw(n_samples, 0.0);
    std::vector<double> values(scm.n_slots());
    std::vector<char> known(scm.n_slots(), 1);
    for (std::size_t s = 0; s < n_samples; ++s) {
        scm.draw_exogenous(values, rng);
        double lw = 0.0;
        std::size_t ev_cursor = 0;
        for (int ei : scm.topo()) {
            const int slot = scm.endo_slot(ei);
            if (!plan.is_evidence[ei]) {
                values[slot] = scm.eval_mechanism(ei, values);
                continue;
            }
            const double v = plan.value[ev_cursor];
            ++ev_cursor;
            if (std::isfinite(lw)) {
                const auto srcs = own_sources(scm, ei);
                auto cond = analyze_conditional(scm, ei, values, known, srcs, cfg.limits);
                if (cond.exact) {
                    lw += cond.log_prob_at(v, cfg.atom_tol);
                } else {
                    // Kernel fallback outside the closed-form family.
                    const double drawn = scm.eval_mechanism(ei, values);
                    const auto& nd = scm.model().exogenous[scm.noise_slot(ei)].dist;
                    if (nd.kind == NoiseDistribution::Kind::Categorical)
                        lw += std::abs(drawn - v) <= cfg.atom_tol ? 0.0 : kNegInf;
                    else
                        lw += log_normal_pdf(v, drawn, cfg.kernel_bandwidth * cfg.kernel_bandwidth);
                }
            }
            values[slot] = v;
        }
        logw[s] = lw;
    }
    const double lse = log_sum_exp(logw);
    LogLikResult res;
    res.exact = false;
    res.n_used = n_samples;
    if (!std::isfinite(lse)) {
        res.log_prob = kNegInf;
        return res;
    }
    res.log_prob = lse - std::log(static_cast<double>(n_samples));
    // Relative standard error of the mean weight, via normalized weights.
    double sum2 = 0.0;
    for (double lw : logw) {
        const double w = std::exp(lw - lse);
        sum2 += w * w;
    }
    const double n = static_cast<double>(n_samples);
    const double rel_var = std::max(0.0, n * sum2 - 1.0);
    res.se_log = std::sqrt(rel_var / n);
    return res;
}

double log_likelihood(const CompiledScm& scm, const Assignment& evidence, std::size_t n_samples,
                      Rng& rng, const InferConfig& cfg) {
    return log_likelihood_stats(scm, evidence, n_samples, rng, cfg).log_prob;
}

ParticleSet abduct(const CompiledScm& scm, const Assignment& evidence, std::size_t n_particles,
                   Rng& rng, const InferConfig& cfg) {
    if (n_particles < 1) throw ScmError("abduct: n_particles must be >= 1");
    const auto plan = plan_evidence(scm, evidence);

    auto sweep = exact_sweep(scm, plan, cfg, true);
    if (sweep.ok) {
        if (!std::isfinite(sweep.log_prob))
            throw DegenerateEvidence("abduct: evidence impossible under model");
        bool all_known = true;
        for (std::size_t i = 0; i < scm.n_exo(); ++i) all_known = all_known && sweep.known[i];
        if (all_known) {
            Particle p;
            p.weight = 1.0;
            for (std::size_t i = 0; i < scm.n_exo(); ++i)
                p.noise[scm.model().exogenous[i].name] = sweep.values[i];
            return {{std::move(p)}, true};
        }
    }

    ParticleSet out;
    out.exact = false;
    std::vector<double> logw(n_particles, 0.0);
    std::vector<double> values(scm.n_slots());
    std::vector<char> known(scm.n_slots(), 1);
    out.particles.resize(n_particles);
    for (std::size_t s = 0; s < n_particles; ++s) {
        scm.draw_exogenous(values, rng);
        double lw = 0.0;
        std::size_t ev_cursor = 0;
        for (int ei : scm.topo()) {
            const int slot = scm.endo_slot(ei);
            if (!plan.is_evidence[ei]) {
                values[slot] = scm.eval_mechanism(ei, values);
                continue;
            }
            const double v = plan.value[ev_cursor];
            ++ev_cursor;
            if (std::isfinite(lw)) {
                const auto srcs = own_sources(scm, ei);
                auto cond = analyze_conditional(scm, ei, values, known, srcs, cfg.limits);
                if (cond.exact) {
                    lw += cond.posterior_draw(v, scm.model(), rng, values, cfg.atom_tol);
                } else {
                    const double drawn = scm.eval_mechanism(ei, values);
                    const auto& nd = scm.model().exogenous[scm.noise_slot(ei)].dist;
                    if (nd.kind == NoiseDistribution::Kind::Categorical)
                        lw += std::abs(drawn - v) <= cfg.atom_tol ? 0.0 : kNegInf;
                    else
                        lw += log_normal_pdf(v, drawn, cfg.kernel_bandwidth * cfg.kernel_bandwidth);
                }
            }
            values[slot] = v;
        }
        logw[s] = lw;
        auto& p = out.particles[s];
        for (std::size_t i = 0; i < scm.n_exo(); ++i)
            p.noise[scm.model().exogenous[i].name] = values[i];
    }
    const double lse = log_sum_exp(logw);
    if (!std::isfinite(lse)) throw DegenerateEvidence("abduct: all particle weights are zero");
    for (std::size_t s = 0; s < n_particles; ++s) out.particles[s].weight = std::exp(logw[s] - lse);
    return out;
}

CounterfactualSummary counterfactual(const CompiledScm& scm, const Assignment& evidence,
                                     const Intervention& intervention, const std::string& query,
                                     std::size_t n_particles, Rng& rng, const InferConfig& cfg) {
    const int qi = scm.model().endo_index(query);
    if (qi < 0) throw UnknownVariable("counterfactual query " + query + " is not endogenous");
    std::vector<int> fslots;
    std::vector<double> fvals;
    scm.resolve_intervention(intervention, fslots, fvals);

    auto post = abduct(scm, evidence, n_particles, rng, cfg);

    std::vector<double> qvals(post.particles.size());
    std::vector<double> weights(post.particles.size());
    std::vector<double> values(scm.n_slots());
    for (std::size_t s = 0; s < post.particles.size(); ++s) {
        const auto& p = post.particles[s];
        for (const auto& [name, v] : p.noise) values[scm.slot_of(name)] = v;
        for (std::size_t k = 0; k < fslots.size(); ++k) values[fslots[k]] = fvals[k];
        scm.eval_endogenous(values, fslots);
        qvals[s] = values[scm.endo_slot(qi)];
        weights[s] = p.weight;
    }
    CounterfactualSummary out;
    out.exact = post.exact;
    const auto mv = weighted_mean_var(qvals, weights);
    out.mean = mv.mean;
    out.variance = mv.variance;
    // Probability table for concentrated (discrete) outcomes.
    std::map<double, double> table;
    bool discrete = true;
    for (std::size_t s = 0; s < qvals.size() && discrete; ++s) {
        bool merged = false;
        for (auto& [val, w] : table) {
            if (std::abs(val - qvals[s]) <= cfg.atom_tol) {
                w += weights[s];
                merged = true;
                break;
            }
        }
        if (!merged) {
            if (table.size() >= 64)
                discrete = false;
            else
                table[qvals[s]] = weights[s];
        }
    }
    if (discrete) out.table = std::move(table);
    return out;
}

}  // namespace causalmine::scm
