#include "causalmine/adapt/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "causalmine/scm/serialize.hpp"
#include "causalmine/util/math.hpp"
#include "causalmine/util/parallel.hpp"

namespace causalmine::adapt {

namespace {

std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

using X = scm::StructuralExpr;

struct AppliedEdit {
    scm::Scm model;
    EditDescriptor edit;
};

std::optional<AppliedEdit> apply_add_gated(const scm::Scm& base, const ProposalRule& rule,
                                           double mean, double variance) {
    const int ti = base.endo_index(rule.target);
    const int gi = base.endo_index(rule.gate);
    if (ti < 0 || gi < 0) return std::nullopt;
    EditDescriptor ed;
    ed.kind = "add_gated_exogenous";
    ed.target = rule.target;
    ed.gate = rule.gate;
    ed.mean = mean;
    ed.variance = variance;
    ed.added_exo = "w_" + rule.target + "_" + rule.gate + "_m" + fmt_num(mean) + "_v" + fmt_num(variance);
    ed.id = "add_gated_exogenous(" + rule.target + "," + rule.gate + ",m=" + fmt_num(mean) +
            ",v=" + fmt_num(variance) + ")";
    if (base.has_var(ed.added_exo)) return std::nullopt;  // same edit already applied

    scm::Scm m = base;
    m.exogenous.push_back({ed.added_exo, scm::NoiseDistribution::gaussian(mean, variance)});
    auto& var = m.endogenous[ti];
    int gate_idx = -1;
    for (std::size_t i = 0; i < var.parents.size(); ++i)
        if (var.parents[i] == rule.gate) gate_idx = static_cast<int>(i);
    if (gate_idx < 0) {
        ed.gate_added = true;
        gate_idx = static_cast<int>(var.parents.size());
        var.parents.push_back(rule.gate);
    }
    const int w_idx = static_cast<int>(var.parents.size());
    var.parents.push_back(ed.added_exo);
    var.mechanism = X::add(std::move(var.mechanism),
                           X::gate(X::parent_ref(gate_idx), rule.gate_threshold,
                                   X::parent_ref(w_idx), X::constant(0.0)));
    try {
        m.validate();
    } catch (const scm::ScmError&) {
        return std::nullopt;
    }
    return AppliedEdit{std::move(m), std::move(ed)};
}

std::optional<AppliedEdit> apply_adjust_gaussian(const scm::Scm& base, const ProposalRule& rule,
                                                 double mean, double variance) {
    const int xi = base.exo_index(rule.target);
    if (xi < 0) return std::nullopt;
    const auto& d = base.exogenous[xi].dist;
    if (d.kind != scm::NoiseDistribution::Kind::Gaussian) return std::nullopt;
    if (d.mean == mean && d.variance == variance) return std::nullopt;
    EditDescriptor ed;
    ed.kind = "adjust_gaussian";
    ed.target = rule.target;
    ed.mean = mean;
    ed.variance = variance;
    ed.id = "adjust_gaussian(" + rule.target + ",m=" + fmt_num(mean) + ",v=" + fmt_num(variance) + ")";
    scm::Scm m = base;
    m.exogenous[xi].dist = scm::NoiseDistribution::gaussian(mean, variance);
    try {
        m.validate();
    } catch (const scm::ScmError&) {
        return std::nullopt;
    }
    return AppliedEdit{std::move(m), std::move(ed)};
}

std::optional<AppliedEdit> apply_adjust_linear(const scm::Scm& base, const ProposalRule& rule,
                                               double delta) {
    const int ti = base.endo_index(rule.target);
    if (ti < 0) return std::nullopt;
    const auto& mech = base.endogenous[ti].mechanism;
    if (mech.op != X::Op::Linear) return std::nullopt;
    if (rule.weight_index < 0 || rule.weight_index >= static_cast<int>(mech.weights.size()))
        return std::nullopt;
    EditDescriptor ed;
    ed.kind = "adjust_linear_weight";
    ed.target = rule.target;
    ed.weight_index = rule.weight_index;
    ed.delta = delta;
    ed.id = "adjust_linear_weight(" + rule.target + ",i=" + std::to_string(rule.weight_index) +
            ",d=" + fmt_num(delta) + ")";
    scm::Scm m = base;
    m.endogenous[ti].mechanism.weights[rule.weight_index] += delta;
    try {
        m.validate();
    } catch (const scm::ScmError&) {
        return std::nullopt;
    }
    return AppliedEdit{std::move(m), std::move(ed)};
}

// Reverses a previously applied add_gated_exogenous edit.
std::optional<scm::Scm> undo_add_gated(const scm::Scm& base, const EditDescriptor& ed) {
    const int ti = base.endo_index(ed.target);
    const int wi = base.exo_index(ed.added_exo);
    if (ti < 0 || wi < 0) return std::nullopt;
    scm::Scm m = base;
    auto& var = m.endogenous[ti];
    // Expect mechanism = Add(original, Gate(parent(gate), thr, parent(w), 0))
    // with w (and possibly the gate) as the trailing parents.
    if (var.mechanism.op != X::Op::Add || var.mechanism.args.size() != 2) return std::nullopt;
    const auto& g = var.mechanism.args[1];
    if (g.op != X::Op::Gate || g.args[1].op != X::Op::Parent) return std::nullopt;
    if (var.parents.empty() || var.parents[g.args[1].parent] != ed.added_exo) return std::nullopt;
    if (var.parents.back() != ed.added_exo) return std::nullopt;
    var.parents.pop_back();
    if (ed.gate_added) {
        if (var.parents.empty() || var.parents.back() != ed.gate) return std::nullopt;
        var.parents.pop_back();
    }
    var.mechanism = var.mechanism.args[0];
    m.exogenous.erase(m.exogenous.begin() + wi);
    try {
        m.validate();
    } catch (const scm::ScmError&) {
        return std::nullopt;
    }
    return m;
}

}  // namespace

ProposalRule ProposalRule::add_gated(std::string target, std::string gate, std::vector<double> means,
                                     std::vector<double> variances, double threshold) {
    ProposalRule r;
    r.kind = Kind::AddGatedExogenous;
    r.target = std::move(target);
    r.gate = std::move(gate);
    r.mean_grid = std::move(means);
    r.variance_grid = std::move(variances);
    r.gate_threshold = threshold;
    return r;
}
ProposalRule ProposalRule::adjust_gaussian(std::string exo, std::vector<double> means,
                                           std::vector<double> variances) {
    ProposalRule r;
    r.kind = Kind::AdjustGaussianParams;
    r.target = std::move(exo);
    r.mean_grid = std::move(means);
    r.variance_grid = std::move(variances);
    return r;
}
ProposalRule ProposalRule::adjust_linear(std::string target, int weight_index, std::vector<double> deltas) {
    ProposalRule r;
    r.kind = Kind::AdjustLinearWeight;
    r.target = std::move(target);
    r.weight_index = weight_index;
    r.delta_grid = std::move(deltas);
    return r;
}
ProposalRule ProposalRule::remove_added(std::string edit_id) {
    ProposalRule r;
    r.kind = Kind::RemoveAddedVariable;
    r.edit_id = std::move(edit_id);
    return r;
}

ModelBelief ModelBelief::initial(scm::Scm base, std::size_t capacity) {
    base.validate();
    ModelBelief b;
    b.capacity = capacity;
    b.hypotheses.push_back({std::move(base), 0.0, {}});
    return b;
}

double ModelBelief::weight_sum() const {
    double s = 0.0;
    for (const auto& h : hypotheses) s += std::exp(h.log_weight);
    return s;
}

void ModelBelief::normalize() {
    std::vector<double> lw;
    lw.reserve(hypotheses.size());
    for (const auto& h : hypotheses) lw.push_back(h.log_weight);
    const double lse = log_sum_exp(lw);
    if (!std::isfinite(lse)) return;
    for (auto& h : hypotheses) h.log_weight -= lse;
}

std::vector<ModelHypothesis> gen_alt_scms(const ModelBelief& belief,
                                          const std::vector<ProposalRule>& rules, Rng& rng,
                                          std::size_t max_new, const AdaptConfig& cfg) {
    (void)rng;  // grids are enumerated deterministically
    std::vector<ModelHypothesis> out;
    if (max_new == 0) return out;
    std::set<std::string> seen;
    for (const auto& h : belief.hypotheses) seen.insert(scm::canonical_key(h.model));

    const double lw_new = std::log(cfg.new_hypothesis_mass);
    auto push = [&](scm::Scm m, std::vector<EditDescriptor> prov) {
        if (out.size() >= max_new) return;
        auto key = scm::canonical_key(m);
        if (!seen.insert(key).second) return;  // duplicate of existing or proposed
        out.push_back({std::move(m), lw_new, std::move(prov)});
    };

    for (const auto& h : belief.hypotheses) {
        for (const auto& rule : rules) {
            if (out.size() >= max_new) return out;
            switch (rule.kind) {
                case ProposalRule::Kind::AddGatedExogenous:
                    for (double mean : rule.mean_grid)
                        for (double variance : rule.variance_grid)
                            if (auto ap = apply_add_gated(h.model, rule, mean, variance)) {
                                auto prov = h.provenance;
                                prov.push_back(ap->edit);
                                push(std::move(ap->model), std::move(prov));
                            }
                    break;
                case ProposalRule::Kind::AdjustGaussianParams:
                    for (double mean : rule.mean_grid)
                        for (double variance : rule.variance_grid)
                            if (auto ap = apply_adjust_gaussian(h.model, rule, mean, variance)) {
                                auto prov = h.provenance;
                                prov.push_back(ap->edit);
                                push(std::move(ap->model), std::move(prov));
                            }
                    break;
                case ProposalRule::Kind::AdjustLinearWeight:
                    for (double delta : rule.delta_grid)
                        if (auto ap = apply_adjust_linear(h.model, rule, delta)) {
                            auto prov = h.provenance;
                            prov.push_back(ap->edit);
                            push(std::move(ap->model), std::move(prov));
                        }
                    break;
                case ProposalRule::Kind::RemoveAddedVariable:
                    for (std::size_t k = 0; k < h.provenance.size(); ++k) {
                        const auto& ed = h.provenance[k];
                        if (ed.id != rule.edit_id || ed.kind != "add_gated_exogenous") continue;
                        if (auto m = undo_add_gated(h.model, ed)) {
                            auto prov = h.provenance;
                            prov.erase(prov.begin() + k);
                            push(std::move(*m), std::move(prov));
                        }
                    }
                    break;
            }
        }
    }
    return out;
}

ModelBelief adapt_step(const ModelBelief& belief, const DataBatch& batch,
                       const std::vector<ProposalRule>& rules, Rng& rng, const AdaptConfig& cfg) {
    if (batch.records.empty()) throw EmptyBatch("adapt_step: batch has no records");
    if (belief.hypotheses.empty()) throw EmptyBelief("adapt_step: empty belief");

    ModelBelief next = belief;
    next.warning_all_impossible = false;
    auto proposals = gen_alt_scms(belief, rules, rng, cfg.max_new, cfg);
    for (auto& p : proposals) next.hypotheses.push_back(std::move(p));

    // Records are i.i.d. given the model; hypotheses are scored on
    // independent seed streams so parallel evaluation matches sequential.
    const std::uint64_t step_seed = rng();
    const std::size_t n = next.hypotheses.size();
    std::vector<double> loglik(n, 0.0);
    parallel_for_indexed(n, env_thread_cap(cfg.n_threads), [&](std::size_t i) {
        const scm::CompiledScm compiled(next.hypotheses[i].model);
        Rng hrng(derive_seed(step_seed, i));
        double ll = 0.0;
        for (const auto& rec : batch.records) {
            ll += scm::log_likelihood(compiled, rec, cfg.n_samples, hrng, cfg.infer);
            if (!std::isfinite(ll)) break;
        }
        loglik[i] = ll;
    });

    std::vector<double> lw(n);
    for (std::size_t i = 0; i < n; ++i) lw[i] = next.hypotheses[i].log_weight + loglik[i];
    const double lse = log_sum_exp(lw);
    if (!std::isfinite(lse)) {
        ModelBelief unchanged = belief;
        unchanged.warning_all_impossible = true;
        return unchanged;
    }
    for (std::size_t i = 0; i < n; ++i) next.hypotheses[i].log_weight = lw[i] - lse;

    // Keep the N most probable (ties favor fewer edits, then insertion
    // order), preserving insertion order among survivors so hypothesis
    // indices stay stable across steps. The predefined zero-edit model is
    // retained as an anchor when capacity allows: proposals are one edit
    // away from existing hypotheses, so losing the anchor would make the
    // single-edit region unreachable after a regime shift.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ha = next.hypotheses[a];
        const auto& hb = next.hypotheses[b];
        if (ha.log_weight != hb.log_weight) return ha.log_weight > hb.log_weight;
        return ha.provenance.size() < hb.provenance.size();
    });
    order.resize(std::min<std::size_t>(next.capacity, n));
    if (next.capacity >= 2) {
        std::size_t anchor = n;
        for (std::size_t i = 0; i < n; ++i)
            if (next.hypotheses[i].provenance.empty()) {
                anchor = i;
                break;
            }
        if (anchor < n && std::find(order.begin(), order.end(), anchor) == order.end())
            order.back() = anchor;
    }
    std::sort(order.begin(), order.end());
    std::vector<ModelHypothesis> kept;
    for (std::size_t i : order) kept.push_back(std::move(next.hypotheses[i]));
    next.hypotheses = std::move(kept);
    next.normalize();
    next.t = belief.t + 1;
    return next;
}

const ModelHypothesis& map_hypothesis(const ModelBelief& belief) {
    if (belief.hypotheses.empty()) throw EmptyBelief("map_model: empty belief");
    const ModelHypothesis* best = &belief.hypotheses[0];
    for (const auto& h : belief.hypotheses) {
        if (h.log_weight > best->log_weight ||
            (h.log_weight == best->log_weight && h.provenance.size() < best->provenance.size()))
            best = &h;
    }
    return *best;
}

const scm::Scm& map_model(const ModelBelief& belief) { return map_hypothesis(belief).model; }

nlohmann::json belief_to_json(const ModelBelief& belief) {
    nlohmann::json j;
    j["t"] = belief.t;
    j["capacity"] = belief.capacity;
    j["warning_all_impossible"] = belief.warning_all_impossible;
    nlohmann::json hyps = nlohmann::json::array();
    for (const auto& h : belief.hypotheses) {
        nlohmann::json edits = nlohmann::json::array();
        for (const auto& e : h.provenance) edits.push_back(e.id);
        hyps.push_back({{"log_weight", h.log_weight},
                        {"weight", std::exp(h.log_weight)},
                        {"provenance", std::move(edits)},
                        {"scm", scm::to_json(h.model)}});
    }
    j["hypotheses"] = std::move(hyps);
    return j;
}

}  // namespace causalmine::adapt
