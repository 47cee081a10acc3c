#include "causalmine/scm/analyze.hpp"

#include <algorithm>
#include <cmath>

#include "causalmine/util/math.hpp"

namespace causalmine::scm {

void AffineForm::add_term(int slot, double coeff) {
    if (coeff == 0.0) return;
    auto it = std::lower_bound(terms.begin(), terms.end(), slot,
                               [](const auto& t, int s) { return t.first < s; });
    if (it != terms.end() && it->first == slot) {
        it->second += coeff;
        if (it->second == 0.0) terms.erase(it);
    } else {
        terms.insert(it, {slot, coeff});
    }
}

AffineForm& AffineForm::operator+=(const AffineForm& o) {
    a += o.a;
    for (const auto& [slot, c] : o.terms) add_term(slot, c);
    return *this;
}

void AffineForm::scale(double s) {
    a *= s;
    if (s == 0.0) {
        terms.clear();
        return;
    }
    for (auto& [slot, c] : terms) c *= s;
}

namespace {

struct NotExact {};

struct Branch {
    std::map<int, int> cats;
    std::vector<Halfspace> halfspaces;
};

struct Ctx {
    const CompiledScm& scm;
    std::span<const double> values;
    std::vector<char> known;  // copy with force_unknown applied
    const AnalyzeLimits& limits;
    std::vector<int> sources;
    long combos = 0;

    void note_source(int slot) {
        if (std::find(sources.begin(), sources.end(), slot) == sources.end()) sources.push_back(slot);
    }
    void bump() {
        if (++combos > 1000L * limits.max_components) throw NotExact{};
    }
};

using Piece = std::pair<Branch, AffineForm>;

bool same_form(const AffineForm& x, const AffineForm& y) {
    return x.a == y.a && x.terms == y.terms;
}

// Adds a halfspace constraint to a branch. Identical constraints are merged,
// contradictory ones mark the branch infeasible, and distinct constraints
// sharing a Gaussian source are outside the closed-form family.
bool add_halfspace(Branch& b, const AffineForm& form, double thr, bool greater) {
    for (const auto& h : b.halfspaces) {
        if (same_form(h.form, form) && h.threshold == thr)
            return h.greater == greater;  // false -> infeasible
        for (const auto& [slot, c] : form.terms)
            for (const auto& [slot2, c2] : h.form.terms)
                if (slot == slot2) throw NotExact{};
    }
    b.halfspaces.push_back({form, thr, greater});
    return true;
}

const NoiseDistribution& slot_dist(const CompiledScm& scm, int slot) {
    return scm.model().exogenous[slot].dist;
}

std::vector<Piece> eval_sym(Ctx& ctx, const StructuralExpr& e, std::span<const int> parent_slots,
                            int noise_slot, Branch branch, int depth);

// Resolve a slot reference (parent or noise) to pieces under a branch.
std::vector<Piece> resolve_slot(Ctx& ctx, int slot, Branch branch, int depth) {
    if (ctx.known[slot]) {
        AffineForm f;
        f.a = ctx.values[slot];
        return {{std::move(branch), std::move(f)}};
    }
    if (!ctx.scm.slot_is_endo(slot)) {
        // Unknown exogenous slot: a noise source.
        if (auto it = branch.cats.find(slot); it != branch.cats.end()) {
            AffineForm f;
            f.a = static_cast<double>(it->second);
            return {{std::move(branch), std::move(f)}};
        }
        const auto& d = slot_dist(ctx.scm, slot);
        ctx.note_source(slot);
        if (d.kind == NoiseDistribution::Kind::Gaussian) {
            AffineForm f;
            if (d.variance <= 0.0) {
                f.a = d.mean;
            } else {
                f.a = 0.0;
                f.add_term(slot, 1.0);
            }
            return {{std::move(branch), std::move(f)}};
        }
        std::vector<Piece> out;
        for (std::size_t k = 0; k < d.probabilities.size(); ++k) {
            if (d.probabilities[k] <= 0.0) continue;
            ctx.bump();
            Branch b = branch;
            b.cats[slot] = static_cast<int>(k);
            AffineForm f;
            f.a = static_cast<double>(k);
            out.push_back({std::move(b), std::move(f)});
        }
        if (out.empty()) throw NotExact{};
        return out;
    }
    // Unknown endogenous slot: inline if it feeds only the variable under
    // analysis (otherwise its uncertainty would correlate across factors).
    const int ei = slot - static_cast<int>(ctx.scm.n_exo());
    if (ctx.scm.endo_consumer_count(ei) > 1 || depth >= ctx.limits.max_inline_depth) throw NotExact{};
    const auto& var = ctx.scm.model().endogenous[ei];
    return eval_sym(ctx, var.mechanism, ctx.scm.parent_slots(ei), ctx.scm.noise_slot(ei),
                    std::move(branch), depth + 1);
}

std::vector<Piece> eval_sym(Ctx& ctx, const StructuralExpr& e, std::span<const int> parent_slots,
                            int noise_slot, Branch branch, int depth) {
    using Op = StructuralExpr::Op;
    switch (e.op) {
        case Op::Const: {
            AffineForm f;
            f.a = e.value;
            return {{std::move(branch), std::move(f)}};
        }
        case Op::Parent:
            return resolve_slot(ctx, parent_slots[e.parent], std::move(branch), depth);
        case Op::Noise:
            return resolve_slot(ctx, noise_slot, std::move(branch), depth);
        case Op::Add: {
            std::vector<Piece> out;
            for (auto& [b1, f1] : eval_sym(ctx, e.args[0], parent_slots, noise_slot, branch, depth)) {
                for (auto& [b2, f2] : eval_sym(ctx, e.args[1], parent_slots, noise_slot, b1, depth)) {
                    ctx.bump();
                    AffineForm f = f1;
                    f += f2;
                    out.push_back({std::move(b2), std::move(f)});
                }
            }
            return out;
        }
        case Op::Mul: {
            std::vector<Piece> out;
            for (auto& [b1, f1] : eval_sym(ctx, e.args[0], parent_slots, noise_slot, branch, depth)) {
                for (auto& [b2, f2] : eval_sym(ctx, e.args[1], parent_slots, noise_slot, b1, depth)) {
                    ctx.bump();
                    if (!f1.is_const() && !f2.is_const()) throw NotExact{};  // product of Gaussians
                    AffineForm f;
                    if (f1.is_const()) {
                        f = f2;
                        f.scale(f1.a);
                    } else {
                        f = f1;
                        f.scale(f2.a);
                    }
                    out.push_back({std::move(b2), std::move(f)});
                }
            }
            return out;
        }
        case Op::Linear: {
            std::vector<Piece> acc = {{std::move(branch), AffineForm{e.bias, {}}}};
            for (std::size_t i = 0; i < e.weights.size(); ++i) {
                if (e.weights[i] == 0.0) continue;
                std::vector<Piece> next;
                for (auto& [b, f] : acc) {
                    for (auto& [b2, f2] : resolve_slot(ctx, parent_slots[i], b, depth)) {
                        ctx.bump();
                        AffineForm fs = f2;
                        fs.scale(e.weights[i]);
                        AffineForm fo = f;
                        fo += fs;
                        next.push_back({std::move(b2), std::move(fo)});
                    }
                }
                acc = std::move(next);
            }
            if (e.noise_coeff != 0.0) {
                std::vector<Piece> next;
                for (auto& [b, f] : acc) {
                    for (auto& [b2, f2] : resolve_slot(ctx, noise_slot, b, depth)) {
                        ctx.bump();
                        AffineForm fs = f2;
                        fs.scale(e.noise_coeff);
                        AffineForm fo = f;
                        fo += fs;
                        next.push_back({std::move(b2), std::move(fo)});
                    }
                }
                acc = std::move(next);
            }
            return acc;
        }
        case Op::Gate: {
            std::vector<Piece> out;
            for (auto& [bc, fc] : eval_sym(ctx, e.args[0], parent_slots, noise_slot, branch, depth)) {
                if (fc.is_const()) {
                    const auto& side = fc.a > e.threshold ? e.args[1] : e.args[2];
                    for (auto& p : eval_sym(ctx, side, parent_slots, noise_slot, bc, depth))
                        out.push_back(std::move(p));
                    continue;
                }
                // Probit split on an affine-Gaussian condition.
                Branch bt = bc;
                if (add_halfspace(bt, fc, e.threshold, true)) {
                    for (auto& [b2, f2] : eval_sym(ctx, e.args[1], parent_slots, noise_slot, bt, depth)) {
                        ctx.bump();
                        out.push_back({std::move(b2), std::move(f2)});
                    }
                }
                Branch be = std::move(bc);
                if (add_halfspace(be, fc, e.threshold, false)) {
                    for (auto& [b2, f2] : eval_sym(ctx, e.args[2], parent_slots, noise_slot, be, depth)) {
                        ctx.bump();
                        out.push_back({std::move(b2), std::move(f2)});
                    }
                }
            }
            return out;
        }
        case Op::Table: {
            // All parents must resolve to constants per combination.
            std::vector<std::pair<Branch, std::vector<double>>> keys = {{std::move(branch), {}}};
            std::size_t arity = 0;
            for (const auto& r : e.rows) arity = std::max(arity, r.key.size());
            for (std::size_t i = 0; i < arity; ++i) {
                std::vector<std::pair<Branch, std::vector<double>>> next;
                for (auto& [b, key] : keys) {
                    for (auto& [b2, f2] : resolve_slot(ctx, parent_slots[i], b, depth)) {
                        ctx.bump();
                        if (!f2.is_const()) throw NotExact{};
                        auto k = key;
                        k.push_back(f2.a);
                        next.push_back({std::move(b2), std::move(k)});
                    }
                }
                keys = std::move(next);
            }
            std::vector<Piece> out;
            for (auto& [b, key] : keys) {
                double v = e.table_default;
                for (const auto& row : e.rows) {
                    bool match = true;
                    for (std::size_t i = 0; i < row.key.size() && match; ++i)
                        match = std::abs(row.key[i] - key[i]) <= 1e-9;
                    if (match) {
                        v = row.value;
                        break;
                    }
                }
                out.push_back({std::move(b), AffineForm{v, {}}});
            }
            return out;
        }
    }
    throw NotExact{};
}

double branch_probability(const Ctx& ctx, const Branch& b) {
    double p = 1.0;
    for (const auto& [slot, k] : b.cats) p *= slot_dist(ctx.scm, slot).probabilities[k];
    for (const auto& h : b.halfspaces) {
        double m = h.form.a, var = 0.0;
        for (const auto& [slot, c] : h.form.terms) {
            const auto& d = slot_dist(ctx.scm, slot);
            m += c * d.mean;
            var += c * c * d.variance;
        }
        const double sd = std::sqrt(var);
        const double p_gt = sd > 0.0 ? normal_cdf((m - h.threshold) / sd) : (m > h.threshold ? 1.0 : 0.0);
        p *= h.greater ? p_gt : 1.0 - p_gt;
    }
    return p;
}

}  // namespace

VarConditional analyze_conditional(const CompiledScm& scm, int endo_index,
                                   std::span<const double> values, std::span<const char> known,
                                   std::span<const int> force_unknown, const AnalyzeLimits& limits) {
    Ctx ctx{scm, values, std::vector<char>(known.begin(), known.end()), limits, {}, 0};
    for (int s : force_unknown) ctx.known[s] = 0;
    ctx.known[scm.noise_slot(endo_index)] = 0;
    VarConditional out;
    try {
        const auto& var = scm.model().endogenous[endo_index];
        auto pieces = eval_sym(ctx, var.mechanism, scm.parent_slots(endo_index),
                               scm.noise_slot(endo_index), Branch{}, 0);
        if (pieces.size() > static_cast<std::size_t>(limits.max_components)) throw NotExact{};
        for (auto& [b, f] : pieces) {
            // A Gaussian source may appear in the value form or in one
            // halfspace constraint, never both (that joint law is not in the
            // closed-form family).
            for (const auto& [slot, c] : f.terms)
                for (const auto& h : b.halfspaces)
                    for (const auto& [slot2, c2] : h.form.terms)
                        if (slot == slot2) throw NotExact{};
            CondComponent comp;
            comp.prob = branch_probability(ctx, b);
            if (comp.prob <= 0.0) continue;
            comp.form = f;
            comp.cats = std::move(b.cats);
            comp.halfspaces = std::move(b.halfspaces);
            double m = f.a, varr = 0.0;
            for (const auto& [slot, c] : f.terms) {
                const auto& d = slot_dist(ctx.scm, slot);
                m += c * d.mean;
                varr += c * c * d.variance;
            }
            comp.atom = varr <= 0.0;
            comp.value = m;
            comp.variance = varr;
            out.comps.push_back(std::move(comp));
        }
        out.sources = std::move(ctx.sources);
        out.exact = true;
    } catch (const NotExact&) {
        out.exact = false;
        out.comps.clear();
    }
    return out;
}

double VarConditional::log_prob_at(double v, double atom_tol) const {
    double mass = 0.0, dens = 0.0;
    bool any_gauss = false;
    for (const auto& c : comps) {
        if (c.atom) {
            if (std::abs(c.value - v) <= atom_tol) mass += c.prob;
        } else {
            any_gauss = true;
            dens += c.prob * normal_pdf(v, c.value, c.variance);
        }
    }
    if (mass > 0.0) return std::log(mass);
    if (any_gauss && dens > 0.0) return std::log(dens);
    return kNegInf;
}

bool VarConditional::point_posterior_at(double v, double atom_tol) const {
    const CondComponent* hit = nullptr;
    for (const auto& c : comps) {
        const bool consistent = c.atom ? std::abs(c.value - v) <= atom_tol : c.variance > 0.0;
        if (!consistent) continue;
        if (hit) return false;
        hit = &c;
    }
    if (!hit) return false;
    if (!hit->halfspaces.empty()) return false;
    // Every reached source must be pinned: categorical assignment, or the
    // single Gaussian term inverted from the observed value.
    std::size_t pinned = hit->cats.size();
    if (!hit->form.terms.empty()) {
        if (hit->form.terms.size() != 1) return false;
        pinned += 1;
    }
    return pinned == sources.size();
}

double VarConditional::posterior_draw(double v, const Scm& scm, Rng& rng, std::span<double> values,
                                      double atom_tol) const {
    std::vector<double> w(comps.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const auto& c = comps[i];
        w[i] = c.atom ? (std::abs(c.value - v) <= atom_tol ? c.prob : 0.0)
                      : c.prob * normal_pdf(v, c.value, c.variance);
        total += w[i];
    }
    if (total <= 0.0) return kNegInf;
    double u = draw_uniform(rng) * total;
    std::size_t pick = 0;
    for (; pick + 1 < comps.size(); ++pick) {
        if (u <= w[pick]) break;
        u -= w[pick];
    }
    const auto& c = comps[pick];
    for (const auto& [slot, k] : c.cats) values[slot] = static_cast<double>(k);
    // Halfspace-constrained Gaussians: sample the 1-D margin by inverse CDF,
    // then project the prior draw onto the fixed-margin conditional.
    for (const auto& h : c.halfspaces) {
        double m = h.form.a, varr = 0.0;
        for (const auto& [slot, cf] : h.form.terms) {
            const auto& d = scm.exogenous[slot].dist;
            m += cf * d.mean;
            varr += cf * cf * d.variance;
        }
        if (varr <= 0.0) continue;
        const double sd = std::sqrt(varr);
        const double z0 = (h.threshold - m) / sd;
        const double z = h.greater ? truncated_normal_above(z0, draw_uniform(rng))
                                   : truncated_normal_below(z0, draw_uniform(rng));
        const double t = m + sd * z;
        double fp = h.form.a;
        for (const auto& [slot, cf] : h.form.terms) {
            const auto& d = scm.exogenous[slot].dist;
            values[slot] = draw_normal(rng, d.mean, std::sqrt(d.variance));
            fp += cf * values[slot];
        }
        for (const auto& [slot, cf] : h.form.terms) {
            const auto& d = scm.exogenous[slot].dist;
            values[slot] += cf * d.variance / varr * (t - fp);
        }
    }
    if (!c.form.terms.empty()) {
        double varr = 0.0;
        for (const auto& [slot, cf] : c.form.terms) varr += cf * cf * scm.exogenous[slot].dist.variance;
        double fp = c.form.a;
        for (const auto& [slot, cf] : c.form.terms) {
            const auto& d = scm.exogenous[slot].dist;
            values[slot] = draw_normal(rng, d.mean, std::sqrt(d.variance));
            fp += cf * values[slot];
        }
        for (const auto& [slot, cf] : c.form.terms) {
            const auto& d = scm.exogenous[slot].dist;
            values[slot] += cf * d.variance / varr * (v - fp);
        }
    }
    return std::log(total);
}

}  // namespace causalmine::scm
