#include "causalmine/scm/engine.hpp"

#include <algorithm>
#include <cmath>

namespace causalmine::scm {

namespace {
constexpr double kKeyTol = 1e-9;
}

double eval_expr(const StructuralExpr& e, std::span<const double> values,
                 std::span<const int> parent_slots, int noise_slot) {
    using Op = StructuralExpr::Op;
    switch (e.op) {
        case Op::Const:
            return e.value;
        case Op::Parent:
            return values[parent_slots[e.parent]];
        case Op::Noise:
            return values[noise_slot];
        case Op::Add:
            return eval_expr(e.args[0], values, parent_slots, noise_slot) +
                   eval_expr(e.args[1], values, parent_slots, noise_slot);
        case Op::Mul:
            return eval_expr(e.args[0], values, parent_slots, noise_slot) *
                   eval_expr(e.args[1], values, parent_slots, noise_slot);
        case Op::Linear: {
            double s = e.bias;
            for (std::size_t i = 0; i < e.weights.size(); ++i)
                s += e.weights[i] * values[parent_slots[i]];
            if (e.noise_coeff != 0.0) s += e.noise_coeff * values[noise_slot];
            return s;
        }
        case Op::Gate: {
            const double c = eval_expr(e.args[0], values, parent_slots, noise_slot);
            return c > e.threshold ? eval_expr(e.args[1], values, parent_slots, noise_slot)
                                   : eval_expr(e.args[2], values, parent_slots, noise_slot);
        }
        case Op::Table: {
            for (const auto& row : e.rows) {
                bool match = true;
                for (std::size_t i = 0; i < row.key.size() && match; ++i)
                    match = std::abs(row.key[i] - values[parent_slots[i]]) <= kKeyTol;
                if (match) return row.value;
            }
            return e.table_default;
        }
    }
    return 0.0;
}

CompiledScm::CompiledScm(Scm scm) : scm_(std::move(scm)) {
    scm_.validate();
    for (std::size_t i = 0; i < scm_.exogenous.size(); ++i)
        slot_by_name_[scm_.exogenous[i].name] = static_cast<int>(i);
    for (std::size_t i = 0; i < scm_.endogenous.size(); ++i)
        slot_by_name_[scm_.endogenous[i].name] = static_cast<int>(n_exo() + i);
    for (const auto& name : topo_order(scm_)) topo_.push_back(scm_.endo_index(name));
    parents_.resize(scm_.endogenous.size());
    noise_slot_.resize(scm_.endogenous.size());
    endo_consumers_.assign(scm_.endogenous.size(), 0);
    for (std::size_t i = 0; i < scm_.endogenous.size(); ++i) {
        const auto& v = scm_.endogenous[i];
        for (const auto& p : v.parents) {
            parents_[i].push_back(slot_by_name_.at(p));
            const int pe = scm_.endo_index(p);
            if (pe >= 0) endo_consumers_[pe]++;
        }
        noise_slot_[i] = slot_by_name_.at(v.noise);
    }
}

int CompiledScm::slot_of(const std::string& name) const {
    auto it = slot_by_name_.find(name);
    return it == slot_by_name_.end() ? -1 : it->second;
}

const std::string& CompiledScm::slot_name(int slot) const {
    if (slot < static_cast<int>(n_exo())) return scm_.exogenous[slot].name;
    return scm_.endogenous[slot - n_exo()].name;
}

void CompiledScm::draw_exogenous(std::span<double> values, Rng& rng) const {
    for (std::size_t i = 0; i < scm_.exogenous.size(); ++i) {
        const auto& d = scm_.exogenous[i].dist;
        if (d.kind == NoiseDistribution::Kind::Gaussian)
            values[i] = draw_normal(rng, d.mean, std::sqrt(std::max(0.0, d.variance)));
        else
            values[i] = static_cast<double>(draw_categorical(rng, d.probabilities));
    }
}

void CompiledScm::eval_endogenous(std::span<double> values, std::span<const int> forced) const {
    for (int i : topo_) {
        const int slot = endo_slot(i);
        if (std::find(forced.begin(), forced.end(), slot) != forced.end()) continue;
        values[slot] = eval_expr(scm_.endogenous[i].mechanism, values, parents_[i], noise_slot_[i]);
    }
}

double CompiledScm::eval_mechanism(int endo_index, std::span<const double> values) const {
    return eval_expr(scm_.endogenous[endo_index].mechanism, values, parents_[endo_index],
                     noise_slot_[endo_index]);
}

void CompiledScm::resolve_intervention(const Intervention& iv, std::vector<int>& slots,
                                       std::vector<double>& vals) const {
    slots.clear();
    vals.clear();
    for (const auto& [name, value] : iv.forced) {
        const int ei = scm_.endo_index(name);
        if (ei < 0) {
            if (scm_.exo_index(name) >= 0)
                throw UnknownVariable("intervention target " + name + " is exogenous");
            throw UnknownVariable("intervention target " + name + " is not declared");
        }
        slots.push_back(endo_slot(ei));
        vals.push_back(value);
    }
}

Assignment CompiledScm::sample(Rng& rng, const Intervention& intervention) const {
    std::vector<int> fslots;
    std::vector<double> fvals;
    resolve_intervention(intervention, fslots, fvals);
    std::vector<double> values(n_slots(), 0.0);
    draw_exogenous(values, rng);
    for (std::size_t k = 0; k < fslots.size(); ++k) values[fslots[k]] = fvals[k];
    eval_endogenous(values, fslots);
    Assignment out;
    for (std::size_t i = 0; i < n_slots(); ++i) out[slot_name(static_cast<int>(i))] = values[i];
    return out;
}

Assignment sample(const Scm& scm, Rng& rng, const Intervention& intervention) {
    return CompiledScm(scm).sample(rng, intervention);
}

}  // namespace causalmine::scm
