#include "causalmine/scm/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace causalmine::scm {

bool NoiseDistribution::degenerate() const {
    if (kind == Kind::Gaussian) return variance <= 0.0;
    int live = 0;
    for (double p : probabilities)
        if (p > 0.0) ++live;
    return live <= 1;
}

double NoiseDistribution::degenerate_value() const {
    if (kind == Kind::Gaussian) return mean;
    for (std::size_t k = 0; k < probabilities.size(); ++k)
        if (probabilities[k] > 0.0) return static_cast<double>(k);
    return 0.0;
}

void NoiseDistribution::validate(const std::string& owner) const {
    if (kind == Kind::Gaussian) {
        if (variance < 0.0) throw ValidationError("negative variance on " + owner);
        if (!std::isfinite(mean) || !std::isfinite(variance))
            throw ValidationError("non-finite Gaussian parameters on " + owner);
        return;
    }
    if (probabilities.empty()) throw ValidationError("empty categorical on " + owner);
    double sum = 0.0;
    for (double p : probabilities) {
        if (p < 0.0 || p > 1.0) throw ValidationError("categorical probability out of range on " + owner);
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("categorical probabilities do not sum to 1 on " + owner);
}

StructuralExpr StructuralExpr::constant(double v) {
    StructuralExpr e;
    e.op = Op::Const;
    e.value = v;
    return e;
}
StructuralExpr StructuralExpr::parent_ref(int index) {
    StructuralExpr e;
    e.op = Op::Parent;
    e.parent = index;
    return e;
}
StructuralExpr StructuralExpr::noise_ref() {
    StructuralExpr e;
    e.op = Op::Noise;
    return e;
}
StructuralExpr StructuralExpr::add(StructuralExpr lhs, StructuralExpr rhs) {
    StructuralExpr e;
    e.op = Op::Add;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
}
StructuralExpr StructuralExpr::mul(StructuralExpr lhs, StructuralExpr rhs) {
    StructuralExpr e;
    e.op = Op::Mul;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
}
StructuralExpr StructuralExpr::linear(std::vector<double> weights, double bias, double noise_coeff) {
    StructuralExpr e;
    e.op = Op::Linear;
    e.weights = std::move(weights);
    e.bias = bias;
    e.noise_coeff = noise_coeff;
    return e;
}
StructuralExpr StructuralExpr::gate(StructuralExpr cond, double threshold, StructuralExpr then_e,
                                    StructuralExpr else_e) {
    StructuralExpr e;
    e.op = Op::Gate;
    e.threshold = threshold;
    e.args.push_back(std::move(cond));
    e.args.push_back(std::move(then_e));
    e.args.push_back(std::move(else_e));
    return e;
}
StructuralExpr StructuralExpr::table(std::vector<TableRow> rows, double dflt) {
    StructuralExpr e;
    e.op = Op::Table;
    e.rows = std::move(rows);
    e.table_default = dflt;
    return e;
}

bool StructuralExpr::uses_noise() const {
    if (op == Op::Noise) return true;
    if (op == Op::Linear) return noise_coeff != 0.0;
    for (const auto& a : args)
        if (a.uses_noise()) return true;
    return false;
}

int StructuralExpr::max_parent_index() const {
    int m = -1;
    if (op == Op::Parent) m = parent;
    if (op == Op::Linear) m = static_cast<int>(weights.size()) - 1;
    if (op == Op::Table)
        for (const auto& r : rows) m = std::max(m, static_cast<int>(r.key.size()) - 1);
    for (const auto& a : args) m = std::max(m, a.max_parent_index());
    return m;
}

int Scm::exo_index(const std::string& name) const {
    for (std::size_t i = 0; i < exogenous.size(); ++i)
        if (exogenous[i].name == name) return static_cast<int>(i);
    return -1;
}

int Scm::endo_index(const std::string& name) const {
    for (std::size_t i = 0; i < endogenous.size(); ++i)
        if (endogenous[i].name == name) return static_cast<int>(i);
    return -1;
}

namespace {

void validate_expr(const StructuralExpr& e, const EndogenousVar& v) {
    switch (e.op) {
        case StructuralExpr::Op::Const:
            break;
        case StructuralExpr::Op::Parent:
            if (e.parent < 0 || e.parent >= static_cast<int>(v.parents.size()))
                throw ValidationError("parent index out of range in mechanism of " + v.name);
            break;
        case StructuralExpr::Op::Noise:
            break;
        case StructuralExpr::Op::Add:
        case StructuralExpr::Op::Mul:
            if (e.args.size() != 2) throw ValidationError("binary op arity in mechanism of " + v.name);
            break;
        case StructuralExpr::Op::Linear:
            // Weights cover a prefix of the declared parents, so structural
            // edits may append parents without touching inner mechanisms.
            if (e.weights.size() > v.parents.size())
                throw ValidationError("linear weight count > parent count on " + v.name);
            break;
        case StructuralExpr::Op::Gate:
            if (e.args.size() != 3) throw ValidationError("gate arity in mechanism of " + v.name);
            break;
        case StructuralExpr::Op::Table:
            for (const auto& r : e.rows) {
                if (r.key.size() > v.parents.size())
                    throw ValidationError("table key arity > parent count on " + v.name);
                if (r.key.size() != e.rows.front().key.size())
                    throw ValidationError("ragged table keys on " + v.name);
            }
            break;
    }
    for (const auto& a : e.args) validate_expr(a, v);
}

}  // namespace

void Scm::validate() {
    std::set<std::string> names;
    for (const auto& e : exogenous) {
        if (!names.insert(e.name).second) throw ValidationError("duplicate name " + e.name);
        e.dist.validate(e.name);
    }
    for (auto& v : endogenous) {
        if (!names.insert(v.name).second) throw ValidationError("duplicate name " + v.name);
    }
    // Auto-create missing noise variables so every endogenous variable has one.
    for (auto& v : endogenous) {
        if (v.noise.empty()) {
            std::string n = "u_" + v.name;
            while (names.count(n)) n += "_";
            names.insert(n);
            exogenous.push_back({n, NoiseDistribution::gaussian(0.0, 0.0)});
            v.noise = n;
        }
    }
    std::map<std::string, int> exo_consumers;
    for (const auto& v : endogenous) {
        if (exo_index(v.noise) < 0)
            throw ValidationError("noise " + v.noise + " of " + v.name + " is not exogenous");
        exo_consumers[v.noise]++;
        for (const auto& p : v.parents) {
            if (!has_var(p)) throw UnknownVariable("unknown parent " + p + " of " + v.name);
            if (p == v.name) throw ValidationError("self-parent on " + v.name);
            if (exo_index(p) >= 0) exo_consumers[p]++;
        }
        validate_expr(v.mechanism, v);
        if (v.mechanism.max_parent_index() >= static_cast<int>(v.parents.size()))
            throw ValidationError("mechanism references undeclared parent on " + v.name);
    }
    // Markovian structure: one consumer per exogenous variable. Confounding is
    // expressed through shared endogenous variables, never correlated noises.
    for (const auto& [name, count] : exo_consumers)
        if (count > 1) throw ValidationError("exogenous " + name + " consumed by more than one variable");
    for (const auto& n : {labels.state, labels.action, labels.observation, labels.reward, labels.confounder})
        for (const auto& s : n)
            if (!has_var(s)) throw UnknownVariable("label references unknown variable " + s);
    for (const auto& [s, nx] : labels.next_of) {
        if (endo_index(s) < 0 || endo_index(nx) < 0)
            throw UnknownVariable("next_of references unknown endogenous variable");
    }
    topo_order(*this);  // throws CycleDetected on cycles
}

std::vector<std::string> topo_order(const Scm& scm) {
    const auto n = scm.endogenous.size();
    std::vector<std::vector<int>> out(n);
    std::vector<int> indeg(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& p : scm.endogenous[i].parents) {
            int j = scm.endo_index(p);
            if (j >= 0) {
                out[j].push_back(static_cast<int>(i));
                indeg[i]++;
            }
        }
    }
    std::set<int> ready;  // ordered: declaration-order tie-break
    for (std::size_t i = 0; i < n; ++i)
        if (indeg[i] == 0) ready.insert(static_cast<int>(i));
    std::vector<std::string> order;
    order.reserve(n);
    while (!ready.empty()) {
        int i = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(scm.endogenous[i].name);
        for (int j : out[i])
            if (--indeg[j] == 0) ready.insert(j);
    }
    if (order.size() != n) {
        // Report one offending cycle: walk unprocessed parents until repeat.
        int start = -1;
        for (std::size_t i = 0; i < n; ++i)
            if (indeg[i] > 0) {
                start = static_cast<int>(i);
                break;
            }
        std::vector<int> path;
        std::set<int> seen;
        int cur = start;
        while (seen.insert(cur).second) {
            path.push_back(cur);
            for (const auto& p : scm.endogenous[cur].parents) {
                int j = scm.endo_index(p);
                if (j >= 0 && indeg[j] > 0) {
                    cur = j;
                    break;
                }
            }
        }
        std::ostringstream oss;
        oss << "cycle detected: ";
        bool emitting = false;
        for (int i : path) {
            if (i == cur) emitting = true;
            if (emitting) oss << scm.endogenous[i].name << " -> ";
        }
        oss << scm.endogenous[cur].name;
        throw CycleDetected(oss.str());
    }
    return order;
}

}  // namespace causalmine::scm
