#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace causalmine::scm {

struct ScmError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CycleDetected : ScmError {
    using ScmError::ScmError;
};
struct UnknownVariable : ScmError {
    using ScmError::ScmError;
};
struct ValidationError : ScmError {
    using ScmError::ScmError;
};
struct DegenerateEvidence : ScmError {
    using ScmError::ScmError;
};

// Gaussian(mean, variance) or Categorical(probabilities over categories 0..K-1,
// drawn values are the category index as a real).
struct NoiseDistribution {
    enum class Kind { Gaussian, Categorical };
    Kind kind = Kind::Gaussian;
    double mean = 0.0;
    double variance = 0.0;
    std::vector<double> probabilities;

    static NoiseDistribution gaussian(double mean, double variance) {
        NoiseDistribution d;
        d.kind = Kind::Gaussian;
        d.mean = mean;
        d.variance = variance;
        return d;
    }
    static NoiseDistribution categorical(std::vector<double> probs) {
        NoiseDistribution d;
        d.kind = Kind::Categorical;
        d.probabilities = std::move(probs);
        return d;
    }
    // A distribution that always yields the same value: degenerate Gaussian,
    // or a single-spike categorical.
    bool degenerate() const;
    double degenerate_value() const;
    void validate(const std::string& owner) const;

    bool operator==(const NoiseDistribution&) const = default;
};

struct ExogenousVar {
    std::string name;
    NoiseDistribution dist;

    bool operator==(const ExogenousVar&) const = default;
};

// Expression tree for structural mechanisms. Parent(i) refers to the i-th
// declared parent of the owning endogenous variable; Noise refers to that
// variable's own exogenous noise input (same input at every textual
// occurrence).
struct StructuralExpr {
    enum class Op { Const, Parent, Noise, Add, Mul, Linear, Gate, Table };

    struct TableRow {
        std::vector<double> key;  // one entry per declared parent, in order
        double value = 0.0;
        bool operator==(const TableRow&) const = default;
    };

    Op op = Op::Const;
    double value = 0.0;                // Const
    int parent = -1;                   // Parent
    std::vector<double> weights;       // Linear, one per declared parent
    double bias = 0.0;                 // Linear
    double noise_coeff = 0.0;          // Linear
    double threshold = 0.0;            // Gate: args[0] > threshold ? args[1] : args[2]
    std::vector<StructuralExpr> args;  // Add/Mul: 2, Gate: 3
    std::vector<TableRow> rows;        // Table
    double table_default = 0.0;        // Table

    static StructuralExpr constant(double v);
    static StructuralExpr parent_ref(int index);
    static StructuralExpr noise_ref();
    static StructuralExpr add(StructuralExpr lhs, StructuralExpr rhs);
    static StructuralExpr mul(StructuralExpr lhs, StructuralExpr rhs);
    static StructuralExpr linear(std::vector<double> weights, double bias, double noise_coeff);
    static StructuralExpr gate(StructuralExpr cond, double threshold, StructuralExpr then_e,
                               StructuralExpr else_e);
    static StructuralExpr table(std::vector<TableRow> rows, double dflt);

    bool uses_noise() const;
    int max_parent_index() const;

    bool operator==(const StructuralExpr&) const = default;
};

struct EndogenousVar {
    std::string name;
    std::vector<std::string> parents;  // endogenous or exogenous names
    StructuralExpr mechanism;
    // Dedicated exogenous noise input. Filled in by Scm::validate() with a
    // degenerate Gaussian when omitted, so that every endogenous variable has
    // exactly one associated noise variable.
    std::string noise;

    bool operator==(const EndogenousVar&) const = default;
};

// Role tags used by the planner and the unroller. A variable may carry the
// confounder tag in addition to a functional role (an unobserved state
// variable that confounds action and outcome).
struct Labels {
    std::vector<std::string> state;
    std::vector<std::string> action;
    std::vector<std::string> observation;
    std::vector<std::string> reward;
    std::vector<std::string> confounder;
    std::map<std::string, std::string> next_of;  // state var -> its next-state var

    bool operator==(const Labels&) const = default;
};

struct Scm {
    std::vector<ExogenousVar> exogenous;
    std::vector<EndogenousVar> endogenous;
    Labels labels;

    // Structural validation: unique names, resolvable parents, acyclic
    // endogenous graph, one noise per endogenous variable (auto-created as
    // "u_<name>" ~ Gaussian(0,0) when omitted), each exogenous variable
    // consumed by at most one endogenous variable.
    void validate();

    int exo_index(const std::string& name) const;
    int endo_index(const std::string& name) const;
    bool has_var(const std::string& name) const { return exo_index(name) >= 0 || endo_index(name) >= 0; }

    bool operator==(const Scm&) const = default;
};

// A realization of (a subset of) U ∪ V. Discrete values are encoded as
// integers-as-reals.
using Assignment = std::map<std::string, double>;

// do(): forced values for endogenous variables.
struct Intervention {
    std::map<std::string, double> forced;

    Intervention() = default;
    Intervention(std::initializer_list<std::pair<const std::string, double>> init) : forced(init) {}
    bool empty() const { return forced.empty(); }
};

// Deterministic topological order over endogenous variables (declaration-order
// tie-break). Throws CycleDetected naming one offending cycle.
std::vector<std::string> topo_order(const Scm& scm);

}  // namespace causalmine::scm
