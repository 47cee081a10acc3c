#pragma once

#include <span>
#include <string>
#include <vector>

#include "causalmine/scm/types.hpp"
#include "causalmine/util/rng.hpp"

namespace causalmine::scm {

// Index-resolved form of an Scm for repeated evaluation. Values live in one
// flat buffer: exogenous variables at slots [0, n_exo), endogenous at
// [n_exo, n_exo + n_endo). Immutable after construction; safe for concurrent
// reads (each evaluation owns its buffer).
class CompiledScm {
  public:
    explicit CompiledScm(Scm scm);

    const Scm& model() const { return scm_; }
    std::size_t n_exo() const { return scm_.exogenous.size(); }
    std::size_t n_endo() const { return scm_.endogenous.size(); }
    std::size_t n_slots() const { return n_exo() + n_endo(); }

    int slot_of(const std::string& name) const;  // -1 if unknown
    int exo_slot(int exo_index) const { return exo_index; }
    int endo_slot(int endo_index) const { return static_cast<int>(n_exo()) + endo_index; }
    const std::string& slot_name(int slot) const;
    bool slot_is_endo(int slot) const { return slot >= static_cast<int>(n_exo()); }

    // Evaluation order over endogenous indices.
    const std::vector<int>& topo() const { return topo_; }
    // Parent slots and noise slot per endogenous index.
    const std::vector<int>& parent_slots(int endo_index) const { return parents_[endo_index]; }
    int noise_slot(int endo_index) const { return noise_slot_[endo_index]; }
    // Number of endogenous variables that list this one as a parent.
    int endo_consumer_count(int endo_index) const { return endo_consumers_[endo_index]; }

    // Draw all exogenous values into values[0..n_exo).
    void draw_exogenous(std::span<double> values, Rng& rng) const;
    // Evaluate all endogenous values in topological order. Slots whose index
    // appears in `forced_endo_slots` keep their pre-set value (graph
    // mutilation: mechanism and noise are ignored for them).
    void eval_endogenous(std::span<double> values, std::span<const int> forced_endo_slots = {}) const;
    // Evaluate one endogenous variable's mechanism against a value buffer.
    double eval_mechanism(int endo_index, std::span<const double> values) const;

    // Full forward sample. Throws UnknownVariable for bad intervention targets.
    Assignment sample(Rng& rng, const Intervention& intervention = {}) const;

    // Resolve an Intervention to forced endogenous slots + values.
    void resolve_intervention(const Intervention& iv, std::vector<int>& slots,
                              std::vector<double>& vals) const;

  private:
    Scm scm_;
    std::map<std::string, int> slot_by_name_;
    std::vector<int> topo_;                  // endogenous indices in eval order
    std::vector<std::vector<int>> parents_;  // per endogenous index
    std::vector<int> noise_slot_;            // per endogenous index
    std::vector<int> endo_consumers_;        // per endogenous index
};

double eval_expr(const StructuralExpr& e, std::span<const double> values,
                 std::span<const int> parent_slots, int noise_slot);

// Convenience wrappers operating on a plain Scm (compile once per call; use
// CompiledScm directly in hot paths).
Assignment sample(const Scm& scm, Rng& rng, const Intervention& intervention = {});

}  // namespace causalmine::scm
