#pragma once

#include <map>
#include <vector>

namespace causalmine::planner {

// Non-causal baseline: empirical conditional transition tables estimated from
// logged pilot data. Hidden confounders (the wind) bias these conditionals
// relative to the interventional kernel; the contrast is the point.
using StateKey = std::vector<double>;

struct SasSample {
    StateKey s;
    int action = 0;
    StateKey s_next;
};

struct ObservationalModel {
    struct Row {
        bool supported = false;
        std::vector<std::pair<StateKey, double>> probs;  // sums to 1 over the support
    };

    std::vector<StateKey> support;  // distinct states seen as s or s'
    std::map<std::pair<StateKey, int>, std::map<StateKey, int>> counts;
    std::map<std::pair<StateKey, int>, int> row_totals;
    std::map<int, int> action_counts;
    int n_records = 0;

    // Maximum-likelihood conditional with add-one smoothing over the support.
    Row row(const StateKey& s, int action) const;
    double action_freq(int action) const;
};

ObservationalModel fit_observational(const std::vector<SasSample>& dataset);

}  // namespace causalmine::planner
