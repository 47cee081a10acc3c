#include "causalmine/planner/observational.hpp"

#include <algorithm>
#include <stdexcept>

namespace causalmine::planner {

ObservationalModel fit_observational(const std::vector<SasSample>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("fit_observational: empty dataset");
    ObservationalModel m;
    m.n_records = static_cast<int>(dataset.size());
    std::map<StateKey, bool> seen;
    for (const auto& r : dataset) {
        seen[r.s] = true;
        seen[r.s_next] = true;
        m.counts[{r.s, r.action}][r.s_next]++;
        m.row_totals[{r.s, r.action}]++;
        m.action_counts[r.action]++;
    }
    for (const auto& [k, v] : seen) m.support.push_back(k);
    return m;
}

ObservationalModel::Row ObservationalModel::row(const StateKey& s, int action) const {
    Row out;
    auto tot = row_totals.find({s, action});
    if (tot == row_totals.end()) return out;  // unsupported
    out.supported = true;
    const auto& c = counts.at({s, action});
    const double denom = tot->second + static_cast<double>(support.size());
    for (const auto& sk : support) {
        auto it = c.find(sk);
        const int n = it == c.end() ? 0 : it->second;
        out.probs.push_back({sk, (n + 1.0) / denom});
    }
    return out;
}

double ObservationalModel::action_freq(int action) const {
    auto it = action_counts.find(action);
    return it == action_counts.end() ? 0.0 : double(it->second) / double(n_records);
}

}  // namespace causalmine::planner
