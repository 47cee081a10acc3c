#pragma once

// Shared test fixtures: small hand-built SCMs.

#include <string>
#include <vector>

#include "causalmine/scm/engine.hpp"
#include "causalmine/scm/types.hpp"

namespace testutil {

using causalmine::scm::EndogenousVar;
using causalmine::scm::ExogenousVar;
using causalmine::scm::NoiseDistribution;
using causalmine::scm::Scm;
using X = causalmine::scm::StructuralExpr;

inline ExogenousVar gauss(std::string name, double mean, double var) {
    return {std::move(name), NoiseDistribution::gaussian(mean, var)};
}

inline ExogenousVar cat(std::string name, std::vector<double> probs) {
    return {std::move(name), NoiseDistribution::categorical(std::move(probs))};
}

inline EndogenousVar endo(std::string name, std::vector<std::string> parents, X mech,
                          std::string noise = "") {
    EndogenousVar v;
    v.name = std::move(name);
    v.parents = std::move(parents);
    v.mechanism = std::move(mech);
    v.noise = std::move(noise);
    return v;
}

// V1 = U1 (unit Gaussian), V2 = V1 + 3.
inline Scm shifted_chain() {
    Scm m;
    m.exogenous = {gauss("u1", 0.0, 1.0)};
    m.endogenous = {endo("v1", {}, X::noise_ref(), "u1"),
                    endo("v2", {"v1"}, X::add(X::parent_ref(0), X::constant(3.0)))};
    m.validate();
    return m;
}

// Random linear-Gaussian SCM over a DAG with <= max_nodes nodes; each node
// v_i = bias + sum(w_j * parent_j) + c * u_i.
inline Scm random_linear_gaussian(causalmine::Rng& rng, int max_nodes) {
    std::uniform_int_distribution<int> nd(2, max_nodes);
    std::uniform_real_distribution<double> coef(-1.5, 1.5);
    std::uniform_real_distribution<double> var(0.2, 2.0);
    std::uniform_real_distribution<double> pick(0.0, 1.0);
    const int n = nd(rng);
    Scm m;
    for (int i = 0; i < n; ++i) {
        m.exogenous.push_back(gauss("u" + std::to_string(i), coef(rng), var(rng)));
        std::vector<std::string> parents;
        std::vector<double> weights;
        for (int j = 0; j < i; ++j) {
            if (pick(rng) < 0.5) {
                parents.push_back("v" + std::to_string(j));
                weights.push_back(coef(rng));
            }
        }
        double nc = coef(rng);
        if (std::abs(nc) < 0.3) nc = nc < 0 ? -0.3 : 0.3;  // keep mechanisms invertible
        m.endogenous.push_back(endo("v" + std::to_string(i), std::move(parents),
                                    X::linear(std::move(weights), coef(rng), nc),
                                    "u" + std::to_string(i)));
    }
    m.validate();
    return m;
}

}  // namespace testutil
