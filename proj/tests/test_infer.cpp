#include <doctest.h>

#include <cmath>

#include "causalmine/scm/infer.hpp"
#include "causalmine/util/math.hpp"
#include "helpers.hpp"

using namespace causalmine;
using namespace testutil;
namespace cs = causalmine::scm;

namespace {

// Independent closed-form oracle for linear-Gaussian SCMs: propagate affine
// forms over the noise vector, then evaluate the multivariate normal density
// of the evidence subset via Cholesky. Mechanisms must be Linear.
struct MvnOracle {
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<std::vector<double>> cov;

    static MvnOracle build(const cs::Scm& m) {
        const int ne = static_cast<int>(m.exogenous.size());
        const int nv = static_cast<int>(m.endogenous.size());
        std::vector<std::vector<double>> a(nv, std::vector<double>(ne, 0.0));
        std::vector<double> b(nv, 0.0);
        MvnOracle o;
        for (int i = 0; i < nv; ++i) {
            const auto& v = m.endogenous[i];
            REQUIRE(v.mechanism.op == cs::StructuralExpr::Op::Linear);
            b[i] = v.mechanism.bias;
            for (std::size_t p = 0; p < v.parents.size(); ++p) {
                const int pj = m.endo_index(v.parents[p]);
                REQUIRE(pj >= 0);
                for (int k = 0; k < ne; ++k) a[i][k] += v.mechanism.weights[p] * a[pj][k];
                b[i] += v.mechanism.weights[p] * b[pj];
            }
            const int ui = m.exo_index(v.noise);
            a[i][ui] += v.mechanism.noise_coeff;
            o.names.push_back(v.name);
        }
        o.mean.assign(nv, 0.0);
        o.cov.assign(nv, std::vector<double>(nv, 0.0));
        for (int i = 0; i < nv; ++i) {
            o.mean[i] = b[i];
            for (int k = 0; k < ne; ++k) o.mean[i] += a[i][k] * m.exogenous[k].dist.mean;
            for (int j = 0; j < nv; ++j)
                for (int k = 0; k < ne; ++k)
                    o.cov[i][j] += a[i][k] * a[j][k] * m.exogenous[k].dist.variance;
        }
        return o;
    }

    double log_density(const cs::Assignment& evidence) const {
        std::vector<int> idx;
        std::vector<double> y;
        for (const auto& [name, v] : evidence) {
            for (std::size_t i = 0; i < names.size(); ++i)
                if (names[i] == name) idx.push_back(static_cast<int>(i));
            y.push_back(v);
        }
        const int k = static_cast<int>(idx.size());
        std::vector<std::vector<double>> s(k, std::vector<double>(k));
        std::vector<double> d(k);
        for (int i = 0; i < k; ++i) {
            d[i] = y[i] - mean[idx[i]];
            for (int j = 0; j < k; ++j) s[i][j] = cov[idx[i]][idx[j]];
        }
        // Cholesky s = L L^T
        std::vector<std::vector<double>> L(k, std::vector<double>(k, 0.0));
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j <= i; ++j) {
                double sum = s[i][j];
                for (int p = 0; p < j; ++p) sum -= L[i][p] * L[j][p];
                if (i == j) {
                    REQUIRE(sum > 0.0);
                    L[i][i] = std::sqrt(sum);
                } else {
                    L[i][j] = sum / L[j][j];
                }
            }
        }
        std::vector<double> z(k);
        double logdet = 0.0;
        for (int i = 0; i < k; ++i) {
            double sum = d[i];
            for (int p = 0; p < i; ++p) sum -= L[i][p] * z[p];
            z[i] = sum / L[i][i];
            logdet += 2.0 * std::log(L[i][i]);
        }
        double quad = 0.0;
        for (int i = 0; i < k; ++i) quad += z[i] * z[i];
        return -0.5 * (quad + logdet + k * std::log(2.0 * M_PI));
    }
};

}  // namespace

TEST_CASE("log-likelihood: standard normal at its mean, closed form") {
    cs::Scm m;
    m.exogenous = {gauss("u1", 0.0, 1.0)};
    m.endogenous = {endo("v1", {}, X::noise_ref(), "u1")};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(1);
    auto r = cs::log_likelihood_stats(c, {{"v1", 0.0}}, 100, rng);
    CHECK(r.exact);
    CHECK(r.log_prob == doctest::Approx(-0.9189385332046727).epsilon(1e-9));
}

TEST_CASE("log-likelihood: shifted case is symmetric") {
    cs::Scm m;
    m.exogenous = {gauss("u1", 1.0, 1.0)};
    m.endogenous = {endo("v1", {}, X::noise_ref(), "u1")};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(1);
    auto r = cs::log_likelihood_stats(c, {{"v1", 1.0}}, 100, rng);
    CHECK(r.exact);
    CHECK(r.log_prob == doctest::Approx(-0.9189385332046727).epsilon(1e-9));
}

TEST_CASE("log-likelihood: contradicting a deterministic mechanism is -inf") {
    cs::Scm m;
    m.endogenous = {endo("v1", {}, X::constant(5.0))};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(1);
    CHECK(cs::log_likelihood(c, {{"v1", 4.0}}, 100, rng) == -std::numeric_limits<double>::infinity());
    CHECK(cs::log_likelihood(c, {{"v1", 5.0}}, 100, rng) == doctest::Approx(0.0));
}

TEST_CASE("log-likelihood: unknown evidence variable throws") {
    auto m = shifted_chain();
    cs::CompiledScm c(m);
    Rng rng(1);
    CHECK_THROWS_AS(cs::log_likelihood(c, {{"bogus", 1.0}}, 10, rng), cs::UnknownVariable);
    CHECK_THROWS_AS(cs::log_likelihood(c, {{"u1", 1.0}}, 10, rng), cs::UnknownVariable);
}

TEST_CASE("log-likelihood: latent chain is marginalized in closed form") {
    // v1 = u1, v2 = v1 + u2, evidence on v2 only: marginal is N(0, 2).
    cs::Scm m;
    m.exogenous = {gauss("u1", 0.0, 1.0), gauss("u2", 0.0, 1.0)};
    m.endogenous = {endo("v1", {}, X::linear({}, 0.0, 1.0), "u1"),
                    endo("v2", {"v1"}, X::linear({1.0}, 0.0, 1.0), "u2")};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(1);
    auto r = cs::log_likelihood_stats(c, {{"v2", 1.0}}, 10, rng);
    CHECK(r.exact);
    CHECK(r.log_prob == doctest::Approx(log_normal_pdf(1.0, 0.0, 2.0)).epsilon(1e-12));
}

TEST_CASE("log-likelihood: probit gate over Gaussian condition, closed form") {
    // active ~ Bernoulli(0.5); drift = 1[turb + (active ? w : 0) > 1.645]
    cs::Scm m;
    m.exogenous = {cat("u_active", {0.5, 0.5}), gauss("w", 2.0, 0.25), gauss("turb", 0.0, 1.0)};
    m.endogenous = {
        endo("active", {}, X::noise_ref(), "u_active"),
        endo("drift", {"active", "w"},
             X::gate(X::add(X::noise_ref(), X::gate(X::parent_ref(0), 0.5, X::parent_ref(1), X::constant(0.0))),
                     1.645, X::constant(1.0), X::constant(0.0)),
             "turb"),
    };
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(1);
    const double p_drift = 1.0 - normal_cdf((1.645 - 2.0) / std::sqrt(1.25));
    auto r = cs::log_likelihood_stats(c, {{"active", 1.0}, {"drift", 1.0}}, 10, rng);
    CHECK(r.exact);
    CHECK(r.log_prob == doctest::Approx(std::log(0.5 * p_drift)).epsilon(1e-9));
    auto r0 = cs::log_likelihood_stats(c, {{"active", 0.0}, {"drift", 1.0}}, 10, rng);
    CHECK(r0.exact);
    CHECK(r0.log_prob == doctest::Approx(std::log(0.5 * (1.0 - normal_cdf(1.645)))).epsilon(1e-9));
}

TEST_CASE("monte carlo consistency against the multivariate normal oracle") {
    // Diamond: v0 -> v1, v0 -> v2 forces the sampling path when v0 is latent.
    Rng meta(42);
    int mc_paths = 0;
    for (int rep = 0; rep < 25; ++rep) {
        auto m = random_linear_gaussian(meta, 6);
        auto oracle = MvnOracle::build(m);
        // Evidence on a suffix of the variables (possibly partial).
        cs::Assignment ev;
        std::uniform_int_distribution<int> keep(0, 1);
        cs::CompiledScm c(m);
        Rng vals(rep);
        auto full = c.sample(vals);
        for (const auto& v : m.endogenous)
            if (keep(meta)) ev[v.name] = full.at(v.name);
        if (ev.empty()) ev[m.endogenous.back().name] = full.at(m.endogenous.back().name);
        const double truth = oracle.log_density(ev);
        for (std::size_t n : {std::size_t{1000}, std::size_t{10000}}) {
            Rng rng(1000 + rep);
            auto r = cs::log_likelihood_stats(c, ev, n, rng);
            if (r.exact) {
                CHECK(r.log_prob == doctest::Approx(truth).epsilon(1e-9));
            } else {
                ++mc_paths;
                CHECK(std::abs(r.log_prob - truth) <= 3.0 * r.se_log + 1e-12);
            }
        }
    }
    CHECK(mc_paths > 0);  // the suite must exercise the sampling estimator
}

TEST_CASE("log-likelihood: sampling path is deterministic given the seed") {
    cs::Scm m;
    m.exogenous = {gauss("u0", 0.0, 1.0), gauss("u1", 0.0, 1.0), gauss("u2", 0.0, 1.0)};
    m.endogenous = {endo("v0", {}, X::linear({}, 0.0, 1.0), "u0"),
                    endo("v1", {"v0"}, X::linear({1.0}, 0.0, 1.0), "u1"),
                    endo("v2", {"v0"}, X::linear({-1.0}, 0.5, 1.0), "u2")};
    m.validate();
    cs::CompiledScm c(m);
    cs::Assignment ev{{"v1", 0.3}, {"v2", -0.2}};
    Rng r1(7), r2(7);
    auto a = cs::log_likelihood_stats(c, ev, 500, r1);
    auto b = cs::log_likelihood_stats(c, ev, 500, r2);
    CHECK_FALSE(a.exact);
    CHECK(a.log_prob == b.log_prob);
}

TEST_CASE("kernel fallback covers mechanisms outside the closed-form family") {
    // v = u^2 with u ~ N(0,1): chi-squared(1); density at 1 is phi(1).
    cs::Scm m;
    m.exogenous = {gauss("u", 0.0, 1.0)};
    m.endogenous = {endo("v", {}, X::mul(X::noise_ref(), X::noise_ref()), "u")};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(11);
    auto r = cs::log_likelihood_stats(c, {{"v", 1.0}}, 40000, rng);
    CHECK_FALSE(r.exact);
    // Kernel-smoothed estimate: generous band around the true 0.2420.
    CHECK(std::exp(r.log_prob) > 0.15);
    CHECK(std::exp(r.log_prob) < 0.35);
}

TEST_CASE("abduct: linear inversion yields a single exact particle") {
    cs::Scm m;
    m.exogenous = {gauss("u1", 0.0, 1.0)};
    m.endogenous = {endo("v1", {}, X::linear({}, 0.0, 2.0), "u1")};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(1);
    auto p = cs::abduct(c, {{"v1", 4.0}}, 50, rng);
    CHECK(p.exact);
    REQUIRE(p.particles.size() == 1);
    CHECK(p.particles[0].weight == doctest::Approx(1.0));
    CHECK(p.particles[0].noise.at("u1") == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("abduct: sequential inversion over a chain") {
    cs::Scm m;
    m.exogenous = {gauss("u1", 0.0, 1.0), gauss("u2", 0.0, 1.0)};
    m.endogenous = {endo("v1", {}, X::linear({}, 0.0, 1.0), "u1"),
                    endo("v2", {"v1"}, X::linear({1.0}, 0.0, 1.0), "u2")};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(1);
    auto p = cs::abduct(c, {{"v2", 3.0}, {"v1", 1.0}}, 50, rng);
    CHECK(p.exact);
    REQUIRE(p.particles.size() == 1);
    CHECK(p.particles[0].noise.at("u1") == doctest::Approx(1.0));
    CHECK(p.particles[0].noise.at("u2") == doctest::Approx(2.0));
}

TEST_CASE("abduct: empty evidence reproduces the prior") {
    cs::Scm m;
    m.exogenous = {gauss("u1", 1.5, 4.0)};
    m.endogenous = {endo("v1", {}, X::noise_ref(), "u1")};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(123);
    auto p = cs::abduct(c, {}, 20000, rng);
    CHECK_FALSE(p.exact);
    double wsum = 0.0, mean = 0.0, m2 = 0.0;
    for (const auto& part : p.particles) {
        wsum += part.weight;
        mean += part.weight * part.noise.at("u1");
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
    for (const auto& part : p.particles) {
        const double d = part.noise.at("u1") - mean;
        m2 += part.weight * d * d;
    }
    CHECK(mean == doctest::Approx(1.5).epsilon(0.05));
    CHECK(m2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("abduct: impossible evidence raises DegenerateEvidence") {
    cs::Scm m;
    m.exogenous = {cat("u", {1.0, 0.0})};
    m.endogenous = {endo("v", {}, X::noise_ref(), "u")};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(1);
    CHECK_THROWS_AS(cs::abduct(c, {{"v", 1.0}}, 100, rng), cs::DegenerateEvidence);
}

TEST_CASE("abduct: weights normalize on the sampling path") {
    cs::Scm m;
    m.exogenous = {gauss("u0", 0.0, 1.0), gauss("u1", 0.0, 1.0), gauss("u2", 0.0, 1.0)};
    m.endogenous = {endo("v0", {}, X::linear({}, 0.0, 1.0), "u0"),
                    endo("v1", {"v0"}, X::linear({1.0}, 0.0, 1.0), "u1"),
                    endo("v2", {"v0"}, X::linear({1.0}, 0.0, 1.0), "u2")};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(5);
    auto p = cs::abduct(c, {{"v1", 1.0}, {"v2", -1.0}}, 500, rng);
    CHECK_FALSE(p.exact);
    double wsum = 0.0;
    for (const auto& part : p.particles) wsum += part.weight;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
    // Posterior mean of u0 given v1=1, v2=-1 is (1 + -1)/3 = 0.
    double mean = 0.0;
    for (const auto& part : p.particles) mean += part.weight * part.noise.at("u0");
    CHECK(mean == doctest::Approx(0.0).epsilon(0.15));
}

TEST_CASE("counterfactual: severing the abducted cause") {
    auto m = shifted_chain();
    cs::CompiledScm c(m);
    Rng rng(1);
    auto s = cs::counterfactual(c, {{"v2", 5.0}}, cs::Intervention{{"v1", 0.0}}, "v2", 100, rng);
    CHECK(s.exact);
    CHECK(s.mean == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(s.variance == doctest::Approx(0.0));
    REQUIRE(s.table.has_value());
    CHECK(s.table->at(3.0) == doctest::Approx(1.0));
}

TEST_CASE("counterfactual: no intervention reproduces the factual world") {
    auto m = shifted_chain();
    cs::CompiledScm c(m);
    Rng rng(1);
    auto s = cs::counterfactual(c, {{"v2", 5.0}}, {}, "v2", 100, rng);
    CHECK(s.mean == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(s.variance == doctest::Approx(0.0));
}

TEST_CASE("counterfactual: deterministic identity table mechanism") {
    cs::Scm m;
    m.exogenous = {cat("ux", {0.5, 0.5})};
    m.endogenous = {endo("x", {}, X::noise_ref(), "ux"),
                    endo("y", {"x"}, X::table({{{0.0}, 0.0}, {{1.0}, 1.0}}, 0.0))};
    m.validate();
    cs::CompiledScm c(m);
    Rng rng(1);
    auto s = cs::counterfactual(c, {{"x", 1.0}, {"y", 1.0}}, cs::Intervention{{"x", 0.0}}, "y", 100, rng);
    REQUIRE(s.table.has_value());
    CHECK(s.table->at(0.0) == doctest::Approx(1.0));
}

TEST_CASE("counterfactual: consistency on random fully observed linear models") {
    Rng meta(77);
    for (int rep = 0; rep < 10; ++rep) {
        auto m = random_linear_gaussian(meta, 5);
        cs::CompiledScm c(m);
        Rng vals(500 + rep);
        auto full = c.sample(vals);
        cs::Assignment ev;
        for (const auto& v : m.endogenous) ev[v.name] = full.at(v.name);
        const auto& q = m.endogenous.back().name;
        Rng rng(rep);
        auto s = cs::counterfactual(c, ev, {}, q, 10, rng);
        CHECK(s.exact);
        CHECK(s.mean == doctest::Approx(ev.at(q)).epsilon(1e-9));
        CHECK(s.variance == doctest::Approx(0.0));
    }
}
