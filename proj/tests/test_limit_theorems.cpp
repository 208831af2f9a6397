#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ctoqw/builtin_models.hpp"
#include "ctoqw/limit_theorems.hpp"
#include "ctoqw/spectral.hpp"

using namespace ctoqw;

namespace {

CMatrix mat2(double a, double b, double c, double d)
{
    CMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

// sup_u (u x - lambda (e^u - 1) - mu (e^-u - 1)) for the two-sided classical walk.
double two_sided_rate(double lambda, double mu, double x)
{
    const double u = std::log((x + std::sqrt(x * x + 4.0 * lambda * mu)) / (2.0 * lambda));
    return x * u - lambda * (std::exp(u) - 1.0) - mu * (std::exp(-u) - 1.0);
}

double rate_at(const DeformationCurve& curve, double x)
{
    const std::vector<double> xv{x};
    return rate_function(curve, xv).value;
}

// P(N >= k) for N ~ Poisson(mean).
double poisson_tail(int k, double mean)
{
    double tail = 0.0;
    for (int j = k; j < k + 400; ++j) tail += std::exp(-mean + j * std::log(mean) - std::lgamma(j + 1.0));
    return tail;
}

} // namespace

TEST_CASE("central limit data of the first example")
{
    const CltReport r = clt_report(builtin::example(1));
    CHECK((r.rho_inv - CMatrix::Identity(2, 2) / 2.0).norm() < 1e-10);
    CHECK(std::abs(r.m(0)) < 1e-12);
    CHECK((r.j[0] - mat2(-5, 2, 2, 5) / 6.0).norm() < 1e-10);
    CHECK(std::abs(r.v(0, 0) - 8.0 / 9.0) < 1e-10);
}

TEST_CASE("central limit data of the second example")
{
    const CltReport r = clt_report(builtin::example(2));
    CHECK((r.rho_inv - mat2(0.4, 0, 0, 0.6)).norm() < 1e-10);
    CHECK(std::abs(r.m(0) + 0.1) < 1e-10);
    CHECK((r.j[0] - mat2(-1, 0, 0, 1) / 10.0).norm() < 1e-10);
    CHECK(std::abs(r.v(0, 0) - 73.0 / 125.0) < 1e-10);
}

TEST_CASE("central limit data of the planar example")
{
    const CltReport r = clt_report(builtin::example(3));
    CHECK((r.rho_inv - mat2(7.0 / 11, 0, 0, 4.0 / 11)).norm() < 1e-9);
    CHECK(std::abs(r.m(0) + 1.0 / 22) < 1e-9);
    CHECK(std::abs(r.m(1) + 5.0 / 22) < 1e-9);
    CHECK((r.j[0] - 4.0 / 33 * mat2(-5, 2, 2, 5)).norm() < 1e-9);
    CHECK((r.j[1] - 3.0 / 77 * mat2(-13, -8, -8, 13)).norm() < 1e-9);
    RMatrix v(2, 2);
    v << 10651, -414, -414, 14661;
    v /= 23958.0;
    CHECK((r.v - v).norm() < 1e-9);
}

TEST_CASE("Poisson solutions are trace-zero Hermitian with small residual")
{
    for (int k : {1, 2, 3}) {
        const CltReport r = clt_report(builtin::example(k));
        for (std::size_t q = 0; q < r.j.size(); ++q) {
            CHECK(r.residuals[q] <= 1e-9);
            CHECK(std::abs(r.j[q].trace()) < 1e-13);
            CHECK(is_hermitian(r.j[q], 1e-14));
        }
    }
}

TEST_CASE("Poisson solution is linear in the direction")
{
    const WalkModel m = builtin::example(3);
    const CltReport r = clt_report(m);
    std::mt19937_64 gen(8);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<double> u{g(gen), g(gen)};
        const CMatrix ju = solve_poisson_direction(m, r.m, u);
        CHECK((ju - (u[0] * r.j[0] + u[1] * r.j[1])).norm() < 1e-10);
        const Eigen::Vector2d uv(u[0], u[1]);
        CHECK(uv.dot(r.v * uv) >= 0.0);
    }
    CHECK((r.v - r.v.transpose()).norm() < 1e-15);
}

TEST_CASE("random models: variance agrees with the curvature of the eigenvalue curve")
{
    std::mt19937_64 gen(21);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 3; ++trial) {
        const int d = 1 + trial % 2;
        const Index n = 2 + trial;
        std::vector<CMatrix> jumps;
        for (int r = 0; r < 2 * d; ++r) {
            CMatrix j(n, n);
            for (Index a = 0; a < n; ++a) {
                for (Index b = 0; b < n; ++b) j(a, b) = 0.5 * Complex(g(gen), g(gen));
            }
            jumps.push_back(j);
        }
        CMatrix h(n, n);
        for (Index a = 0; a < n; ++a) {
            for (Index b = 0; b < n; ++b) h(a, b) = Complex(g(gen), g(gen));
        }
        const WalkModel m = WalkModel::from_hamiltonian(d, hermitian_part(h), jumps);
        const CltReport r = clt_report(m);
        const DeformationCurve curve(m);
        const std::vector<double> zero(static_cast<std::size_t>(d), 0.0);
        CHECK((curve.gradient(zero) - r.m).norm() < 1e-6);
        CHECK((curve.hessian(zero) - r.v).norm() < 1e-4);
    }
}

TEST_CASE("scaling the jump operators rescales time")
{
    const WalkModel base = builtin::example(3);
    const double c = 1.7;
    std::vector<CMatrix> jumps;
    for (const auto& j : base.jumps()) jumps.push_back(c * j);
    const WalkModel scaled = WalkModel::from_drift(2, c * c * base.d0(), jumps);
    const CltReport a = clt_report(base);
    const CltReport b = clt_report(scaled);
    CHECK((a.rho_inv - b.rho_inv).norm() < 1e-10);
    CHECK((b.m - c * c * a.m).norm() < 1e-10);
    CHECK((a.j[0] - b.j[0]).norm() < 1e-10);
    CHECK((a.j[1] - b.j[1]).norm() < 1e-10);
    CHECK((b.v / (c * c) - a.v).norm() < 1e-10);
}

TEST_CASE("rate function of the two-sided classical walk")
{
    for (auto [lambda, mu] : {std::pair{1.0, 2.0}, std::pair{1.0, 0.5}}) {
        const DeformationCurve curve(builtin::classical_walk(lambda, mu));
        for (double x : {-1.0, 0.5, 2.0}) {
            CHECK(std::abs(rate_at(curve, x) - two_sided_rate(lambda, mu, x)) < 1e-8);
        }
        CHECK(std::abs(rate_at(curve, lambda - mu)) < 1e-12);
    }
}

TEST_CASE("rate function of the pure birth chain and its effective domain")
{
    const DeformationCurve curve(builtin::classical_walk(1.0, 0.0));
    CHECK(std::abs(rate_at(curve, 1.5) - (1.5 * std::log(1.5) - 0.5)) < 1e-8);
    CHECK(std::abs(rate_at(curve, 0.3) - (0.3 * std::log(0.3) + 0.7)) < 1e-8);
    const std::vector<double> x{-0.5};
    const RateValue v = rate_function(curve, x);
    CHECK(std::isinf(v.value));
    CHECK(v.value > 0.0);
    CHECK_FALSE(v.u_star);
}

TEST_CASE("bisection fallback agrees with the Newton ascent")
{
    const DeformationCurve curve(builtin::example(2));
    RateOptions no_newton;
    no_newton.max_iterations = 0;
    for (double x : {-0.9, -0.3, 0.4}) {
        const std::vector<double> xv{x};
        const RateValue a = rate_function(curve, xv);
        const RateValue b = rate_function(curve, xv, no_newton);
        CHECK(a.converged);
        CHECK(b.converged);
        CHECK(std::abs(a.value - b.value) < 1e-10);
    }
}

TEST_CASE("rate function vanishes at the drift, is nonnegative and convex")
{
    for (int k : {1, 2, 3}) {
        const WalkModel m = builtin::example(k);
        const DeformationCurve curve(m);
        const CltReport r = clt_report(m);
        const auto d = static_cast<std::size_t>(m.lattice_dim());
        std::vector<double> center(r.m.data(), r.m.data() + d);
        CHECK(std::abs(rate_function(curve, center).value) <= 1e-8);
        for (std::size_t axis = 0; axis < d; ++axis) {
            std::vector<double> vals;
            for (int i = 0; i <= 20; ++i) {
                std::vector<double> x = center;
                x[axis] += -1.0 + 0.1 * i;
                vals.push_back(rate_function(curve, x).value);
                CHECK(vals.back() >= -1e-12);
                if (i != 10) CHECK(vals.back() > 1e-8);
            }
            for (std::size_t i = 1; i + 1 < vals.size(); ++i) {
                CHECK(vals[i] <= 0.5 * (vals[i - 1] + vals[i + 1]) + 1e-8);
            }
        }
    }
}

TEST_CASE("KS distance calibration")
{
    std::mt19937_64 gen(77);
    const double sigma2 = 0.584;
    std::normal_distribution<double> g(0.0, std::sqrt(sigma2));
    std::vector<double> xs(10000);
    for (auto& x : xs) x = g(gen);
    CHECK(ks_distance_normal(xs, sigma2) <= 1.63 / std::sqrt(10000.0));
    const std::vector<double> constant(500, 0.0);
    CHECK(std::abs(ks_distance_normal(constant, 1.0) - 0.5) < 1e-12);
    CHECK(ks_distance_normal(xs, 4.0 * sigma2) > 0.1);
    CHECK_THROWS_AS(ks_distance_normal(xs, 0.0), std::invalid_argument);
}

TEST_CASE("Gaussian comparison of ensemble statistics")
{
    EnsembleStats st;
    st.samples = 4;
    CheckpointStats cp;
    cp.time = 4.0;
    cp.histogram = {{{1}, 0.25}, {{3}, 0.5}, {{5}, 0.25}};
    cp.mean = RVector::Constant(1, 3.0);
    cp.covariance = RMatrix::Constant(1, 1, 8.0 / 3.0);
    st.checkpoints = {cp};
    const RVector m = RVector::Constant(1, 0.5);
    const RMatrix v = RMatrix::Constant(1, 1, 0.5);
    const auto out = gaussian_comparison(st, {1}, m, v);
    REQUIRE(out.size() == 1);
    CHECK(std::abs(out[0].drift_error(0)) < 1e-15);
    CHECK(std::abs(out[0].scaled_covariance(0, 0) - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(out[0].covariance_relative_error - 1.0 / 3.0) < 1e-12);
    // Standardized atoms at -1, 0, 1 with masses 1/4, 1/2, 1/4; the largest
    // gap is at the central atom.
    CHECK(std::abs(out[0].ks[0] - 0.25) < 1e-12);
}

TEST_CASE("empirical decay rate of the pure birth chain")
{
    const WalkModel m = builtin::classical_walk(1.0, 0.0);
    const DeformationCurve curve(m);
    RateRegion region{RVector::Constant(1, 1.5), RVector::Constant(1, INFINITY)};
    const std::size_t n = 20000;
    const LdpReport rep = empirical_ldp(curve, region, InitialCondition::localized({0}, CMatrix::Identity(1, 1)),
                                        {10.0, 20.0, 40.0}, n, 9);
    CHECK(std::abs(rep.inf_rate - (1.5 * std::log(1.5) - 0.5)) < 1e-8);
    REQUIRE(rep.estimates.size() == 3);
    double prev_exact = INFINITY;
    for (const auto& e : rep.estimates) {
        const double p = poisson_tail(static_cast<int>(std::ceil(1.5 * e.time)), e.time);
        const double exact = -std::log(p) / e.time;
        CHECK(exact > rep.inf_rate);
        CHECK(exact < prev_exact);
        prev_exact = exact;
        REQUIRE_FALSE(e.lower_bound);
        const double rel = std::sqrt((1.0 - p) / (static_cast<double>(n) * p));
        CHECK(std::abs(e.rate - exact) <= 4.0 * rel / e.time);
    }
}

TEST_CASE("empirical decay rate near the drift and without hits")
{
    const DeformationCurve curve(builtin::example(2));
    const auto init = InitialCondition::localized({0}, CMatrix::Identity(2, 2) / 2.0);
    RateRegion around{RVector::Constant(1, -0.5), RVector::Constant(1, 0.3)};
    const LdpReport near = empirical_ldp(curve, around, init, {20.0}, 2000, 1);
    CHECK(std::abs(near.inf_rate) < 1e-12);
    CHECK(near.estimates[0].rate < 0.01);

    RateRegion far{RVector::Constant(1, 5.0), RVector::Constant(1, INFINITY)};
    const LdpReport none = empirical_ldp(curve, far, init, {10.0}, 100, 1);
    CHECK(none.estimates[0].lower_bound);
    CHECK(none.estimates[0].hits == 0);
    CHECK(std::abs(none.estimates[0].rate - std::log(100.0) / 10.0) < 1e-15);

    CHECK_THROWS_AS(empirical_ldp(DeformationCurve(builtin::diagonal_walk()), around, init, {1.0}, 10, 1),
                    std::domain_error);
}
