// limit_theorems.hpp: central limit data (m, J, V), the rate function and
// Monte Carlo comparisons against both.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ctoqw/linalg.hpp"
#include "ctoqw/spectral.hpp"
#include "ctoqw/trajectory.hpp"
#include "ctoqw/walk_model.hpp"

namespace ctoqw {

// m = sum_r Tr(D_r rho D_r^*) e_r
RVector mean_drift(const WalkModel& model, const CMatrix& rho_inv);

struct PoissonSolution {
    std::vector<CMatrix> j;         // trace-zero Hermitian J_1..J_d
    std::vector<double> residuals;  // ||L^*(J_q) + sum_r (e_r.e_q) D_r^* D_r - m_q I||_F
};

// Trace-zero solution of L^*(J_u) = -(sum_r (e_r.u) D_r^* D_r - (m.u) I).
// Throws std::runtime_error when the residual exceeds max_residual.
CMatrix solve_poisson_direction(const WalkModel& model, const RVector& m,
                                std::span<const double> u, double* residual = nullptr,
                                double max_residual = 1e-9);

PoissonSolution solve_poisson(const WalkModel& model, const CMatrix& rho_inv, const RVector& m,
                              double max_residual = 1e-9);

// Asymptotic covariance of (X_t - m t) / sqrt(t).
RMatrix variance_matrix(const WalkModel& model, const CMatrix& rho_inv, const RVector& m,
                        const std::vector<CMatrix>& j);

struct CltReport {
    CMatrix rho_inv;
    RVector m;
    std::vector<CMatrix> j;
    RMatrix v;
    std::vector<double> residuals;
};

// Throws std::domain_error when the stationary state is not unique.
CltReport clt_report(const WalkModel& model);

struct RateOptions {
    double gradient_tol = 1e-8;
    int max_iterations = 200;
    double divergence_bound = 50.0;
    double gradient_step = 1e-5;
    double hessian_step = 1e-3;
};

struct RateValue {
    double value = 0.0; // +inf outside the effective domain
    std::optional<RVector> u_star;
    bool converged = false;
    int iterations = 0;
};

// sup_u (u.x - l_u). Throws std::domain_error for reducible models.
RateValue rate_function(const DeformationCurve& curve, std::span<const double> x,
                        const RateOptions& options = {});

// Kolmogorov-Smirnov distance between a discrete law (values with masses) and
// N(0, variance).
double ks_distance_normal(std::vector<std::pair<double, double>> atoms, double variance);
double ks_distance_normal(std::span<const double> samples, double variance);

struct GaussianCheckpoint {
    double time = 0.0;
    std::vector<double> ks;               // per axis, standardized (X_t - m t) / sqrt(t)
    RVector drift_error;                  // mean / t - m
    RMatrix scaled_covariance;            // covariance / t
    double covariance_relative_error = 0; // ||cov / t - V||_F / ||V||_F
};

std::vector<GaussianCheckpoint> gaussian_comparison(const EnsembleStats& stats,
                                                    const Site& origin, const RVector& m,
                                                    const RMatrix& v);

// Axis-aligned box of displacement rates; bounds may be infinite.
struct RateRegion {
    RVector lower;
    RVector upper;
    bool contains(const RVector& x) const;
};

struct LdpEstimate {
    double time = 0.0;
    std::size_t hits = 0;
    double frequency = 0.0;
    double rate = 0.0;          // -(1/t) log frequency
    bool lower_bound = false;   // no hits: rate is a lower bound from 1/N
};

struct LdpReport {
    double inf_rate = std::numeric_limits<double>::infinity(); // inf of the rate function over a grid on the region
    std::vector<LdpEstimate> estimates;
};

struct LdpOptions {
    std::size_t grid_points = 201; // per axis
    double span = 3.0;             // infinite bounds clipped to m +- span
    unsigned threads = 1;
};

// Empirical decay rate of P((X_t - X_0) / t in region) from an ensemble
// started at a single site.
LdpReport empirical_ldp(const DeformationCurve& curve, const RateRegion& region,
                        const InitialCondition& init, const std::vector<double>& times,
                        std::size_t samples, std::uint64_t root_seed,
                        const LdpOptions& options = {});

// inf of the rate function over the grid on `region`.
double region_rate_infimum(const DeformationCurve& curve, const RateRegion& region,
                           const RVector& m, const LdpOptions& options = {});

} // namespace ctoqw
