// master_equation.hpp: site-wise Lindblad master equation on a finite,
// dynamically resized lattice window.

#pragma once

#include <cstddef>
#include <map>

#include "ctoqw/linalg.hpp"
#include "ctoqw/walk_model.hpp"

namespace ctoqw {

// Diagonal state sum_i rho(i) (x) |i><i| restricted to a finite support.
struct LatticeState {
    int d = 1;
    double time = 0.0;
    std::map<Site, CMatrix> sites;
    // Trace removed by pruning, never renormalized away.
    double leaked_mass = 0.0;

    static LatticeState localized(const Site& x, const CMatrix& rho);

    double total_trace() const;
};

struct EvolveOptions {
    double prune_threshold = 1e-14;
    // Negative eigenvalues down to -clamp_tol are clamped to zero; anything
    // below is reported as an instability.
    double clamp_tol = 1e-8;
};

struct EvolveReport {
    std::size_t steps = 0;
    std::size_t clamped = 0;
    double max_clamped = 0.0;
    std::size_t max_window = 0;
};

// 1e-3 * min(1, 1 / max_rate)
double default_time_step(const WalkModel& model);

// Classical RK4 with a fixed step no larger than dt. Throws std::runtime_error
// on non-finite values or on a negative eigenvalue beyond clamp_tol.
LatticeState evolve(const WalkModel& model, const LatticeState& state, double t, double dt,
                    const EvolveOptions& options = {}, EvolveReport* report = nullptr);

// q_t(i) = Tr rho(i)
struct PositionDistribution {
    int d = 1;
    double time = 0.0;
    std::map<Site, double> weights;
    double leaked_mass = 0.0;
};

PositionDistribution site_distribution(const LatticeState& state);

struct Moments {
    RVector mean;
    RMatrix covariance;
};

// Mean and covariance of the measure, normalized by its total weight.
Moments distribution_moments(const PositionDistribution& q);

// 1/2 sum_i |p(i) - q(i)|
double total_variation(const std::map<Site, double>& p, const std::map<Site, double>& q);

} // namespace ctoqw
