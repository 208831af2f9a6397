// limit_theorems.cpp

#include "ctoqw/limit_theorems.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/QR>

namespace ctoqw {

namespace {

double normal_cdf(double z, double variance)
{
    return 0.5 * std::erfc(-z / std::sqrt(2.0 * variance));
}

std::vector<double> unit(std::size_t d, std::size_t a)
{
    std::vector<double> e(d, 0.0);
    e[a] = 1.0;
    return e;
}

double channel_weight(const WalkModel& model, int r, const CMatrix& rho)
{
    const CMatrix& j = model.jump(r);
    return (j * rho * j.adjoint()).trace().real();
}

} // namespace

RVector mean_drift(const WalkModel& model, const CMatrix& rho_inv)
{
    RVector m = RVector::Zero(model.lattice_dim());
    for (int r = 0; r < model.channel_count(); ++r) {
        m(model.axis(r)) += model.sign(r) * channel_weight(model, r, rho_inv);
    }
    return m;
}

CMatrix solve_poisson_direction(const WalkModel& model, const RVector& m,
                                std::span<const double> u, double* residual,
                                double max_residual)
{
    const Index n = model.internal_dim();
    if (u.size() != static_cast<std::size_t>(model.lattice_dim()) || m.size() != model.lattice_dim()) {
        throw std::invalid_argument("solve_poisson: direction or drift has wrong dimension");
    }
    double mu = 0.0;
    for (Index a = 0; a < m.size(); ++a) mu += m(a) * u[static_cast<std::size_t>(a)];
    CMatrix source = -mu * CMatrix::Identity(n, n);
    for (int r = 0; r < model.channel_count(); ++r) {
        source += model.projection(u, r) * (model.jump(r).adjoint() * model.jump(r));
    }

    const Superoperator adj = lindblad_adjoint_superoperator(model);
    Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(adj.matrix.rows(), adj.matrix.cols());
    cod.setThreshold(1e-10);
    cod.compute(adj.matrix);
    CMatrix j = devectorize(cod.solve(vectorize(-source)), n);
    j -= (j.trace() / static_cast<double>(n)) * CMatrix::Identity(n, n);
    j = hermitian_part(j);

    const double res = (lindblad_adjoint_apply(model, j) + source).norm();
    if (residual) *residual = res;
    if (res > max_residual) {
        std::ostringstream msg;
        msg << "solve_poisson: residual " << res << " exceeds " << max_residual
            << " (stationary state not unique or ill-conditioned)";
        throw std::runtime_error(msg.str());
    }
    return j;
}

PoissonSolution solve_poisson(const WalkModel& model, const CMatrix& rho_inv, const RVector& m,
                              double max_residual)
{
    (void)rho_inv;
    const auto d = static_cast<std::size_t>(model.lattice_dim());
    PoissonSolution sol;
    for (std::size_t q = 0; q < d; ++q) {
        double res = 0.0;
        sol.j.push_back(solve_poisson_direction(model, m, unit(d, q), &res, max_residual));
        sol.residuals.push_back(res);
    }
    return sol;
}

RMatrix variance_matrix(const WalkModel& model, const CMatrix& rho_inv, const RVector& m,
                        const std::vector<CMatrix>& j)
{
    const int d = model.lattice_dim();
    if (j.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("variance_matrix: need one J per lattice axis");
    }
    // Post-jump unnormalized states D_r rho D_r^*.
    std::vector<CMatrix> kicked;
    for (int r = 0; r < model.channel_count(); ++r) {
        kicked.push_back(model.jump(r) * rho_inv * model.jump(r).adjoint());
    }
    auto tr = [](const CMatrix& a, const CMatrix& b) { return (a * b).trace().real(); };

    RMatrix v(d, d);
    for (int r = 0; r < d; ++r) {
        for (int q = 0; q < d; ++q) {
            const auto& jr = j[static_cast<std::size_t>(r)];
            const auto& jq = j[static_cast<std::size_t>(q)];
            double value = -m(q) * tr(rho_inv, jr) - m(r) * tr(rho_inv, jq);
            if (r == q) {
                value += kicked[static_cast<std::size_t>(r)].trace().real() +
                         kicked[static_cast<std::size_t>(r + d)].trace().real();
            }
            value += tr(kicked[static_cast<std::size_t>(q)], jr) +
                     tr(kicked[static_cast<std::size_t>(r)], jq);
            value -= tr(kicked[static_cast<std::size_t>(q + d)], jr) +
                     tr(kicked[static_cast<std::size_t>(r + d)], jq);
            v(r, q) = value;
        }
    }
    return 0.5 * (v + v.transpose());
}

CltReport clt_report(const WalkModel& model)
{
    const StationaryReport st = stationary_state(model);
    if (!st.h1_holds || !st.rho_inv) {
        std::ostringstream msg;
        msg << "clt_report: stationary state not unique (kernel dimension " << st.kernel_dim << ")";
        throw std::domain_error(msg.str());
    }
    CltReport rep;
    rep.rho_inv = *st.rho_inv;
    rep.m = mean_drift(model, rep.rho_inv);
    PoissonSolution sol = solve_poisson(model, rep.rho_inv, rep.m);
    rep.j = std::move(sol.j);
    rep.residuals = std::move(sol.residuals);
    rep.v = variance_matrix(model, rep.rho_inv, rep.m, rep.j);
    return rep;
}

RateValue rate_function(const DeformationCurve& curve, std::span<const double> x,
                        const RateOptions& options)
{
    if (!curve.irreducible()) {
        throw std::domain_error("rate_function: model is not irreducible");
    }
    const auto d = static_cast<Index>(curve.model().lattice_dim());
    if (x.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("rate_function: x has wrong dimension");
    }
    const RVector xv = Eigen::Map<const RVector>(x.data(), d);
    auto objective = [&](const RVector& u) {
        return u.dot(xv) - curve.value(std::span<const double>(u.data(), static_cast<std::size_t>(d)));
    };
    auto ascent_direction = [&](const RVector& u) {
        const std::span<const double> us(u.data(), static_cast<std::size_t>(d));
        return RVector(xv - curve.gradient(us, options.gradient_step));
    };

    RateValue out;
    RVector u = RVector::Zero(d);
    double f = objective(u);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        out.iterations = iter;
        const RVector g = ascent_direction(u);
        if (g.norm() <= options.gradient_tol) {
            out.converged = true;
            break;
        }
        const std::span<const double> us(u.data(), static_cast<std::size_t>(d));
        RMatrix h = curve.hessian(us, options.hessian_step);
        h = 0.5 * (h + h.transpose());
        Eigen::LDLT<RMatrix> ldlt(h);
        RVector step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 1e-14) {
            step = ldlt.solve(g);
        } else {
            step = g;
        }
        // Backtracking on the concave objective.
        double alpha = 1.0;
        RVector trial;
        double f_trial = f;
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            trial = u + alpha * step;
            if (trial.norm() > options.divergence_bound) {
                accepted = true;
                break;
            }
            f_trial = objective(trial);
            if (f_trial >= f + 1e-4 * alpha * g.dot(step) || f_trial >= f) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // Line search stalled at roundoff level; the iterate is optimal to
            // working precision.
            out.converged = g.norm() <= 1e3 * options.gradient_tol;
            break;
        }
        if (trial.norm() > options.divergence_bound) {
            out.value = std::numeric_limits<double>::infinity();
            out.u_star.reset();
            out.converged = true;
            return out;
        }
        u = trial;
        f = f_trial;
    }
    if (!out.converged && d == 1) {
        // Bisection on the (decreasing) derivative x - l'(u).
        auto slope = [&](double v) {
            const RVector p = RVector::Constant(1, v);
            return ascent_direction(p)(0);
        };
        double lo = u(0), hi = u(0);
        double width = 1.0;
        if (slope(u(0)) > 0.0) {
            do {
                lo = hi;
                hi = lo + width;
                width *= 2.0;
                if (std::abs(hi) > options.divergence_bound) {
                    out.value = std::numeric_limits<double>::infinity();
                    out.u_star.reset();
                    out.converged = true;
                    return out;
                }
            } while (slope(hi) > 0.0);
        } else {
            do {
                hi = lo;
                lo = hi - width;
                width *= 2.0;
                if (std::abs(lo) > options.divergence_bound) {
                    out.value = std::numeric_limits<double>::infinity();
                    out.u_star.reset();
                    out.converged = true;
                    return out;
                }
            } while (slope(lo) < 0.0);
        }
        for (int k = 0; k < 200 && hi - lo > 1e-14; ++k) {
            const double mid = 0.5 * (lo + hi);
            const double g = slope(mid);
            if (std::abs(g) <= options.gradient_tol) {
                lo = hi = mid;
                break;
            }
            (g > 0.0 ? lo : hi) = mid;
        }
        u(0) = 0.5 * (lo + hi);
        f = objective(u);
        out.converged = std::abs(slope(u(0))) <= 1e3 * options.gradient_tol;
    }
    out.value = f;
    out.u_star = u;
    return out;
}

double ks_distance_normal(std::vector<std::pair<double, double>> atoms, double variance)
{
    if (!(variance > 0.0)) throw std::invalid_argument("ks_distance_normal: variance must be > 0");
    std::sort(atoms.begin(), atoms.end());
    double total = 0.0;
    for (const auto& a : atoms) total += a.second;
    if (total <= 0.0) return 1.0;
    double cum = 0.0;
    double dist = 0.0;
    for (std::size_t k = 0; k < atoms.size();) {
        const double z = atoms[k].first;
        double mass = 0.0;
        for (; k < atoms.size() && atoms[k].first == z; ++k) mass += atoms[k].second;
        const double phi = normal_cdf(z, variance);
        dist = std::max(dist, std::abs(cum / total - phi));
        cum += mass;
        dist = std::max(dist, std::abs(cum / total - phi));
    }
    return dist;
}

double ks_distance_normal(std::span<const double> samples, double variance)
{
    std::vector<std::pair<double, double>> atoms;
    atoms.reserve(samples.size());
    for (double s : samples) atoms.emplace_back(s, 1.0);
    return ks_distance_normal(std::move(atoms), variance);
}

std::vector<GaussianCheckpoint> gaussian_comparison(const EnsembleStats& stats,
                                                    const Site& origin, const RVector& m,
                                                    const RMatrix& v)
{
    const Index d = m.size();
    if (v.rows() != d || v.cols() != d || origin.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("gaussian_comparison: dimension mismatch");
    }
    std::vector<GaussianCheckpoint> out;
    for (const auto& cp : stats.checkpoints) {
        if (cp.time <= 0.0) continue;
        const double t = cp.time;
        const double root = std::sqrt(t);
        GaussianCheckpoint g;
        g.time = t;
        for (Index a = 0; a < d; ++a) {
            std::vector<std::pair<double, double>> atoms;
            for (const auto& [site, p] : cp.histogram) {
                const double disp = static_cast<double>(site[static_cast<std::size_t>(a)] -
                                                        origin[static_cast<std::size_t>(a)]);
                atoms.emplace_back((disp - m(a) * t) / root, p);
            }
            g.ks.push_back(ks_distance_normal(std::move(atoms), v(a, a)));
        }
        RVector origin_v(d);
        for (Index a = 0; a < d; ++a) origin_v(a) = static_cast<double>(origin[static_cast<std::size_t>(a)]);
        g.drift_error = (cp.mean - origin_v) / t - m;
        g.scaled_covariance = cp.covariance / t;
        g.covariance_relative_error = (g.scaled_covariance - v).norm() / v.norm();
        out.push_back(std::move(g));
    }
    return out;
}

bool RateRegion::contains(const RVector& x) const
{
    for (Index a = 0; a < x.size(); ++a) {
        if (x(a) < lower(a) || x(a) > upper(a)) return false;
    }
    return true;
}

double region_rate_infimum(const DeformationCurve& curve, const RateRegion& region,
                           const RVector& m, const LdpOptions& options)
{
    const Index d = m.size();
    if (region.lower.size() != d || region.upper.size() != d) {
        throw std::invalid_argument("region_rate_infimum: region has wrong dimension");
    }
    std::vector<std::vector<double>> axes(static_cast<std::size_t>(d));
    const std::size_t pts = std::max<std::size_t>(2, options.grid_points);
    for (Index a = 0; a < d; ++a) {
        const double lo = std::max(region.lower(a), m(a) - options.span);
        const double hi = std::min(region.upper(a), m(a) + options.span);
        auto& axis = axes[static_cast<std::size_t>(a)];
        if (lo > hi) return std::numeric_limits<double>::infinity();
        if (lo == hi) {
            axis.push_back(lo);
            continue;
        }
        for (std::size_t k = 0; k < pts; ++k) {
            axis.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(pts - 1));
        }
    }
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    std::vector<double> x(static_cast<std::size_t>(d));
    for (;;) {
        for (std::size_t a = 0; a < idx.size(); ++a) x[a] = axes[a][idx[a]];
        best = std::min(best, rate_function(curve, x).value);
        std::size_t a = 0;
        for (; a < idx.size(); ++a) {
            if (++idx[a] < axes[a].size()) break;
            idx[a] = 0;
        }
        if (a == idx.size()) break;
    }
    return best;
}

LdpReport empirical_ldp(const DeformationCurve& curve, const RateRegion& region,
                        const InitialCondition& init, const std::vector<double>& times,
                        std::size_t samples, std::uint64_t root_seed, const LdpOptions& options)
{
    if (!curve.irreducible()) {
        throw std::domain_error("empirical_ldp: model is not irreducible");
    }
    if (init.components.size() != 1) {
        throw std::invalid_argument("empirical_ldp: initial condition must be a single site");
    }
    if (times.empty()) throw std::invalid_argument("empirical_ldp: no times given");
    const WalkModel& model = curve.model();
    const Index d = model.lattice_dim();
    const Site& origin = init.components.front().first;

    const auto st = stationary_state(model);
    if (!st.rho_inv) throw std::domain_error("empirical_ldp: stationary state not unique");
    const RVector m = mean_drift(model, *st.rho_inv);

    LdpReport rep;
    rep.inf_rate = region_rate_infimum(curve, region, m, options);

    const double t_max = *std::max_element(times.begin(), times.end());
    const EnsembleStats stats =
        run_ensemble(model, init, t_max, times, samples, root_seed, options.threads);
    for (const auto& cp : stats.checkpoints) {
        LdpEstimate e;
        e.time = cp.time;
        double freq = 0.0;
        for (const auto& [site, p] : cp.histogram) {
            RVector rate(d);
            for (Index a = 0; a < d; ++a) {
                rate(a) = static_cast<double>(site[static_cast<std::size_t>(a)] -
                                              origin[static_cast<std::size_t>(a)]) / cp.time;
            }
            if (region.contains(rate)) freq += p;
        }
        e.frequency = freq;
        e.hits = static_cast<std::size_t>(std::llround(freq * static_cast<double>(samples)));
        if (e.hits == 0) {
            e.lower_bound = true;
            e.rate = std::log(static_cast<double>(samples)) / cp.time;
        } else {
            e.rate = -std::log(freq) / cp.time;
        }
        rep.estimates.push_back(e);
    }
    return rep;
}

} // namespace ctoqw
