// walk_model.cpp

#include "ctoqw/walk_model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace ctoqw {

namespace {

constexpr double kModelTol = 1e-12;

void check_shapes(int d, const CMatrix& ref, const std::vector<CMatrix>& jumps)
{
    if (d < 1) throw std::invalid_argument("WalkModel: lattice dimension must be >= 1");
    if (ref.rows() < 1 || ref.rows() != ref.cols()) {
        throw std::invalid_argument("WalkModel: internal operator must be square and non-empty");
    }
    if (jumps.size() != static_cast<std::size_t>(2 * d)) {
        std::ostringstream msg;
        msg << "WalkModel: expected " << 2 * d << " jump operators, got " << jumps.size();
        throw std::invalid_argument(msg.str());
    }
    for (std::size_t r = 0; r < jumps.size(); ++r) {
        if (jumps[r].rows() != ref.rows() || jumps[r].cols() != ref.cols()) {
            std::ostringstream msg;
            msg << "WalkModel: jump operator D_" << r + 1 << " is " << jumps[r].rows() << "x"
                << jumps[r].cols() << ", expected " << ref.rows() << "x" << ref.rows();
            throw std::invalid_argument(msg.str());
        }
    }
    if (!ref.allFinite()) throw std::invalid_argument("WalkModel: non-finite entries");
    for (const auto& j : jumps) {
        if (!j.allFinite()) throw std::invalid_argument("WalkModel: non-finite entries");
    }
}

CMatrix dissipation_sum(const std::vector<CMatrix>& jumps)
{
    CMatrix sum = CMatrix::Zero(jumps.front().rows(), jumps.front().cols());
    for (const auto& j : jumps) sum += j.adjoint() * j;
    return sum;
}

} // namespace

WalkModel WalkModel::from_hamiltonian(int d, const CMatrix& hamiltonian,
                                      std::vector<CMatrix> jumps)
{
    check_shapes(d, hamiltonian, jumps);
    const double skew = (hamiltonian - hamiltonian.adjoint()).norm();
    if (skew > kModelTol) {
        std::ostringstream msg;
        msg << "WalkModel: Hamiltonian is not Hermitian (||H - H^*||_F = " << skew << ")";
        throw std::invalid_argument(msg.str());
    }
    WalkModel m;
    m.d_ = d;
    m.h_ = hermitian_part(hamiltonian);
    m.jumps_ = std::move(jumps);
    m.dissipation_ = dissipation_sum(m.jumps_);
    m.d0_ = Complex(0.0, -1.0) * m.h_ - 0.5 * m.dissipation_;
    m.finish(kModelTol);
    return m;
}

WalkModel WalkModel::from_drift(int d, const CMatrix& d0, std::vector<CMatrix> jumps)
{
    check_shapes(d, d0, jumps);
    WalkModel m;
    m.d_ = d;
    m.d0_ = d0;
    m.jumps_ = std::move(jumps);
    m.dissipation_ = dissipation_sum(m.jumps_);
    m.h_ = Complex(0.0, 0.5) * (d0 - d0.adjoint());
    m.finish(kModelTol * std::max(1.0, m.dissipation_.norm()));
    return m;
}

void WalkModel::finish(double tol)
{
    const double residual = lindblad_residual();
    if (residual > tol) {
        std::ostringstream msg;
        msg << "WalkModel: Lindblad identity violated, residual ||D0 + D0^* + sum D_r^* D_r||_F = "
            << residual;
        throw std::invalid_argument(msg.str());
    }
    max_rate_ = 0.0;
    for (const auto& j : jumps_) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(j.adjoint() * j, Eigen::EigenvaluesOnly);
        max_rate_ += es.eigenvalues().maxCoeff();
    }
}

double WalkModel::lindblad_residual() const
{
    return (d0_ + d0_.adjoint() + dissipation_).norm();
}

double WalkModel::projection(std::span<const double> u, int r) const
{
    if (u.size() != static_cast<std::size_t>(d_)) {
        throw std::invalid_argument("WalkModel: deformation vector has wrong dimension");
    }
    return sign(r) * u[static_cast<std::size_t>(axis(r))];
}

Site WalkModel::step(const Site& x, int r) const
{
    Site y = x;
    y[static_cast<std::size_t>(axis(r))] += sign(r);
    return y;
}

namespace {

void check_operand(const WalkModel& model, const CMatrix& m)
{
    if (m.rows() != model.internal_dim() || m.cols() != model.internal_dim()) {
        throw std::invalid_argument("WalkModel: operand shape mismatch");
    }
}

} // namespace

CMatrix lindblad_apply(const WalkModel& model, const CMatrix& rho)
{
    check_operand(model, rho);
    CMatrix out = model.d0() * rho + rho * model.d0().adjoint();
    for (const auto& j : model.jumps()) out += j * rho * j.adjoint();
    return out;
}

CMatrix lindblad_adjoint_apply(const WalkModel& model, const CMatrix& a)
{
    check_operand(model, a);
    CMatrix out = model.d0().adjoint() * a + a * model.d0();
    for (const auto& j : model.jumps()) out += j.adjoint() * a * j;
    return out;
}

CMatrix deformed_apply(const WalkModel& model, std::span<const double> u, const CMatrix& rho)
{
    check_operand(model, rho);
    if (u.size() != static_cast<std::size_t>(model.lattice_dim())) {
        throw std::invalid_argument("deformed_apply: u has wrong dimension");
    }
    for (double v : u) {
        if (!std::isfinite(v)) throw std::invalid_argument("deformed_apply: non-finite u");
    }
    CMatrix out = model.d0() * rho + rho * model.d0().adjoint();
    for (int r = 0; r < model.channel_count(); ++r) {
        const auto& j = model.jump(r);
        out += std::exp(model.projection(u, r)) * (j * rho * j.adjoint());
    }
    return out;
}

} // namespace ctoqw
