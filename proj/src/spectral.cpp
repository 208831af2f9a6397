// spectral.cpp

#include "ctoqw/spectral.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace ctoqw {

namespace {

CMatrix local_part(const WalkModel& model)
{
    const Index n = model.internal_dim();
    const CMatrix id = CMatrix::Identity(n, n);
    return Superoperator::sandwich(model.d0(), id).matrix +
           Superoperator::sandwich(id, model.d0()).matrix;
}

std::vector<CMatrix> channel_parts(const WalkModel& model)
{
    std::vector<CMatrix> parts;
    for (const auto& j : model.jumps()) parts.push_back(Superoperator::sandwich(j, j).matrix);
    return parts;
}

Superoperator assemble(const WalkModel& model, const CMatrix& local,
                       const std::vector<CMatrix>& channels, std::span<const double> u)
{
    if (!u.empty() && u.size() != static_cast<std::size_t>(model.lattice_dim())) {
        throw std::invalid_argument("lindblad_superoperator: u has wrong dimension");
    }
    CMatrix m = local;
    for (int r = 0; r < model.channel_count(); ++r) {
        const double w = u.empty() ? 1.0 : std::exp(model.projection(u, r));
        m += w * channels[static_cast<std::size_t>(r)];
    }
    return Superoperator(model.internal_dim(), std::move(m));
}

LeadingEigen leading_from(const Superoperator& s)
{
    const SpectralAbscissa sa = leading_spectral_abscissa(s);
    LeadingEigen out;
    out.value = sa.value;
    out.vector = sa.eigenvector;
    out.simple = !sa.degenerate;
    out.normalized = sa.normalized;
    out.min_vector_eigenvalue = sa.normalized ? min_eigenvalue(sa.eigenvector) : 0.0;
    return out;
}

} // namespace

Superoperator lindblad_superoperator(const WalkModel& model, std::span<const double> u)
{
    return assemble(model, local_part(model), channel_parts(model), u);
}

Superoperator lindblad_adjoint_superoperator(const WalkModel& model)
{
    return lindblad_superoperator(model).adjoint();
}

StationaryReport stationary_state(const WalkModel& model, double tol)
{
    const Superoperator l = lindblad_superoperator(model);
    const auto kernel = kernel_basis(l, tol);
    StationaryReport rep;
    rep.kernel_dim = static_cast<int>(kernel.size());
    rep.h1_holds = kernel.size() == 1;
    if (!rep.h1_holds) return rep;

    auto hr = hermitian_representative(kernel.front());
    rep.normalized = hr.normalized;
    rep.residual = lindblad_apply(model, hr.matrix).norm();
    rep.positive = hr.normalized && is_psd(hr.matrix, 1e-10);
    rep.rho_inv = std::move(hr.matrix);
    return rep;
}

IrreducibilityReport irreducibility_check(const WalkModel& model, double tol)
{
    const Index n = model.internal_dim();
    // Orthonormal basis (Frobenius inner product) of the algebra, vectorized.
    std::vector<CVector> basis;
    auto try_add = [&](const CMatrix& m) {
        CVector v = vectorize(m);
        const double scale = v.norm();
        if (scale == 0.0) return false;
        // Two Gram-Schmidt passes for numerical orthogonality.
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) v -= b.dot(v) * b;
        }
        const double rest = v.norm();
        if (rest <= tol * scale) return false;
        basis.push_back(v / rest);
        return true;
    };

    try_add(CMatrix::Identity(n, n));
    for (const auto& j : model.jumps()) try_add(j);

    std::size_t frontier = 0;
    while (frontier < basis.size() && basis.size() < static_cast<std::size_t>(n * n)) {
        const std::size_t end = basis.size();
        for (std::size_t k = frontier; k < end; ++k) {
            const CMatrix b = devectorize(basis[k], n);
            for (const auto& j : model.jumps()) try_add(j * b);
        }
        frontier = end;
    }
    IrreducibilityReport rep;
    rep.algebra_dim = static_cast<int>(basis.size());
    rep.irreducible = basis.size() == static_cast<std::size_t>(n * n);
    return rep;
}

LeadingEigen leading_eigenvalue(const WalkModel& model, std::span<const double> u)
{
    return leading_from(lindblad_superoperator(model, u));
}

DeformationCurve::DeformationCurve(const WalkModel& model)
    : model_(model),
      irreducible_(irreducibility_check(model)),
      local_(local_part(model)),
      channel_(channel_parts(model))
{
}

LeadingEigen DeformationCurve::at(std::span<const double> u) const
{
    if (u.size() != static_cast<std::size_t>(model_.lattice_dim())) {
        throw std::invalid_argument("DeformationCurve: u has wrong dimension");
    }
    return leading_from(assemble(model_, local_, channel_, u));
}

double DeformationCurve::value(std::span<const double> u) const
{
    if (u.size() != static_cast<std::size_t>(model_.lattice_dim())) {
        throw std::invalid_argument("DeformationCurve: u has wrong dimension");
    }
    const Superoperator s = assemble(model_, local_, channel_, u);
    Eigen::ComplexEigenSolver<CMatrix> es(s.matrix, false);
    return es.eigenvalues().real().maxCoeff();
}

RVector DeformationCurve::gradient(std::span<const double> u, double h) const
{
    const std::size_t d = u.size();
    RVector g(static_cast<Index>(d));
    std::vector<double> p(u.begin(), u.end());
    for (std::size_t a = 0; a < d; ++a) {
        p[a] = u[a] + h;
        const double fp = value(p);
        p[a] = u[a] - h;
        const double fm = value(p);
        p[a] = u[a];
        g(static_cast<Index>(a)) = (fp - fm) / (2.0 * h);
    }
    return g;
}

RMatrix DeformationCurve::hessian(std::span<const double> u, double h) const
{
    const std::size_t d = u.size();
    RMatrix hess(static_cast<Index>(d), static_cast<Index>(d));
    std::vector<double> p(u.begin(), u.end());
    const double f0 = value(u);
    for (std::size_t a = 0; a < d; ++a) {
        p[a] = u[a] + h;
        const double fp = value(p);
        p[a] = u[a] - h;
        const double fm = value(p);
        p[a] = u[a];
        hess(static_cast<Index>(a), static_cast<Index>(a)) = (fp - 2.0 * f0 + fm) / (h * h);
        for (std::size_t b = a + 1; b < d; ++b) {
            double acc = 0.0;
            for (int sa : {1, -1}) {
                for (int sb : {1, -1}) {
                    p[a] = u[a] + sa * h;
                    p[b] = u[b] + sb * h;
                    acc += sa * sb * value(p);
                }
            }
            p[a] = u[a];
            p[b] = u[b];
            const double mixed = acc / (4.0 * h * h);
            hess(static_cast<Index>(a), static_cast<Index>(b)) = mixed;
            hess(static_cast<Index>(b), static_cast<Index>(a)) = mixed;
        }
    }
    return hess;
}

std::vector<DeformationCurve::Sample> DeformationCurve::samples(
    const std::vector<std::vector<double>>& grid) const
{
    std::vector<Sample> out;
    out.reserve(grid.size());
    for (const auto& u : grid) out.push_back({u, value(u)});
    return out;
}

} // namespace ctoqw
