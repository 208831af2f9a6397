// linalg.cpp: dense complex linear algebra primitives.

#include "ctoqw/linalg.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace ctoqw {

namespace {

void require_square(const CMatrix& m, const char* what)
{
    if (m.rows() != m.cols()) {
        throw std::invalid_argument(std::string(what) + ": matrix must be square");
    }
}

// Pade coefficients and 1-norm thresholds from Higham (2005).
constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                          25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0,
                                           302702400.0,   30270240.0,   2162160.0,
                                           110880.0,      3960.0,       90.0,
                                           1.0};
constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};
constexpr std::array<double, 5> kTheta = {1.495585217958292e-2, 2.539398330063230e-1,
                                          9.504178996162932e-1, 2.097847961257068,
                                          5.371920351148152};

template <std::size_t N>
CMatrix pade_low(const CMatrix& a, const std::array<double, N>& b)
{
    const Index n = a.rows();
    const CMatrix ident = CMatrix::Identity(n, n);
    const CMatrix a2 = a * a;
    CMatrix even_pow = ident;
    CMatrix u_acc = b[1] * ident;
    CMatrix v_acc = b[0] * ident;
    for (std::size_t k = 2; k < N; k += 2) {
        even_pow = even_pow * a2;
        v_acc += b[k] * even_pow;
        u_acc += b[k + 1] * even_pow;
    }
    const CMatrix u = a * u_acc;
    return (v_acc - u).partialPivLu().solve(v_acc + u);
}

CMatrix pade13(const CMatrix& a)
{
    const auto& b = kPade13;
    const Index n = a.rows();
    const CMatrix ident = CMatrix::Identity(n, n);
    const CMatrix a2 = a * a;
    const CMatrix a4 = a2 * a2;
    const CMatrix a6 = a4 * a2;
    const CMatrix u_inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
    const CMatrix u = a * (a6 * u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
    const CMatrix v_inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
    const CMatrix v = a6 * v_inner + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
    return (v - u).partialPivLu().solve(v + u);
}

} // namespace

bool is_hermitian(const CMatrix& m, double tol)
{
    if (m.rows() != m.cols()) return false;
    return (m - m.adjoint()).norm() <= tol;
}

CMatrix hermitian_part(const CMatrix& m)
{
    require_square(m, "hermitian_part");
    return 0.5 * (m + m.adjoint());
}

double min_eigenvalue(const CMatrix& m)
{
    require_square(m, "min_eigenvalue");
    const Index n = m.rows();
    if (n == 1) return m(0, 0).real();
    if (n == 2) {
        const double a = m(0, 0).real();
        const double d = m(1, 1).real();
        const Complex b = 0.5 * (m(0, 1) + std::conj(m(1, 0)));
        const double half_gap = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(b));
        return 0.5 * (a + d) - half_gap;
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool is_psd(const CMatrix& m, double tol)
{
    if (m.rows() != m.cols()) return false;
    return min_eigenvalue(m) >= -tol;
}

CVector vectorize(const CMatrix& m)
{
    require_square(m, "vectorize");
    return Eigen::Map<const CVector>(m.data(), m.size());
}

CMatrix devectorize(const CVector& v, Index n)
{
    if (n <= 0 || v.size() != n * n) {
        throw std::invalid_argument("devectorize: vector length must equal n^2");
    }
    return Eigen::Map<const CMatrix>(v.data(), n, n);
}

Superoperator::Superoperator(Index n, CMatrix m) : dim(n), matrix(std::move(m))
{
    if (matrix.rows() != n * n || matrix.cols() != n * n) {
        throw std::invalid_argument("Superoperator: matrix must be n^2 x n^2");
    }
}

Superoperator Superoperator::zero(Index n)
{
    return Superoperator(n, CMatrix::Zero(n * n, n * n));
}

Superoperator Superoperator::identity(Index n)
{
    return Superoperator(n, CMatrix::Identity(n * n, n * n));
}

Superoperator Superoperator::sandwich(const CMatrix& a, const CMatrix& b)
{
    require_square(a, "sandwich");
    if (b.rows() != a.rows() || b.cols() != a.cols()) {
        throw std::invalid_argument("sandwich: operand shapes differ");
    }
    const Index n = a.rows();
    CMatrix k(n * n, n * n);
    const CMatrix bc = b.conjugate();
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            k.block(i * n, j * n, n, n) = bc(i, j) * a;
        }
    }
    return Superoperator(n, std::move(k));
}

CMatrix Superoperator::apply(const CMatrix& m) const
{
    if (m.rows() != dim || m.cols() != dim) {
        throw std::invalid_argument("Superoperator::apply: shape mismatch");
    }
    return devectorize(matrix * vectorize(m), dim);
}

Superoperator Superoperator::adjoint() const
{
    return Superoperator(dim, matrix.adjoint());
}

Superoperator& Superoperator::operator+=(const Superoperator& other)
{
    if (other.dim != dim) throw std::invalid_argument("Superoperator: dimension mismatch");
    matrix += other.matrix;
    return *this;
}

Superoperator operator*(Complex s, const Superoperator& op)
{
    return Superoperator(op.dim, s * op.matrix);
}

CMatrix matrix_exponential(const CMatrix& a, double t)
{
    require_square(a, "matrix_exponential");
    if (!std::isfinite(t) || !a.allFinite()) {
        throw std::invalid_argument("matrix_exponential: non-finite input");
    }
    const CMatrix scaled = t * a;
    const double norm1 = scaled.cwiseAbs().colwise().sum().maxCoeff();
    if (norm1 <= kTheta[0]) return pade_low(scaled, kPade3);
    if (norm1 <= kTheta[1]) return pade_low(scaled, kPade5);
    if (norm1 <= kTheta[2]) return pade_low(scaled, kPade7);
    if (norm1 <= kTheta[3]) return pade_low(scaled, kPade9);

    int squarings = 0;
    if (norm1 > kTheta[4]) {
        squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / kTheta[4]))));
    }
    CMatrix result = pade13(scaled / std::ldexp(1.0, squarings));
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

std::vector<CMatrix> kernel_basis(const Superoperator& s, double tol)
{
    Eigen::JacobiSVD<CMatrix> svd(s.matrix, Eigen::ComputeFullV);
    const RVector& sv = svd.singularValues();
    std::vector<CMatrix> basis;
    const double largest = sv.size() > 0 ? sv(0) : 0.0;
    for (Index k = 0; k < sv.size(); ++k) {
        if (largest == 0.0 || sv(k) < tol * largest) {
            basis.push_back(devectorize(svd.matrixV().col(k), s.dim));
        }
    }
    return basis;
}

HermitianRepresentative hermitian_representative(const CMatrix& k, double tol)
{
    const Complex tr = k.trace();
    if (std::abs(tr) <= tol * std::max(1.0, k.norm())) {
        return {hermitian_part(k), false};
    }
    CMatrix h = hermitian_part(k / tr);
    h /= h.trace().real();
    return {std::move(h), true};
}

SpectralAbscissa leading_spectral_abscissa(const Superoperator& s, double degeneracy_tol)
{
    Eigen::ComplexEigenSolver<CMatrix> es(s.matrix, true);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("leading_spectral_abscissa: eigensolver failed");
    }
    const CVector& values = es.eigenvalues();
    Index best = 0;
    for (Index k = 1; k < values.size(); ++k) {
        if (values(k).real() > values(best).real()) best = k;
    }
    SpectralAbscissa out;
    out.value = values(best).real();
    out.eigenvalue = values(best);
    int attaining = 0;
    for (Index k = 0; k < values.size(); ++k) {
        if (values(k).real() >= out.value - degeneracy_tol) ++attaining;
    }
    out.degenerate = attaining > 1;
    auto rep = hermitian_representative(devectorize(es.eigenvectors().col(best), s.dim));
    if (rep.normalized) {
        out.eigenvector = std::move(rep.matrix);
        out.normalized = true;
    } else {
        out.eigenvector = devectorize(es.eigenvectors().col(best), s.dim);
    }
    return out;
}

} // namespace ctoqw
