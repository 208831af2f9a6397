// linalg.hpp: dense complex matrices, superoperators and the spectral
// primitives shared by every other module.

#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace ctoqw {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

bool is_hermitian(const CMatrix& m, double tol = 1e-12);

// All eigenvalues of the Hermitian part are >= -tol.
bool is_psd(const CMatrix& m, double tol = 1e-10);

// Smallest eigenvalue of the Hermitian part of a square matrix.
double min_eigenvalue(const CMatrix& m);

CMatrix hermitian_part(const CMatrix& m);

// Column stacking: entry (i, j) lands at index j * n + i.
CVector vectorize(const CMatrix& m);
CMatrix devectorize(const CVector& v, Index n);

// Linear map on n x n matrices, stored as its n^2 x n^2 matrix acting on
// column-stacked vectorizations.
struct Superoperator {
    Index dim = 0;
    CMatrix matrix;

    Superoperator() = default;
    Superoperator(Index n, CMatrix m);

    static Superoperator zero(Index n);
    static Superoperator identity(Index n);
    // rho -> a * rho * b^*, i.e. conj(b) (x) a.
    static Superoperator sandwich(const CMatrix& a, const CMatrix& b);

    CMatrix apply(const CMatrix& m) const;
    Superoperator adjoint() const;

    Superoperator& operator+=(const Superoperator& other);
};

Superoperator operator*(Complex s, const Superoperator& op);

// exp(t * a) by scaling and squaring with a diagonal Pade approximant.
CMatrix matrix_exponential(const CMatrix& a, double t = 1.0);

// Devectorized right singular vectors whose singular values fall below
// tol * (largest singular value).
std::vector<CMatrix> kernel_basis(const Superoperator& s, double tol = 1e-10);

// Phase-fixes a kernel or eigen vector into a Hermitian unit-trace operator:
// k / Tr(k), then (k + k^*) / 2. When |Tr k| <= tol only the Hermitian part
// is taken and `normalized` is false.
struct HermitianRepresentative {
    CMatrix matrix;
    bool normalized = false;
};
HermitianRepresentative hermitian_representative(const CMatrix& k, double tol = 1e-10);

struct SpectralAbscissa {
    double value = 0.0;         // max Re(lambda)
    Complex eigenvalue;         // eigenvalue attaining it
    CMatrix eigenvector;        // devectorized, Hermitized when possible
    bool normalized = false;    // Hermitian unit-trace rescaling succeeded
    bool degenerate = false;    // another eigenvalue within 1e-9 in real part
};

SpectralAbscissa leading_spectral_abscissa(const Superoperator& s,
                                           double degeneracy_tol = 1e-9);

} // namespace ctoqw
