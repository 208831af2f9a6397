// spectral.hpp: stationary state, irreducibility and the leading eigenvalue
// of the deformed generator.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ctoqw/linalg.hpp"
#include "ctoqw/walk_model.hpp"

namespace ctoqw {

// Matrix of L (u empty) or of L^(u) under column stacking.
Superoperator lindblad_superoperator(const WalkModel& model, std::span<const double> u = {});
Superoperator lindblad_adjoint_superoperator(const WalkModel& model);

struct StationaryReport {
    std::optional<CMatrix> rho_inv; // present only when the kernel is one-dimensional
    int kernel_dim = 0;
    bool h1_holds = false;
    double residual = 0.0;   // ||L(rho_inv)||_F
    bool positive = false;   // rho_inv PSD within 1e-10
    bool normalized = false; // Hermitization produced a unit-trace representative
};

StationaryReport stationary_state(const WalkModel& model, double tol = 1e-10);

struct IrreducibilityReport {
    bool irreducible = false;
    int algebra_dim = 0;
};

// Dimension of the unital algebra generated by D_1..D_2d; irreducible iff it
// is the full matrix algebra (dimension n^2).
IrreducibilityReport irreducibility_check(const WalkModel& model, double tol = 1e-10);

struct LeadingEigen {
    double value = 0.0;   // l_u
    CMatrix vector;       // V_u, Hermitian with unit trace when normalized
    bool simple = false;
    bool normalized = false;
    double min_vector_eigenvalue = 0.0;
};

LeadingEigen leading_eigenvalue(const WalkModel& model, std::span<const double> u);

// u -> l_u with finite-difference derivatives.
class DeformationCurve {
public:
    explicit DeformationCurve(const WalkModel& model);

    const WalkModel& model() const { return model_; }
    bool irreducible() const { return irreducible_.irreducible; }

    LeadingEigen at(std::span<const double> u) const;
    double value(std::span<const double> u) const;
    // Central differences.
    RVector gradient(std::span<const double> u, double h = 1e-4) const;
    RMatrix hessian(std::span<const double> u, double h = 1e-3) const;

    struct Sample {
        std::vector<double> u;
        double value = 0.0;
    };
    std::vector<Sample> samples(const std::vector<std::vector<double>>& grid) const;

private:
    WalkModel model_;
    IrreducibilityReport irreducible_;
    CMatrix local_;
    std::vector<CMatrix> channel_;
};

} // namespace ctoqw
