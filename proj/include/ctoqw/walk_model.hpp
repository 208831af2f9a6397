// walk_model.hpp: nearest-neighbour homogeneous open quantum walk on Z^d.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctoqw/linalg.hpp"

namespace ctoqw {

// Lattice site in Z^d.
using Site = std::vector<std::int64_t>;

// Channel ordering is (+e_1, ..., +e_d, -e_1, ..., -e_d), zero based here:
// channel r < d moves along axis r by +1, channel d + r by -1.
class WalkModel {
public:
    // D0 = -iH - 1/2 sum_r D_r^* D_r.
    static WalkModel from_hamiltonian(int d, const CMatrix& hamiltonian,
                                      std::vector<CMatrix> jumps);
    // D0 given directly; H is recovered as i (D0 - D0^*) / 2 and the Lindblad
    // identity D0 + D0^* + sum_r D_r^* D_r = 0 is checked.
    static WalkModel from_drift(int d, const CMatrix& d0, std::vector<CMatrix> jumps);

    int lattice_dim() const { return d_; }
    Index internal_dim() const { return d0_.rows(); }
    int channel_count() const { return 2 * d_; }

    const CMatrix& hamiltonian() const { return h_; }
    const CMatrix& d0() const { return d0_; }
    const CMatrix& jump(int r) const { return jumps_[static_cast<std::size_t>(r)]; }
    const std::vector<CMatrix>& jumps() const { return jumps_; }
    // sum_r D_r^* D_r
    const CMatrix& dissipation() const { return dissipation_; }

    int axis(int r) const { return r % d_; }
    int sign(int r) const { return r < d_ ? 1 : -1; }
    // u . e_r
    double projection(std::span<const double> u, int r) const;
    Site step(const Site& x, int r) const;

    // sum_r ||D_r^* D_r||_2, an upper bound on the total jump rate.
    double max_rate() const { return max_rate_; }
    // ||D0 + D0^* + sum_r D_r^* D_r||_F
    double lindblad_residual() const;

private:
    WalkModel() = default;
    void finish(double tol);

    int d_ = 0;
    CMatrix h_;
    CMatrix d0_;
    std::vector<CMatrix> jumps_;
    CMatrix dissipation_;
    double max_rate_ = 0.0;
};

// L(rho) = D0 rho + rho D0^* + sum_r D_r rho D_r^*
CMatrix lindblad_apply(const WalkModel& model, const CMatrix& rho);
// L^*(a) = D0^* a + a D0 + sum_r D_r^* a D_r
CMatrix lindblad_adjoint_apply(const WalkModel& model, const CMatrix& a);
// L^(u)(rho): channel r weighted by exp(u . e_r).
CMatrix deformed_apply(const WalkModel& model, std::span<const double> u, const CMatrix& rho);

} // namespace ctoqw
