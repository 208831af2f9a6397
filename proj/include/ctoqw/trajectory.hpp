// trajectory.hpp: exact sampling of the quantum trajectory (rho_t, X_t) and
// ensemble statistics.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ctoqw/linalg.hpp"
#include "ctoqw/master_equation.hpp"
#include "ctoqw/random.hpp"
#include "ctoqw/walk_model.hpp"

namespace ctoqw {

struct JumpEvent {
    double time = 0.0;
    int channel = 0; // zero based, see WalkModel
    Site position;   // after the jump
    CMatrix state;   // after the jump
};

struct TrajectoryPath {
    CMatrix initial_state;
    Site initial_position;
    std::vector<JumpEvent> events;
    double final_time = 0.0;
    CMatrix final_state;
    Site final_position;
    // (1 / final_time) * integral of rho_s over [0, final_time]
    CMatrix occupation_average;
    // Total jump rate vanished and the path idled to the horizon.
    bool absorbed = false;
};

// Initial law: site i with probability Tr rho(i), internal state rho(i) / Tr rho(i).
struct InitialCondition {
    std::vector<std::pair<Site, CMatrix>> components;

    static InitialCondition localized(const Site& x, const CMatrix& rho);
    static InitialCondition from_lattice(const LatticeState& state);
};

struct JumpTime {
    double time = 0.0;
    CMatrix state; // rho just before the jump
};

struct SamplerOptions {
    // Bracketing and quadrature grid for the no-jump flow; 0 selects
    // 0.1 / max_rate.
    double grid_step = 0.0;
    // Absolute tolerance on jump times.
    double time_tol = 1e-12;
};

class TrajectorySampler {
public:
    explicit TrajectorySampler(const WalkModel& model, SamplerOptions options = {});

    const WalkModel& model() const { return model_; }

    // Survival probability Tr sigma(s), sigma(s) = e^{s D0} rho e^{s D0^*}.
    double survival(const CMatrix& rho, double s) const;

    // First s with Tr sigma(s) = u, or nullopt when none occurs before t_cap.
    std::optional<JumpTime> sample_jump_time(const CMatrix& rho, double u, double t_cap) const;

    // Channel r with probability Tr(D_r rho D_r^*) / sum_q Tr(D_q rho D_q^*).
    int select_channel(const CMatrix& rho_pre, double v) const;

    // D_r rho D_r^* / Tr(D_r rho D_r^*)
    CMatrix apply_jump(const CMatrix& rho_pre, int r) const;

    TrajectoryPath sample_path(const CMatrix& rho0, const Site& x0, double t_max,
                               std::uint64_t seed) const;
    TrajectoryPath sample_path(const InitialCondition& init, double t_max,
                               Philox4x32& rng) const;

    // Lean variant for ensembles: positions at the (sorted) checkpoints and
    // the occupation integral, no event list.
    struct Summary {
        std::vector<Site> positions;
        CMatrix occupation_integral;
        bool absorbed = false;
    };
    Summary simulate(const InitialCondition& init, double t_max,
                     std::span<const double> checkpoints, Philox4x32& rng) const;

private:
    struct Flow {
        bool jumped = false;
        double time = 0.0;
        CMatrix state;
    };
    Flow flow(const CMatrix& rho, double u, double t_cap, CMatrix& occupation) const;

    struct Run;
    void run(Run& run, const InitialCondition& init, double t_max,
             std::span<const double> checkpoints, Philox4x32& rng) const;

    WalkModel model_;
    double grid_step_;
    double time_tol_;
    CMatrix grid_prop_;
    CMatrix half_grid_prop_;
    CMatrix decay_; // D0 + D0^*
    std::vector<CMatrix> rate_ops_; // D_r^* D_r
};

struct CheckpointStats {
    double time = 0.0;
    RVector mean;
    RMatrix covariance; // divisor N - 1 (zero when N = 1)
    std::map<Site, double> histogram;
};

struct EnsembleStats {
    std::size_t samples = 0;
    std::vector<CheckpointStats> checkpoints;
    // Average over paths of the per-path time-averaged internal state.
    CMatrix mean_occupation;
    std::size_t absorbed_paths = 0;
};

// Path k uses the stream Philox4x32(root_seed, k). Results do not depend on
// `threads`.
EnsembleStats run_ensemble(const WalkModel& model, const InitialCondition& init, double t_max,
                           std::vector<double> checkpoints, std::size_t samples,
                           std::uint64_t root_seed, unsigned threads = 1);

} // namespace ctoqw
