// trajectory.cpp
//
// Between jumps the unnormalized state follows sigma(s) = G(s) rho G(s)^*
// with G(s) = exp(s D0), and Tr sigma(s) is the survival probability of the
// current holding time. Jump times are drawn by inverting that survival
// function; the flow is advanced on a fixed grid with the exact propagator
// and the crossing is refined by safeguarded Newton iteration.

#include "ctoqw/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace ctoqw {

namespace {

constexpr double kStateTol = 1e-9;
constexpr double kRateFloor = 1e-14;

void check_density(const CMatrix& rho, Index n, const char* what)
{
    if (rho.rows() != n || rho.cols() != n) {
        throw std::invalid_argument(std::string(what) + ": state has wrong shape");
    }
    if (!is_hermitian(rho, kStateTol) || !is_psd(rho, kStateTol) ||
        std::abs(rho.trace().real() - 1.0) > kStateTol) {
        throw std::invalid_argument(std::string(what) + ": not a density matrix");
    }
}

CMatrix normalized(const CMatrix& sigma)
{
    CMatrix rho = hermitian_part(sigma);
    rho /= rho.trace().real();
    return rho;
}

// Pairwise sum of m[first, last), deterministic for a given range.
CMatrix pairwise_sum(const std::vector<CMatrix>& m, std::size_t first, std::size_t last)
{
    if (last - first == 1) return m[first];
    const std::size_t mid = first + (last - first) / 2;
    return pairwise_sum(m, first, mid) + pairwise_sum(m, mid, last);
}

} // namespace

InitialCondition InitialCondition::localized(const Site& x, const CMatrix& rho)
{
    InitialCondition init;
    init.components.emplace_back(x, rho);
    return init;
}

InitialCondition InitialCondition::from_lattice(const LatticeState& state)
{
    InitialCondition init;
    for (const auto& [site, rho] : state.sites) init.components.emplace_back(site, rho);
    return init;
}

TrajectorySampler::TrajectorySampler(const WalkModel& model, SamplerOptions options)
    : model_(model), time_tol_(options.time_tol)
{
    const double rate = model_.max_rate();
    grid_step_ = options.grid_step > 0.0 ? options.grid_step
                                         : 0.1 / std::max(rate, 1e-3);
    grid_prop_ = matrix_exponential(model_.d0(), grid_step_);
    half_grid_prop_ = matrix_exponential(model_.d0(), 0.5 * grid_step_);
    decay_ = model_.d0() + model_.d0().adjoint();
    for (const auto& j : model_.jumps()) rate_ops_.push_back(j.adjoint() * j);
}

double TrajectorySampler::survival(const CMatrix& rho, double s) const
{
    const CMatrix g = matrix_exponential(model_.d0(), s);
    return (g * rho * g.adjoint()).trace().real();
}

TrajectorySampler::Flow TrajectorySampler::flow(const CMatrix& rho_in, double u, double t_cap,
                                                CMatrix& occupation) const
{
    CMatrix rho = rho_in;
    double target = u;
    double s = 0.0;
    CMatrix g, gh, sigma, mid;
    for (;;) {
        const double step = std::min(grid_step_, t_cap - s);
        if (step <= 0.0) return {false, t_cap, rho};
        const bool full = step == grid_step_;
        g = full ? grid_prop_ : matrix_exponential(model_.d0(), step);
        sigma.noalias() = g * rho * g.adjoint();
        const double p = sigma.trace().real();

        if (p <= target) {
            // Crossing inside (0, step]: f(tau) = Tr sigma(tau) - target.
            double lo = 0.0, hi = step;
            double tau = step * (1.0 - target) / std::max(1.0 - p, 1e-300);
            tau = std::clamp(tau, 0.0, step);
            CMatrix gt;
            for (int iter = 0; iter < 200 && hi - lo > time_tol_; ++iter) {
                gt = matrix_exponential(model_.d0(), tau);
                sigma.noalias() = gt * rho * gt.adjoint();
                const double f = sigma.trace().real() - target;
                if (f > 0.0) lo = tau; else hi = tau;
                if (f == 0.0) break;
                const double df = (sigma * decay_).trace().real();
                double next = df < 0.0 ? tau - f / df : 0.5 * (lo + hi);
                if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
                if (std::abs(next - tau) <= 0.25 * time_tol_) {
                    tau = next;
                    break;
                }
                tau = next;
            }
            gt = matrix_exponential(model_.d0(), tau);
            const CMatrix end = normalized(gt * rho * gt.adjoint());
            gh = matrix_exponential(model_.d0(), 0.5 * tau);
            mid = normalized(gh * rho * gh.adjoint());
            occupation += (tau / 6.0) * (rho + 4.0 * mid + end);
            return {true, s + tau, end};
        }

        gh = full ? half_grid_prop_ : matrix_exponential(model_.d0(), 0.5 * step);
        mid = normalized(gh * rho * gh.adjoint());
        const CMatrix end = normalized(sigma);
        occupation += (step / 6.0) * (rho + 4.0 * mid + end);
        target /= p;
        rho = end;
        s += step;
        if (!full) return {false, t_cap, rho};
    }
}

std::optional<JumpTime> TrajectorySampler::sample_jump_time(const CMatrix& rho, double u,
                                                            double t_cap) const
{
    if (!(u > 0.0 && u < 1.0)) {
        throw std::invalid_argument("sample_jump_time: U must lie in (0, 1)");
    }
    if (!(t_cap >= 0.0) || !std::isfinite(t_cap)) {
        throw std::invalid_argument("sample_jump_time: t_cap must be finite and >= 0");
    }
    check_density(rho, model_.internal_dim(), "sample_jump_time");
    CMatrix occupation = CMatrix::Zero(rho.rows(), rho.cols());
    Flow f = flow(rho, u, t_cap, occupation);
    if (!f.jumped) return std::nullopt;
    return JumpTime{f.time, std::move(f.state)};
}

int TrajectorySampler::select_channel(const CMatrix& rho_pre, double v) const
{
    if (!(v >= 0.0 && v < 1.0)) {
        throw std::invalid_argument("select_channel: V must lie in [0, 1)");
    }
    std::vector<double> rates(rate_ops_.size());
    double total = 0.0;
    for (std::size_t r = 0; r < rate_ops_.size(); ++r) {
        rates[r] = std::max(0.0, (rate_ops_[r] * rho_pre).trace().real());
        total += rates[r];
    }
    if (total <= kRateFloor) {
        throw std::runtime_error("select_channel: total jump rate vanishes (absorbing state)");
    }
    const double threshold = v * total;
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t r = 0; r < rates.size(); ++r) {
        if (rates[r] <= 0.0) continue;
        last_positive = static_cast<int>(r);
        acc += rates[r];
        if (threshold < acc) return static_cast<int>(r);
    }
    return last_positive;
}

CMatrix TrajectorySampler::apply_jump(const CMatrix& rho_pre, int r) const
{
    if (r < 0 || r >= model_.channel_count()) {
        throw std::invalid_argument("apply_jump: channel out of range");
    }
    const CMatrix& j = model_.jump(r);
    const CMatrix out = j * rho_pre * j.adjoint();
    const double w = out.trace().real();
    if (w <= kRateFloor) {
        throw std::runtime_error("apply_jump: vanishing channel weight");
    }
    return hermitian_part(out) / w;
}

struct TrajectorySampler::Run {
    std::vector<JumpEvent>* events = nullptr;
    std::vector<Site> positions;
    Site position;
    CMatrix state;
    CMatrix occupation;
    CMatrix initial_state;
    Site initial_position;
    bool absorbed = false;
};

void TrajectorySampler::run(Run& out, const InitialCondition& init, double t_max,
                            std::span<const double> checkpoints, Philox4x32& rng) const
{
    if (!(t_max >= 0.0) || !std::isfinite(t_max)) {
        throw std::invalid_argument("sample_path: t_max must be finite and >= 0");
    }
    if (init.components.empty()) {
        throw std::invalid_argument("sample_path: empty initial condition");
    }
    const Index n = model_.internal_dim();
    const auto d = static_cast<std::size_t>(model_.lattice_dim());

    // Initial site drawn with probability Tr rho(i).
    std::size_t pick = 0;
    if (init.components.size() > 1) {
        double total = 0.0;
        for (const auto& c : init.components) total += c.second.trace().real();
        const double threshold = rng.uniform() * total;
        double acc = 0.0;
        for (pick = 0; pick + 1 < init.components.size(); ++pick) {
            acc += init.components[pick].second.trace().real();
            if (threshold < acc) break;
        }
    }
    const auto& [x0, raw] = init.components[pick];
    if (x0.size() != d) throw std::invalid_argument("sample_path: site has wrong dimension");
    const double weight = raw.trace().real();
    if (!(weight > 0.0)) throw std::invalid_argument("sample_path: initial component has no mass");
    const CMatrix rho0 = raw / weight;
    check_density(rho0, n, "sample_path");

    out.initial_state = rho0;
    out.initial_position = x0;
    out.state = rho0;
    out.position = x0;
    out.occupation = CMatrix::Zero(n, n);
    out.positions.clear();

    std::size_t next_checkpoint = 0;
    double t = 0.0;
    for (;;) {
        const double u = rng.uniform();
        Flow f = flow(out.state, u, t_max - t, out.occupation);
        if (!f.jumped) {
            out.state = std::move(f.state);
            double total = 0.0;
            for (const auto& op : rate_ops_) total += (op * out.state).trace().real();
            out.absorbed = total <= kRateFloor;
            break;
        }
        const double jump_time = t + f.time;
        while (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] < jump_time) {
            out.positions.push_back(out.position);
            ++next_checkpoint;
        }
        const int r = select_channel(f.state, rng.uniform());
        out.state = apply_jump(f.state, r);
        out.position = model_.step(out.position, r);
        t = jump_time;
        if (out.events) out.events->push_back({t, r, out.position, out.state});
    }
    while (next_checkpoint < checkpoints.size()) {
        out.positions.push_back(out.position);
        ++next_checkpoint;
    }
}

TrajectoryPath TrajectorySampler::sample_path(const InitialCondition& init, double t_max,
                                              Philox4x32& rng) const
{
    TrajectoryPath path;
    Run r;
    r.events = &path.events;
    run(r, init, t_max, {}, rng);
    path.initial_state = std::move(r.initial_state);
    path.initial_position = std::move(r.initial_position);
    path.final_time = t_max;
    path.final_state = std::move(r.state);
    path.final_position = std::move(r.position);
    path.occupation_average = t_max > 0.0 ? CMatrix(r.occupation / t_max) : path.initial_state;
    path.absorbed = r.absorbed;
    return path;
}

TrajectoryPath TrajectorySampler::sample_path(const CMatrix& rho0, const Site& x0, double t_max,
                                              std::uint64_t seed) const
{
    Philox4x32 rng(seed, 0);
    return sample_path(InitialCondition::localized(x0, rho0), t_max, rng);
}

TrajectorySampler::Summary TrajectorySampler::simulate(const InitialCondition& init, double t_max,
                                                       std::span<const double> checkpoints,
                                                       Philox4x32& rng) const
{
    Run r;
    run(r, init, t_max, checkpoints, rng);
    return {std::move(r.positions), std::move(r.occupation), r.absorbed};
}

EnsembleStats run_ensemble(const WalkModel& model, const InitialCondition& init, double t_max,
                           std::vector<double> checkpoints, std::size_t samples,
                           std::uint64_t root_seed, unsigned threads)
{
    if (samples < 1) throw std::invalid_argument("run_ensemble: need at least one sample");
    for (double c : checkpoints) {
        if (!(c >= 0.0 && c <= t_max)) {
            throw std::invalid_argument("run_ensemble: checkpoints must lie in [0, t_max]");
        }
    }
    std::sort(checkpoints.begin(), checkpoints.end());

    const TrajectorySampler sampler(model);
    const Index n = model.internal_dim();
    const std::size_t cps = checkpoints.size();
    std::vector<Site> positions(samples * cps);
    std::vector<CMatrix> occupation(samples);
    std::vector<char> absorbed(samples, 0);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&]() {
        try {
            for (std::size_t k = next++; k < samples && !failed; k = next++) {
                Philox4x32 rng(root_seed, k);
                auto summary = sampler.simulate(init, t_max, checkpoints, rng);
                for (std::size_t c = 0; c < cps; ++c) {
                    positions[k * cps + c] = std::move(summary.positions[c]);
                }
                occupation[k] = t_max > 0.0 ? CMatrix(summary.occupation_integral / t_max)
                                            : CMatrix::Zero(n, n);
                absorbed[k] = summary.absorbed ? 1 : 0;
            }
        } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(samples)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    EnsembleStats stats;
    stats.samples = samples;
    const Index d = model.lattice_dim();
    for (std::size_t c = 0; c < cps; ++c) {
        std::map<Site, std::size_t> counts;
        for (std::size_t k = 0; k < samples; ++k) ++counts[positions[k * cps + c]];

        CheckpointStats cs;
        cs.time = checkpoints[c];
        cs.mean = RVector::Zero(d);
        cs.covariance = RMatrix::Zero(d, d);
        const double total = static_cast<double>(samples);
        for (const auto& [site, count] : counts) {
            cs.histogram.emplace(site, static_cast<double>(count) / total);
            for (Index a = 0; a < d; ++a) cs.mean(a) += static_cast<double>(count) * site[a];
        }
        cs.mean /= total;
        if (samples > 1) {
            for (const auto& [site, count] : counts) {
                RVector dx(d);
                for (Index a = 0; a < d; ++a) dx(a) = site[a] - cs.mean(a);
                cs.covariance += static_cast<double>(count) * dx * dx.transpose();
            }
            cs.covariance /= total - 1.0;
        }
        stats.checkpoints.push_back(std::move(cs));
    }
    if (t_max > 0.0) {
        stats.mean_occupation = pairwise_sum(occupation, 0, samples) / static_cast<double>(samples);
    } else {
        stats.mean_occupation = CMatrix::Zero(n, n);
    }
    for (char a : absorbed) stats.absorbed_paths += a ? 1 : 0;
    return stats;
}

} // namespace ctoqw
