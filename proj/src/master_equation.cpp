// master_equation.cpp
//
// The lattice is held as a dense box: the bounding box of the support padded
// by four layers, the reach of one RK4 step. Site matrices are columns of an
// n^2 x W matrix, so the generator is one local superoperator plus one shifted
// superoperator per channel.

#include "ctoqw/master_equation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace ctoqw {

namespace {

constexpr std::int64_t kPadding = 4;

class Window {
public:
    Window(int d, Index n) : d_(d), n_(n), lo_(d, 0), extent_(d, 1), stride_(d, 1) {}

    void fit(const std::vector<Site>& support)
    {
        std::vector<std::int64_t> lo(d_), hi(d_);
        for (int a = 0; a < d_; ++a) {
            lo[a] = support.front()[a];
            hi[a] = support.front()[a];
        }
        for (const auto& s : support) {
            for (int a = 0; a < d_; ++a) {
                lo[a] = std::min(lo[a], s[a]);
                hi[a] = std::max(hi[a], s[a]);
            }
        }
        for (int a = 0; a < d_; ++a) {
            lo[a] -= kPadding;
            hi[a] += kPadding;
        }
        bool same = data_.cols() != 0;
        for (int a = 0; a < d_ && same; ++a) {
            same = lo[a] == lo_[a] && hi[a] - lo[a] + 1 == extent_[a];
        }
        if (same) return;

        std::vector<std::int64_t> extent(d_), stride(d_);
        Index total = 1;
        for (int a = d_ - 1; a >= 0; --a) {
            extent[a] = hi[a] - lo[a] + 1;
            stride[a] = total;
            total *= extent[a];
        }
        CMatrix next = CMatrix::Zero(n_ * n_, total);
        if (data_.cols() > 0) {
            for (Index j = 0; j < data_.cols(); ++j) {
                if (data_.col(j).isZero(0.0)) continue;
                const Site s = site(j);
                Index k = 0;
                bool inside = true;
                for (int a = 0; a < d_; ++a) {
                    const std::int64_t c = s[a] - lo[a];
                    if (c < 0 || c >= extent[a]) {
                        inside = false;
                        break;
                    }
                    k += c * stride[a];
                }
                if (inside) next.col(k) = data_.col(j);
            }
        }
        lo_ = lo;
        extent_ = extent;
        stride_ = stride;
        data_ = std::move(next);
    }

    Site site(Index j) const
    {
        Site s(d_);
        for (int a = 0; a < d_; ++a) {
            s[a] = lo_[a] + (j / stride_[a]) % extent_[a];
        }
        return s;
    }

    Index column(const Site& s) const
    {
        Index k = 0;
        for (int a = 0; a < d_; ++a) k += (s[a] - lo_[a]) * stride_[a];
        return k;
    }

    // Column offset of a move along `axis` by `sign`.
    Index offset(int axis, int sign) const { return sign * stride_[axis]; }

    CMatrix& data() { return data_; }
    const CMatrix& data() const { return data_; }

private:
    int d_;
    Index n_;
    std::vector<std::int64_t> lo_, extent_, stride_;
    CMatrix data_;
};

struct Generator {
    CMatrix local;                // vec(D0 rho + rho D0^*)
    std::vector<CMatrix> channel; // vec(D_r rho D_r^*)
    std::vector<std::pair<int, int>> move;

    explicit Generator(const WalkModel& model)
    {
        const Index n = model.internal_dim();
        const CMatrix id = CMatrix::Identity(n, n);
        local = Superoperator::sandwich(model.d0(), id).matrix +
                Superoperator::sandwich(id, model.d0()).matrix;
        for (int r = 0; r < model.channel_count(); ++r) {
            channel.push_back(Superoperator::sandwich(model.jump(r), model.jump(r)).matrix);
            move.emplace_back(model.axis(r), model.sign(r));
        }
    }

    void apply(const Window& w, const CMatrix& y, CMatrix& out, CMatrix& scratch) const
    {
        out.noalias() = local * y;
        const Index cols = y.cols();
        for (std::size_t r = 0; r < channel.size(); ++r) {
            scratch.noalias() = channel[r] * y;
            const Index s = w.offset(move[r].first, move[r].second);
            const Index len = cols - std::abs(s);
            if (len <= 0) continue;
            // Edge columns of the padded box carry no mass in any stage, so
            // the linear shift never moves real mass across a box edge.
            if (s > 0) {
                out.middleCols(s, len) += scratch.leftCols(len);
            } else {
                out.leftCols(len) += scratch.middleCols(-s, len);
            }
        }
    }
};

double column_trace(const CMatrix& data, Index j, Index n)
{
    double tr = 0.0;
    for (Index k = 0; k < n; ++k) tr += data(k * n + k, j).real();
    return tr;
}

double column_min_eigenvalue(const CMatrix& data, Index j, Index n)
{
    if (n == 1) return data(0, j).real();
    if (n == 2) {
        const double a = data(0, j).real();
        const double d = data(3, j).real();
        const Complex b = 0.5 * (data(2, j) + std::conj(data(1, j)));
        return 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + std::norm(b));
    }
    return min_eigenvalue(devectorize(data.col(j), n));
}

void clamp_column(CMatrix& data, Index j, Index n)
{
    const CMatrix rho = hermitian_part(devectorize(data.col(j), n));
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
    const RVector vals = es.eigenvalues().cwiseMax(0.0);
    const CMatrix fixed = es.eigenvectors() * vals.cast<Complex>().asDiagonal() *
                          es.eigenvectors().adjoint();
    data.col(j) = vectorize(fixed);
}

} // namespace

LatticeState LatticeState::localized(const Site& x, const CMatrix& rho)
{
    if (x.empty()) throw std::invalid_argument("LatticeState: empty site");
    LatticeState s;
    s.d = static_cast<int>(x.size());
    s.sites.emplace(x, rho);
    return s;
}

double LatticeState::total_trace() const
{
    double tr = 0.0;
    for (const auto& [site, rho] : sites) tr += rho.trace().real();
    return tr;
}

double default_time_step(const WalkModel& model)
{
    const double rate = model.max_rate();
    return 1e-3 * (rate > 1.0 ? 1.0 / rate : 1.0);
}

LatticeState evolve(const WalkModel& model, const LatticeState& state, double t, double dt,
                    const EvolveOptions& options, EvolveReport* report)
{
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("evolve: t must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("evolve: dt must be > 0");
    if (state.d != model.lattice_dim()) {
        throw std::invalid_argument("evolve: state and model lattice dimensions differ");
    }
    const Index n = model.internal_dim();
    for (const auto& [site, rho] : state.sites) {
        if (site.size() != static_cast<std::size_t>(state.d) || rho.rows() != n || rho.cols() != n) {
            throw std::invalid_argument("evolve: state shape does not match model");
        }
    }
    if (t == 0.0 || state.sites.empty()) {
        LatticeState out = state;
        out.time += t;
        return out;
    }

    const auto steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t / dt - 1e-9)));
    const double h = t / static_cast<double>(steps);
    const Generator gen(model);

    std::vector<Site> support;
    support.reserve(state.sites.size());
    for (const auto& [site, rho] : state.sites) support.push_back(site);

    Window window(state.d, n);
    window.fit(support);
    for (const auto& [site, rho] : state.sites) {
        window.data().col(window.column(site)) = vectorize(rho);
    }

    double leaked = state.leaked_mass;
    EvolveReport rep;
    rep.steps = steps;
    CMatrix k1, k2, k3, k4, stage, scratch;

    for (std::size_t step = 0; step < steps; ++step) {
        CMatrix& y = window.data();
        const Index cols = y.cols();
        k1.resize(y.rows(), cols);
        k2.resize(y.rows(), cols);
        k3.resize(y.rows(), cols);
        k4.resize(y.rows(), cols);
        scratch.resize(y.rows(), cols);
        rep.max_window = std::max<std::size_t>(rep.max_window, static_cast<std::size_t>(cols));

        gen.apply(window, y, k1, scratch);
        stage = y + (0.5 * h) * k1;
        gen.apply(window, stage, k2, scratch);
        stage = y + (0.5 * h) * k2;
        gen.apply(window, stage, k3, scratch);
        stage = y + h * k3;
        gen.apply(window, stage, k4, scratch);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        if (!y.allFinite()) {
            std::ostringstream msg;
            msg << "evolve: non-finite values at t = " << state.time + (step + 1) * h
                << " (step " << h << " too large?)";
            throw std::runtime_error(msg.str());
        }

        support.clear();
        for (Index j = 0; j < cols; ++j) {
            const double tr = column_trace(y, j, n);
            if (y.col(j).isZero(0.0)) continue;
            const double low = column_min_eigenvalue(y, j, n);
            if (tr < options.prune_threshold && low >= -options.clamp_tol) {
                leaked += tr;
                y.col(j).setZero();
                continue;
            }
            if (low < 0.0) {
                if (low < -options.clamp_tol) {
                    std::ostringstream msg;
                    msg << "evolve: negative eigenvalue " << low << " at site column " << j
                        << ", t = " << state.time + (step + 1) * h;
                    throw std::runtime_error(msg.str());
                }
                clamp_column(y, j, n);
                ++rep.clamped;
                rep.max_clamped = std::max(rep.max_clamped, -low);
            }
            support.push_back(window.site(j));
        }
        if (support.empty()) break;
        window.fit(support);
    }

    LatticeState out;
    out.d = state.d;
    out.time = state.time + t;
    out.leaked_mass = leaked;
    for (const auto& s : support) {
        out.sites.emplace(s, hermitian_part(devectorize(window.data().col(window.column(s)), n)));
    }
    if (report) *report = rep;
    return out;
}

PositionDistribution site_distribution(const LatticeState& state)
{
    PositionDistribution q;
    q.d = state.d;
    q.time = state.time;
    q.leaked_mass = state.leaked_mass;
    for (const auto& [site, rho] : state.sites) {
        double w = rho.trace().real();
        if (w < 0.0 && w >= -1e-12) w = 0.0;
        q.weights.emplace(site, w);
    }
    return q;
}

Moments distribution_moments(const PositionDistribution& q)
{
    const Index d = q.d;
    Moments m{RVector::Zero(d), RMatrix::Zero(d, d)};
    double total = 0.0;
    for (const auto& [site, w] : q.weights) {
        total += w;
        for (Index a = 0; a < d; ++a) m.mean(a) += w * static_cast<double>(site[a]);
    }
    if (total <= 0.0) return m;
    m.mean /= total;
    for (const auto& [site, w] : q.weights) {
        RVector dx(d);
        for (Index a = 0; a < d; ++a) dx(a) = static_cast<double>(site[a]) - m.mean(a);
        m.covariance += w * dx * dx.transpose();
    }
    m.covariance /= total;
    return m;
}

double total_variation(const std::map<Site, double>& p, const std::map<Site, double>& q)
{
    double sum = 0.0;
    auto a = p.begin();
    auto b = q.begin();
    while (a != p.end() || b != q.end()) {
        if (b == q.end() || (a != p.end() && a->first < b->first)) {
            sum += std::abs(a->second);
            ++a;
        } else if (a == p.end() || b->first < a->first) {
            sum += std::abs(b->second);
            ++b;
        } else {
            sum += std::abs(a->second - b->second);
            ++a;
            ++b;
        }
    }
    return 0.5 * sum;
}

} // namespace ctoqw
