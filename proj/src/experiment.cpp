// experiment.cpp

#include "ctoqw/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

#include "ctoqw/builtin_models.hpp"
#include "ctoqw/csv.hpp"
#include "ctoqw/master_equation.hpp"
#include "ctoqw/spectral.hpp"
#include "ctoqw/trajectory.hpp"

namespace ctoqw {

using Json = nlohmann::ordered_json;

namespace {

const std::vector<std::pair<ExperimentKind, const char*>> kKindNames = {
    {ExperimentKind::validate, "validate"},
    {ExperimentKind::master, "master"},
    {ExperimentKind::sample, "sample"},
    {ExperimentKind::clt, "clt"},
    {ExperimentKind::ldp, "ldp"},
    {ExperimentKind::reproduce_example, "reproduce-example"},
};

std::string join(const std::vector<std::string>& parts, const char* sep)
{
    std::string out;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        if (k) out += sep;
        out += parts[k];
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON reading with error collection

struct Errors {
    std::vector<std::string> list;
    void add(std::string msg) { list.push_back(std::move(msg)); }
    bool empty() const { return list.empty(); }
};

std::optional<double> read_real(const Json& j, const std::string& field, Errors& err)
{
    if (!j.is_number()) {
        err.add(field + ": expected a number");
        return std::nullopt;
    }
    const double x = j.get<double>();
    if (!std::isfinite(x)) {
        err.add(field + ": must be finite");
        return std::nullopt;
    }
    return x;
}

std::optional<std::uint64_t> read_count(const Json& j, const std::string& field, Errors& err)
{
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
        err.add(field + ": expected a non-negative integer");
        return std::nullopt;
    }
    return j.get<std::uint64_t>();
}

std::optional<std::vector<double>> read_reals(const Json& j, const std::string& field, Errors& err)
{
    if (!j.is_array()) {
        err.add(field + ": expected an array of numbers");
        return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t k = 0; k < j.size(); ++k) {
        auto x = read_real(j[k], field + "[" + std::to_string(k) + "]", err);
        if (x) out.push_back(*x);
        else ok = false;
    }
    if (!ok) return std::nullopt;
    return out;
}

// Matrix: array of rows, each row an array of [re, im] pairs.
std::optional<CMatrix> read_matrix(const Json& j, const std::string& field, Errors& err)
{
    if (!j.is_array() || j.empty()) {
        err.add(field + ": expected a non-empty array of rows of [re, im] pairs");
        return std::nullopt;
    }
    const std::size_t rows = j.size();
    std::size_t cols = 0;
    bool ok = true;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array()) {
            err.add(field + ": row " + std::to_string(r) + " is not an array");
            return std::nullopt;
        }
        if (r == 0) cols = j[r].size();
        if (j[r].size() != cols) {
            err.add(field + ": ragged rows (row 0 has " + std::to_string(cols) + " entries, row " +
                    std::to_string(r) + " has " + std::to_string(j[r].size()) + ")");
            return std::nullopt;
        }
    }
    if (rows != cols) {
        err.add(field + ": expected a square matrix, got " + std::to_string(rows) + "x" +
                std::to_string(cols));
        return std::nullopt;
    }
    CMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const Json& e = j[r][c];
            const std::string where = field + "[" + std::to_string(r) + "][" + std::to_string(c) + "]";
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
                err.add(where + ": complex entries are written [re, im]");
                ok = false;
                continue;
            }
            const double re = e[0].get<double>();
            const double im = e[1].get<double>();
            if (!std::isfinite(re) || !std::isfinite(im)) {
                err.add(where + ": entry must be finite");
                ok = false;
                continue;
            }
            m(static_cast<Index>(r), static_cast<Index>(c)) = Complex(re, im);
        }
    }
    if (!ok) return std::nullopt;
    return m;
}

Json write_matrix(const CMatrix& m)
{
    Json rows = Json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

struct ParsedModel {
    std::optional<WalkModel> model;
    int example = 0;
    bool from_drift = false;
};

ParsedModel read_model(const Json& j, Errors& err)
{
    ParsedModel out;
    if (!j.is_object()) {
        err.add("model: expected an object");
        return out;
    }
    static const std::set<std::string> known = {"example", "d", "n", "H", "D0", "jumps"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) err.add("model." + key + ": unknown field");
    }
    if (j.contains("example")) {
        if (j.size() != 1) err.add("model: 'example' excludes explicit matrices");
        const auto idx = read_count(j["example"], "model.example", err);
        if (idx && !builtin::has_example(static_cast<int>(*idx))) {
            err.add("model.example: no built-in example " + std::to_string(*idx) + " (have 1, 2, 3)");
        } else if (idx && j.size() == 1) {
            out.example = static_cast<int>(*idx);
            out.model = builtin::example(out.example);
        }
        return out;
    }

    std::optional<std::uint64_t> d;
    if (!j.contains("d")) err.add("model.d: required");
    else d = read_count(j["d"], "model.d", err);
    if (d && *d == 0) {
        err.add("model.d: must be at least 1");
        d.reset();
    }
    std::optional<std::uint64_t> n;
    if (j.contains("n")) {
        n = read_count(j["n"], "model.n", err);
        if (n && *n == 0) err.add("model.n: must be at least 1");
    }

    const bool has_h = j.contains("H");
    const bool has_d0 = j.contains("D0");
    if (has_h == has_d0) err.add("model: give exactly one of 'H' and 'D0'");
    std::optional<CMatrix> base;
    const std::string base_name = has_h ? "model.H" : "model.D0";
    if (has_h != has_d0) base = read_matrix(has_h ? j["H"] : j["D0"], base_name, err);

    std::vector<CMatrix> jumps;
    bool jumps_ok = true;
    if (!j.contains("jumps") || !j["jumps"].is_array()) {
        err.add("model.jumps: required array of 2d jump matrices");
        jumps_ok = false;
    } else {
        const Json& js = j["jumps"];
        if (d && js.size() != 2 * *d) {
            err.add("model.jumps: expected " + std::to_string(2 * *d) + " matrices for d = " +
                    std::to_string(*d) + ", got " + std::to_string(js.size()));
            jumps_ok = false;
        }
        for (std::size_t r = 0; r < js.size(); ++r) {
            auto m = read_matrix(js[r], "model.jumps[" + std::to_string(r) + "] (D_" +
                                            std::to_string(r + 1) + ")", err);
            if (m) jumps.push_back(std::move(*m));
            else jumps_ok = false;
        }
    }

    // Dimension consistency against n, or against the first matrix present.
    Index dim = n ? static_cast<Index>(*n) : (base ? base->rows() : (jumps.empty() ? 0 : jumps[0].rows()));
    if (base && base->rows() != dim) {
        err.add(base_name + ": is " + std::to_string(base->rows()) + "x" + std::to_string(base->cols()) +
                ", expected " + std::to_string(dim) + "x" + std::to_string(dim));
        base.reset();
    }
    if (jumps_ok) {
        for (std::size_t r = 0; r < jumps.size(); ++r) {
            if (jumps[r].rows() != dim) {
                err.add("model.jumps[" + std::to_string(r) + "] (D_" + std::to_string(r + 1) + "): is " +
                        std::to_string(jumps[r].rows()) + "x" + std::to_string(jumps[r].cols()) +
                        ", expected " + std::to_string(dim) + "x" + std::to_string(dim));
                jumps_ok = false;
            }
        }
    }
    if (!d || !base || !jumps_ok || !err.empty()) return out;
    try {
        out.from_drift = has_d0;
        out.model = has_h ? WalkModel::from_hamiltonian(static_cast<int>(*d), *base, std::move(jumps))
                          : WalkModel::from_drift(static_cast<int>(*d), *base, std::move(jumps));
    } catch (const std::exception& e) {
        err.add(std::string("model: ") + e.what());
    }
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t points)
{
    std::vector<double> out;
    if (points == 1) return {lo};
    for (std::size_t k = 0; k < points; ++k) {
        out.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1));
    }
    return out;
}

// Tensor grid, first axis fastest.
std::vector<std::vector<double>> tensor_grid(const std::vector<std::vector<double>>& axes)
{
    std::vector<std::vector<double>> out;
    std::vector<std::size_t> idx(axes.size(), 0);
    if (axes.empty()) return out;
    for (const auto& a : axes) {
        if (a.empty()) return out;
    }
    for (;;) {
        std::vector<double> p(axes.size());
        for (std::size_t a = 0; a < axes.size(); ++a) p[a] = axes[a][idx[a]];
        out.push_back(std::move(p));
        std::size_t a = 0;
        for (; a < axes.size(); ++a) {
            if (++idx[a] < axes[a].size()) break;
            idx[a] = 0;
        }
        if (a == axes.size()) break;
    }
    return out;
}

// Grid: list of points (numbers when d = 1), or {"lower", "upper", "points"}.
std::optional<std::vector<std::vector<double>>> read_grid(const Json& j, const std::string& field,
                                                          std::size_t d, Errors& err)
{
    if (j.is_object()) {
        std::optional<std::vector<double>> lo, hi;
        if (j.contains("lower")) lo = read_reals(j["lower"], field + ".lower", err);
        if (j.contains("upper")) hi = read_reals(j["upper"], field + ".upper", err);
        if (!j.contains("lower") || !j.contains("upper") || !j.contains("points")) {
            err.add(field + ": range form needs 'lower', 'upper' and 'points'");
            return std::nullopt;
        }
        const auto pts = read_count(j["points"], field + ".points", err);
        if (!lo || !hi || !pts) return std::nullopt;
        if (lo->size() != d || hi->size() != d) {
            err.add(field + ": bounds need " + std::to_string(d) + " components");
            return std::nullopt;
        }
        if (*pts == 0) {
            err.add(field + ".points: must be positive");
            return std::nullopt;
        }
        std::vector<std::vector<double>> axes;
        for (std::size_t a = 0; a < d; ++a) axes.push_back(linspace((*lo)[a], (*hi)[a], *pts));
        return tensor_grid(axes);
    }
    if (!j.is_array()) {
        err.add(field + ": expected a list of points or a range object");
        return std::nullopt;
    }
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const std::string where = field + "[" + std::to_string(k) + "]";
        if (j[k].is_number() && d == 1) {
            auto x = read_real(j[k], where, err);
            if (!x) return std::nullopt;
            out.push_back({*x});
            continue;
        }
        auto p = read_reals(j[k], where, err);
        if (!p) return std::nullopt;
        if (p->size() != d) {
            err.add(where + ": expected " + std::to_string(d) + " components");
            return std::nullopt;
        }
        out.push_back(std::move(*p));
    }
    return out;
}

std::optional<double> read_bound(const Json& j, const std::string& field, double infinite, Errors& err)
{
    if (j.is_null()) return infinite;
    return read_real(j, field, err);
}

std::optional<LdpRegionConfig> read_ldp(const Json& j, std::size_t d, Errors& err)
{
    if (!j.is_object()) {
        err.add("ldp: expected an object");
        return std::nullopt;
    }
    static const std::set<std::string> known = {"lower", "upper", "times", "samples"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) err.add("ldp." + key + ": unknown field");
    }
    LdpRegionConfig out;
    out.region.lower = RVector::Constant(static_cast<Index>(d), -std::numeric_limits<double>::infinity());
    out.region.upper = RVector::Constant(static_cast<Index>(d), std::numeric_limits<double>::infinity());
    bool ok = true;
    for (const char* side : {"lower", "upper"}) {
        if (!j.contains(side)) continue;
        const Json& b = j[side];
        const std::string field = std::string("ldp.") + side;
        if (!b.is_array() || b.size() != d) {
            err.add(field + ": expected " + std::to_string(d) + " bounds (null for unbounded)");
            ok = false;
            continue;
        }
        const double inf = side[0] == 'l' ? -std::numeric_limits<double>::infinity()
                                          : std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < d; ++a) {
            auto x = read_bound(b[a], field + "[" + std::to_string(a) + "]", inf, err);
            if (!x) {
                ok = false;
                continue;
            }
            (side[0] == 'l' ? out.region.lower : out.region.upper)(static_cast<Index>(a)) = *x;
        }
    }
    if (ok && (out.region.lower.array() > out.region.upper.array()).any()) {
        err.add("ldp: lower bound exceeds upper bound");
        ok = false;
    }
    if (j.contains("times")) {
        auto t = read_reals(j["times"], "ldp.times", err);
        if (t) {
            for (double x : *t) {
                if (!(x > 0.0)) {
                    err.add("ldp.times: times must be positive");
                    ok = false;
                    break;
                }
            }
            out.times = *t;
            std::sort(out.times.begin(), out.times.end());
        } else {
            ok = false;
        }
    }
    if (j.contains("samples")) {
        auto n = read_count(j["samples"], "ldp.samples", err);
        if (n) out.samples = *n;
        else ok = false;
    }
    if (out.samples > 0 && out.times.empty()) {
        err.add("ldp.times: required when ldp.samples > 0");
        ok = false;
    }
    if (!ok) return std::nullopt;
    return out;
}

Json grid_json(const std::vector<std::vector<double>>& grid)
{
    Json out = Json::array();
    for (const auto& p : grid) {
        if (p.size() == 1) out.push_back(p[0]);
        else out.push_back(p);
    }
    return out;
}

Json bound_json(double x)
{
    if (std::isinf(x)) return nullptr;
    return x;
}

// Defaults for the reproduction runs: master snapshots and horizon per example.
std::vector<double> example_snapshot_times(int example)
{
    if (example == 3) return {0.0, 3.0, 8.0, 18.0};
    std::vector<double> t;
    for (int k = 0; k <= 20; ++k) t.push_back(static_cast<double>(k));
    return t;
}

// ---------------------------------------------------------------------------
// Output bookkeeping

class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir))
    {
        if (!std::filesystem::exists(dir_)) {
            std::filesystem::create_directories(dir_);
            created_dir_ = true;
        } else if (!std::filesystem::is_directory(dir_)) {
            throw std::runtime_error("output path " + dir_.string() + " is not a directory");
        }
    }

    void write(const std::string& name, const Table& table)
    {
        const auto path = dir_ / name;
        if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(name);
        emit_csv(table, path);
    }

    void write_text(const std::string& name, const std::string& text)
    {
        const auto path = dir_ / name;
        if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(name);
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
        f << text;
        f.close();
        if (!f) throw std::runtime_error("write failed for " + path.string());
    }

    const std::vector<std::string>& names() const { return names_; }
    const std::filesystem::path& dir() const { return dir_; }

    void discard() noexcept
    {
        std::error_code ec;
        for (const auto& n : names_) std::filesystem::remove(dir_ / n, ec);
        if (created_dir_ && std::filesystem::is_empty(dir_, ec)) std::filesystem::remove(dir_, ec);
    }

private:
    std::filesystem::path dir_;
    std::vector<std::string> names_;
    bool created_dir_ = false;
};

void in_module(const char* module, const std::function<void()>& body)
{
    try {
        body();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(module) + ": " + e.what());
    }
}

std::vector<std::string> axis_names(const std::string& prefix, int d)
{
    std::vector<std::string> out;
    for (int a = 1; a <= d; ++a) out.push_back(prefix + std::to_string(a));
    return out;
}

std::vector<std::string> pair_names(const std::string& prefix, int d)
{
    std::vector<std::string> out;
    for (int a = 1; a <= d; ++a) {
        for (int b = 1; b <= d; ++b) out.push_back(prefix + std::to_string(a) + "_" + std::to_string(b));
    }
    return out;
}

Table matrix_table(const CMatrix& m)
{
    Table t{{"row", "col", "re", "im"}, {}};
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            t.add_row({static_cast<double>(r), static_cast<double>(c), m(r, c).real(), m(r, c).imag()});
        }
    }
    return t;
}

void append_site(std::vector<double>& row, const Site& x)
{
    for (auto v : x) row.push_back(static_cast<double>(v));
}

void append_matrix(std::vector<double>& row, const RMatrix& m)
{
    for (Index a = 0; a < m.rows(); ++a) {
        for (Index b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
    }
}

// ---------------------------------------------------------------------------
// Experiments

void run_validate(const ExperimentConfig& c, OutputSet& out)
{
    const WalkModel& model = *c.model;
    StationaryReport st;
    IrreducibilityReport irr;
    in_module("spectral-analysis", [&] {
        st = stationary_state(model);
        irr = irreducibility_check(model);
    });
    Table t{{"lindblad_residual", "max_rate", "kernel_dim", "h1_holds", "stationary_residual",
             "stationary_positive", "irreducible", "algebra_dim"},
            {}};
    t.add_row({model.lindblad_residual(), model.max_rate(), static_cast<double>(st.kernel_dim),
               st.h1_holds ? 1.0 : 0.0, st.residual, st.positive ? 1.0 : 0.0,
               irr.irreducible ? 1.0 : 0.0, static_cast<double>(irr.algebra_dim)});
    out.write("validation.csv", t);
    if (st.rho_inv) out.write("stationary_state.csv", matrix_table(*st.rho_inv));
}

void run_master(const ExperimentConfig& c, OutputSet& out)
{
    const WalkModel& model = *c.model;
    const int d = model.lattice_dim();
    std::vector<std::string> dist_header{"t"};
    for (auto& s : axis_names("i_", d)) dist_header.push_back(s);
    dist_header.push_back("weight");
    Table dist{dist_header, {}};

    std::vector<std::string> mom_header{"t", "total_weight", "leaked_mass"};
    for (auto& s : axis_names("mean_", d)) mom_header.push_back(s);
    for (auto& s : pair_names("cov_", d)) mom_header.push_back(s);
    Table moments{mom_header, {}};

    in_module("master-equation", [&] {
        LatticeState state = LatticeState::localized(c.initial_site, c.initial_state);
        for (double t : c.times) {
            if (t > state.time) state = evolve(model, state, t - state.time, c.dt);
            const PositionDistribution q = site_distribution(state);
            double total = 0.0;
            for (const auto& [site, w] : q.weights) {
                std::vector<double> row{t};
                append_site(row, site);
                row.push_back(w);
                dist.add_row(std::move(row));
                total += w;
            }
            const Moments mo = distribution_moments(q);
            std::vector<double> row{t, total, q.leaked_mass};
            for (Index a = 0; a < mo.mean.size(); ++a) row.push_back(mo.mean(a));
            append_matrix(row, mo.covariance);
            moments.add_row(std::move(row));
        }
    });
    out.write("distribution.csv", dist);
    out.write("distribution_moments.csv", moments);
}

void run_sample(const ExperimentConfig& c, OutputSet& out)
{
    const WalkModel& model = *c.model;
    const int d = model.lattice_dim();
    const Index n = model.internal_dim();
    const InitialCondition init = InitialCondition::localized(c.initial_site, c.initial_state);
    EnsembleStats stats;
    std::vector<TrajectoryPath> paths;
    in_module("trajectory-sim", [&] {
        stats = run_ensemble(model, init, c.t_max, c.checkpoints, c.samples, c.seed, c.threads);
        const TrajectorySampler sampler(model);
        for (std::size_t k = 0; k < c.export_paths; ++k) {
            Philox4x32 rng(c.seed, k);
            paths.push_back(sampler.sample_path(init, c.t_max, rng));
        }
    });

    std::vector<std::string> hist_header{"t"};
    for (auto& s : axis_names("i_", d)) hist_header.push_back(s);
    hist_header.push_back("probability");
    Table hist{hist_header, {}};
    std::vector<std::string> mom_header{"t", "samples"};
    for (auto& s : axis_names("mean_", d)) mom_header.push_back(s);
    for (auto& s : pair_names("cov_", d)) mom_header.push_back(s);
    Table moments{mom_header, {}};
    for (const auto& cp : stats.checkpoints) {
        for (const auto& [site, p] : cp.histogram) {
            std::vector<double> row{cp.time};
            append_site(row, site);
            row.push_back(p);
            hist.add_row(std::move(row));
        }
        std::vector<double> row{cp.time, static_cast<double>(stats.samples)};
        for (Index a = 0; a < cp.mean.size(); ++a) row.push_back(cp.mean(a));
        append_matrix(row, cp.covariance);
        moments.add_row(std::move(row));
    }
    out.write("ensemble_histogram.csv", hist);
    out.write("ensemble_moments.csv", moments);
    out.write("occupation_average.csv", matrix_table(stats.mean_occupation));

    if (!paths.empty()) {
        std::vector<std::string> header{"path", "time", "channel"};
        for (auto& s : axis_names("i_", d)) header.push_back(s);
        for (Index r = 0; r < n; ++r) {
            for (Index col = 0; col < n; ++col) {
                const std::string e = "rho_" + std::to_string(r) + "_" + std::to_string(col);
                header.push_back(e + "_re");
                header.push_back(e + "_im");
            }
        }
        Table table{header, {}};
        auto add = [&](std::size_t k, double t, int channel, const Site& x, const CMatrix& rho) {
            std::vector<double> row{static_cast<double>(k), t, static_cast<double>(channel)};
            append_site(row, x);
            for (Index r = 0; r < n; ++r) {
                for (Index col = 0; col < n; ++col) {
                    row.push_back(rho(r, col).real());
                    row.push_back(rho(r, col).imag());
                }
            }
            table.add_row(std::move(row));
        };
        for (std::size_t k = 0; k < paths.size(); ++k) {
            const auto& p = paths[k];
            add(k, 0.0, -1, p.initial_position, p.initial_state);
            for (const auto& e : p.events) add(k, e.time, e.channel, e.position, e.state);
            add(k, p.final_time, -1, p.final_position, p.final_state);
        }
        out.write("paths.csv", table);
    }
}

void run_clt(const ExperimentConfig& c, OutputSet& out)
{
    const WalkModel& model = *c.model;
    const int d = model.lattice_dim();
    CltReport rep;
    in_module("limit-theorems", [&] { rep = clt_report(model); });

    std::vector<std::string> header = axis_names("m_", d);
    for (auto& s : pair_names("V_", d)) header.push_back(s);
    for (auto& s : axis_names("poisson_residual_", d)) header.push_back(s);
    Table summary{header, {}};
    std::vector<double> row;
    for (Index a = 0; a < rep.m.size(); ++a) row.push_back(rep.m(a));
    append_matrix(row, rep.v);
    for (double r : rep.residuals) row.push_back(r);
    summary.add_row(std::move(row));
    out.write("clt_summary.csv", summary);
    out.write("stationary_state.csv", matrix_table(rep.rho_inv));

    Table poisson{{"axis", "row", "col", "re", "im"}, {}};
    for (std::size_t q = 0; q < rep.j.size(); ++q) {
        const CMatrix& j = rep.j[q];
        for (Index r = 0; r < j.rows(); ++r) {
            for (Index col = 0; col < j.cols(); ++col) {
                poisson.add_row({static_cast<double>(q + 1), static_cast<double>(r), static_cast<double>(col),
                                 j(r, col).real(), j(r, col).imag()});
            }
        }
    }
    out.write("poisson_solution.csv", poisson);

    if (c.samples == 0) return;
    std::vector<GaussianCheckpoint> cmp;
    in_module("limit-theorems", [&] {
        const InitialCondition init = InitialCondition::localized(c.initial_site, c.initial_state);
        const EnsembleStats stats =
            run_ensemble(model, init, c.t_max, c.checkpoints, c.samples, c.seed, c.threads);
        cmp = gaussian_comparison(stats, c.initial_site, rep.m, rep.v);
    });
    Table mc{{"t", "axis", "samples", "drift_error", "scaled_variance", "V", "ks"}, {}};
    for (const auto& g : cmp) {
        for (int a = 0; a < d; ++a) {
            mc.add_row({g.time, static_cast<double>(a + 1), static_cast<double>(c.samples), g.drift_error(a),
                        g.scaled_covariance(a, a), rep.v(a, a), g.ks[static_cast<std::size_t>(a)]});
        }
    }
    out.write("clt_monte_carlo.csv", mc);
}

void run_ldp(const ExperimentConfig& c, OutputSet& out)
{
    const WalkModel& model = *c.model;
    const int d = model.lattice_dim();
    std::vector<std::string> uh = axis_names("u_", d);
    uh.push_back("l_u");
    Table curve_t{uh, {}};
    std::vector<std::string> xh = axis_names("x_", d);
    xh.push_back("rate");
    Table rate_t{xh, {}};

    in_module("spectral-analysis", [&] {
        const DeformationCurve curve(model);
        for (const auto& s : curve.samples(c.u_grid)) {
            std::vector<double> row = s.u;
            row.push_back(s.value);
            curve_t.add_row(std::move(row));
        }
        in_module("limit-theorems", [&] {
            for (const auto& x : c.x_grid) {
                std::vector<double> row = x;
                row.push_back(rate_function(curve, x).value);
                rate_t.add_row(std::move(row));
            }
        });
    });
    out.write("deformation_curve.csv", curve_t);
    out.write("rate_function.csv", rate_t);

    if (!c.ldp || c.ldp->samples == 0) return;
    LdpReport rep;
    in_module("limit-theorems", [&] {
        const DeformationCurve curve(model);
        LdpOptions opt;
        opt.threads = c.threads;
        rep = empirical_ldp(curve, c.ldp->region, InitialCondition::localized(c.initial_site, c.initial_state),
                            c.ldp->times, c.ldp->samples, c.seed, opt);
    });
    Table t{{"t", "samples", "hits", "frequency", "rate", "lower_bound", "inf_rate"}, {}};
    for (const auto& e : rep.estimates) {
        t.add_row({e.time, static_cast<double>(c.ldp->samples), static_cast<double>(e.hits), e.frequency,
                   e.rate, e.lower_bound ? 1.0 : 0.0, rep.inf_rate});
    }
    out.write("ldp_empirical.csv", t);
}

void dispatch(ExperimentKind kind, const ExperimentConfig& c, OutputSet& out)
{
    switch (kind) {
    case ExperimentKind::validate: run_validate(c, out); break;
    case ExperimentKind::master: run_master(c, out); break;
    case ExperimentKind::sample: run_sample(c, out); break;
    case ExperimentKind::clt: run_clt(c, out); break;
    case ExperimentKind::ldp: run_ldp(c, out); break;
    case ExperimentKind::reproduce_example:
        for (auto t : c.targets) dispatch(t, c, out);
        break;
    }
}

} // namespace

// ---------------------------------------------------------------------------

std::string kind_name(ExperimentKind kind)
{
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "?";
}

std::optional<ExperimentKind> kind_from_name(const std::string& name)
{
    for (const auto& [k, n] : kKindNames) {
        if (name == n) return k;
    }
    return std::nullopt;
}

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error("invalid configuration:\n  " + join(errors, "\n  ")), errors_(std::move(errors))
{
}

ExperimentConfig parse_config(const std::string& text, const ParseOverrides& ov)
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({std::string("malformed JSON: ") + e.what()});
    }
    if (!j.is_object()) throw ConfigError({"configuration must be a JSON object"});

    Errors err;
    static const std::set<std::string> known = {
        "kind", "example", "model", "targets", "t_max", "dt", "times", "samples", "checkpoints",
        "seed", "threads", "export_paths", "initial", "u_grid", "x_grid", "ldp", "output_dir"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) err.add(key + ": unknown field");
    }

    ExperimentConfig c;
    std::optional<ExperimentKind> kind = ov.kind;
    if (j.contains("kind")) {
        if (!j["kind"].is_string()) {
            err.add("kind: expected a string");
        } else {
            const auto k = kind_from_name(j["kind"].get<std::string>());
            if (!k) {
                err.add("kind: unknown experiment kind '" + j["kind"].get<std::string>() +
                        "' (validate, master, sample, clt, ldp, reproduce-example)");
            } else if (kind && *kind != *k) {
                err.add("kind: configuration says '" + kind_name(*k) + "' but '" + kind_name(*kind) +
                        "' was requested");
            } else {
                kind = k;
            }
        }
    }
    if (!kind) {
        if (!j.contains("kind")) err.add("kind: required");
        throw ConfigError(err.list);
    }
    c.kind = *kind;
    const bool reproduce = c.kind == ExperimentKind::reproduce_example;

    // Model
    std::optional<int> example = ov.example;
    if (j.contains("example")) {
        const auto e = read_count(j["example"], "example", err);
        if (e && example && *example != static_cast<int>(*e)) {
            err.add("example: configuration says " + std::to_string(*e) + " but " +
                    std::to_string(*example) + " was requested");
        } else if (e) {
            example = static_cast<int>(*e);
        }
    }
    if (reproduce) {
        if (j.contains("model")) err.add("model: reproduce-example uses the built-in matrices; remove 'model'");
        if (!example) err.add("example: required for reproduce-example");
        else if (!builtin::has_example(*example)) {
            err.add("example: no built-in example " + std::to_string(*example) + " (have 1, 2, 3)");
        } else {
            c.example = *example;
            c.model = builtin::example(*example);
        }
    } else {
        if (example) err.add("example: only used by reproduce-example; use model.example instead");
        if (!j.contains("model")) {
            err.add("model: required");
        } else {
            ParsedModel pm = read_model(j["model"], err);
            c.model = std::move(pm.model);
            c.example = pm.example;
            c.model_from_drift = pm.from_drift;
        }
    }

    // Targets
    if (reproduce) {
        c.targets = {ExperimentKind::validate, ExperimentKind::clt, ExperimentKind::ldp, ExperimentKind::master};
        if (j.contains("targets")) {
            c.targets.clear();
            if (!j["targets"].is_array()) err.add("targets: expected an array of experiment kinds");
            else {
                for (const auto& t : j["targets"]) {
                    const auto k = t.is_string() ? kind_from_name(t.get<std::string>()) : std::nullopt;
                    if (!k || *k == ExperimentKind::reproduce_example) {
                        err.add("targets: invalid entry " + t.dump());
                    } else if (std::find(c.targets.begin(), c.targets.end(), *k) == c.targets.end()) {
                        c.targets.push_back(*k);
                    }
                }
            }
        }
    } else if (j.contains("targets")) {
        err.add("targets: only used by reproduce-example");
    }
    auto wants = [&](ExperimentKind k) {
        return c.kind == k || (reproduce && std::find(c.targets.begin(), c.targets.end(), k) != c.targets.end());
    };

    // Scalars
    std::optional<double> t_max;
    if (j.contains("t_max")) {
        t_max = read_real(j["t_max"], "t_max", err);
        if (t_max && *t_max < 0.0) {
            err.add("t_max: must be non-negative");
            t_max.reset();
        }
    }
    if (j.contains("dt")) {
        if (auto dt = read_real(j["dt"], "dt", err)) {
            if (*dt <= 0.0) err.add("dt: must be positive");
            else c.dt = *dt;
        }
    }
    if (j.contains("samples")) {
        if (auto n = read_count(j["samples"], "samples", err)) c.samples = *n;
    }
    if (j.contains("seed")) {
        if (auto s = read_count(j["seed"], "seed", err)) c.seed = *s;
    }
    if (ov.seed) c.seed = *ov.seed;
    if (j.contains("threads")) {
        if (auto t = read_count(j["threads"], "threads", err)) c.threads = static_cast<unsigned>(*t);
    }
    if (ov.threads) c.threads = *ov.threads;
    if (c.threads == 0) err.add("threads: must be at least 1");
    if (j.contains("export_paths")) {
        if (auto n = read_count(j["export_paths"], "export_paths", err)) c.export_paths = *n;
    }
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) err.add("output_dir: expected a string");
        else c.output_dir = j["output_dir"].get<std::string>();
    }
    if (ov.output_dir) c.output_dir = *ov.output_dir;

    std::optional<std::vector<double>> times, checkpoints;
    if (j.contains("times")) times = read_reals(j["times"], "times", err);
    if (j.contains("checkpoints")) checkpoints = read_reals(j["checkpoints"], "checkpoints", err);

    if (!c.model) throw ConfigError(err.list.empty() ? std::vector<std::string>{"model: invalid"} : err.list);
    const WalkModel& model = *c.model;
    const auto d = static_cast<std::size_t>(model.lattice_dim());
    const Index n = model.internal_dim();

    // Horizon and time lists
    const bool needs_horizon = wants(ExperimentKind::master) || wants(ExperimentKind::sample) ||
                               (wants(ExperimentKind::clt) && c.samples > 0);
    if (!t_max && reproduce) {
        if (times && !times->empty()) t_max = *std::max_element(times->begin(), times->end());
        else if (wants(ExperimentKind::master)) t_max = example_snapshot_times(c.example).back();
        else if (c.samples > 0) t_max = 200.0;
    }
    if (!t_max && times && !times->empty() && wants(ExperimentKind::master)) {
        t_max = *std::max_element(times->begin(), times->end());
    }
    if (needs_horizon && !t_max) err.add("t_max: required for kind " + kind_name(c.kind));
    if (t_max) c.t_max = *t_max;
    if (c.dt == 0.0) c.dt = default_time_step(model);

    auto check_times = [&](std::vector<double>& v, const std::string& field) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        for (double x : v) {
            if (x < 0.0 || x > c.t_max) {
                err.add(field + ": entries must lie in [0, t_max]");
                break;
            }
        }
    };
    if (wants(ExperimentKind::master)) {
        if (times) c.times = *times;
        else if (reproduce) c.times = example_snapshot_times(c.example);
        else c.times = {c.t_max};
        check_times(c.times, "times");
    } else if (j.contains("times")) {
        err.add("times: only used by master runs");
    }
    if (wants(ExperimentKind::sample) || (wants(ExperimentKind::clt) && c.samples > 0)) {
        c.checkpoints = checkpoints ? *checkpoints : std::vector<double>{c.t_max};
        check_times(c.checkpoints, "checkpoints");
        if (c.samples == 0) err.add("samples: must be positive for kind " + kind_name(c.kind));
    } else if (j.contains("checkpoints")) {
        err.add("checkpoints: only used by sample and clt runs");
    }

    // Initial condition: localized, internal state defaults to the stationary
    // state when it is unique, else the maximally mixed state.
    const StationaryReport st = stationary_state(model);
    c.initial_site = Site(d, 0);
    c.initial_state = (st.rho_inv && st.positive) ? *st.rho_inv
                                                  : CMatrix(CMatrix::Identity(n, n) / static_cast<double>(n));
    if (j.contains("initial")) {
        const Json& ini = j["initial"];
        if (!ini.is_object()) {
            err.add("initial: expected an object with 'site' and/or 'state'");
        } else {
            for (const auto& [key, value] : ini.items()) {
                if (key != "site" && key != "state") err.add("initial." + key + ": unknown field");
            }
            if (ini.contains("site")) {
                const Json& s = ini["site"];
                if (!s.is_array() || s.size() != d) {
                    err.add("initial.site: expected " + std::to_string(d) + " integers");
                } else {
                    for (std::size_t a = 0; a < d; ++a) {
                        if (!s[a].is_number_integer()) err.add("initial.site: expected integers");
                        else c.initial_site[a] = s[a].get<std::int64_t>();
                    }
                }
            }
            if (ini.contains("state")) {
                if (auto m = read_matrix(ini["state"], "initial.state", err)) {
                    if (m->rows() != n) {
                        err.add("initial.state: expected " + std::to_string(n) + "x" + std::to_string(n));
                    } else if (!is_hermitian(*m, 1e-12) || !is_psd(*m, 1e-10) ||
                               std::abs(m->trace() - Complex(1.0, 0.0)) > 1e-10) {
                        err.add("initial.state: must be a density matrix (Hermitian, PSD, unit trace)");
                    } else {
                        c.initial_state = *m;
                    }
                }
            }
        }
    }

    // Grids
    const RVector m_center = st.rho_inv ? mean_drift(model, *st.rho_inv) : RVector::Zero(static_cast<Index>(d));
    if (wants(ExperimentKind::ldp)) {
        const std::size_t pts = d == 1 ? 101 : 41;
        if (j.contains("u_grid")) {
            if (auto g = read_grid(j["u_grid"], "u_grid", d, err)) c.u_grid = std::move(*g);
        } else {
            c.u_grid = tensor_grid(std::vector<std::vector<double>>(d, linspace(-2.0, 2.0, pts)));
        }
        if (j.contains("x_grid")) {
            if (auto g = read_grid(j["x_grid"], "x_grid", d, err)) c.x_grid = std::move(*g);
        } else {
            std::vector<std::vector<double>> axes;
            for (std::size_t a = 0; a < d; ++a) {
                const double mid = m_center(static_cast<Index>(a));
                axes.push_back(linspace(mid - 1.0, mid + 1.0, pts));
            }
            c.x_grid = tensor_grid(axes);
        }
        if (j.contains("ldp")) c.ldp = read_ldp(j["ldp"], d, err);
    } else {
        for (const char* key : {"u_grid", "x_grid", "ldp"}) {
            if (j.contains(key)) err.add(std::string(key) + ": only used by ldp runs");
        }
    }

    if (!err.empty()) throw ConfigError(err.list);
    return c;
}

std::string config_echo(const ExperimentConfig& c)
{
    Json j;
    j["kind"] = kind_name(c.kind);
    const WalkModel& model = *c.model;
    if (c.kind == ExperimentKind::reproduce_example) {
        j["example"] = c.example;
        Json targets = Json::array();
        for (auto t : c.targets) targets.push_back(kind_name(t));
        j["targets"] = targets;
    } else if (c.example != 0) {
        j["model"] = {{"example", c.example}};
    } else {
        Json mj;
        mj["d"] = model.lattice_dim();
        mj["n"] = model.internal_dim();
        if (c.model_from_drift) mj["D0"] = write_matrix(model.d0());
        else mj["H"] = write_matrix(model.hamiltonian());
        Json jumps = Json::array();
        for (const auto& jm : model.jumps()) jumps.push_back(write_matrix(jm));
        mj["jumps"] = jumps;
        j["model"] = mj;
    }
    j["t_max"] = c.t_max;
    j["dt"] = c.dt;
    if (!c.times.empty()) j["times"] = c.times;
    j["samples"] = c.samples;
    if (!c.checkpoints.empty()) j["checkpoints"] = c.checkpoints;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["export_paths"] = c.export_paths;
    j["initial"] = {{"site", c.initial_site}, {"state", write_matrix(c.initial_state)}};
    if (!c.u_grid.empty()) j["u_grid"] = grid_json(c.u_grid);
    if (!c.x_grid.empty()) j["x_grid"] = grid_json(c.x_grid);
    if (c.ldp) {
        Json lo = Json::array(), hi = Json::array();
        for (Index a = 0; a < c.ldp->region.lower.size(); ++a) {
            lo.push_back(bound_json(c.ldp->region.lower(a)));
            hi.push_back(bound_json(c.ldp->region.upper(a)));
        }
        j["ldp"] = {{"lower", lo}, {"upper", hi}, {"times", c.ldp->times}, {"samples", c.ldp->samples}};
    }
    j["output_dir"] = c.output_dir.string();
    return j.dump(2);
}

std::string sha256_file(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for hashing");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256: digest initialization failed");
    }
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof buf);
        if (f.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(f.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[md[k] >> 4];
        out += hex[md[k] & 15];
    }
    return out;
}

RunManifest run_experiment(const ExperimentConfig& config)
{
    if (!config.model) throw std::invalid_argument("run_experiment: configuration has no model");
    const auto start = std::chrono::steady_clock::now();
    OutputSet out(config.output_dir);
    RunManifest manifest;
    try {
        dispatch(config.kind, config, out);

        manifest.version = kVersion;
        manifest.config = config_echo(config);
        manifest.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (const auto& name : out.names()) {
            const auto path = out.dir() / name;
            manifest.outputs.push_back({name, sha256_file(path), std::filesystem::file_size(path)});
        }
        Json mj;
        mj["artifact"] = "ctoqw";
        mj["version"] = manifest.version;
        mj["kind"] = kind_name(config.kind);
        mj["config"] = Json::parse(manifest.config);
        mj["wall_clock_seconds"] = manifest.wall_clock_seconds;
        Json files = Json::array();
        for (const auto& f : manifest.outputs) {
            files.push_back({{"file", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        }
        mj["outputs"] = files;
        out.write_text("manifest.json", mj.dump(2) + "\n");
        manifest.path = out.dir() / "manifest.json";
    } catch (...) {
        out.discard();
        throw;
    }
    return manifest;
}

} // namespace ctoqw
