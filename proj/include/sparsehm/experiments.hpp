#ifndef SPARSEHM_EXPERIMENTS_HPP
#define SPARSEHM_EXPERIMENTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <sparsehm/irls.hpp>
#include <sparsehm/linear_model.hpp>
#include <sparsehm/reservoir_model.hpp>

namespace sparsehm
{

/// Portable random stream: mt19937_64 bits mapped by hand so results do not
/// depend on the standard library's distribution implementations.
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform()
    {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi)
    {
        return lo + (hi - lo) * uniform();
    }
    double normal()
    {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }
    Index below(Index n)
    {
        return static_cast<Index>(uniform() * static_cast<double>(n)) % n;
    }

private:
    std::mt19937_64 gen_;
    std::optional<double> spare_;
};

enum class ReservoirCase { A, B };
enum class ReservoirScale { full, desk };

inline const char *to_string(ReservoirCase c)
{
    return c == ReservoirCase::A ? "A" : "B";
}
inline const char *to_string(ReservoirScale s)
{
    return s == ReservoirScale::full ? "full" : "desk";
}

namespace detail
{

/// Rows of `count` wells spread evenly along an edge of `ny` cells.
inline std::vector<Index> spread_rows(Index ny, int count)
{
    std::vector<Index> rows;
    for (int k = 0; k < count; ++k) {
        rows.push_back(static_cast<Index>(std::floor((k + 0.5) * static_cast<double>(ny) / count)));
    }
    return rows;
}

} // namespace detail

/// Waterflood configurations for the two well layouts.
///
/// Full scale: 32 x 32 x 1 cells of 10 m, porosity 0.20, initial oil
/// saturation 0.90, one pore volume injected over 365 days, 30 report
/// intervals. Desk scale keeps the 320 m x 320 m x 10 m domain on 16 x 16
/// cells of 20 m. Layout A is a line drive (every left-edge cell injects,
/// every right-edge cell produces); layout B has 4 injectors on the left
/// edge and 6 producers on the right edge. Rates are equal per well and
/// balance exactly. Injectors are listed first, then producers.
[[nodiscard]] inline TwoPhaseConfig build_reservoir(ReservoirCase which, ReservoirScale scale)
{
    TwoPhaseConfig cfg;
    if (scale == ReservoirScale::full) {
        cfg.geometry = {32, 32, 10.0, 10.0, 10.0};
    } else {
        cfg.geometry = {16, 16, 20.0, 20.0, 10.0};
    }
    cfg.props = RockFluidProps{};
    cfg.props.initial_water_saturation = 0.10; // initial oil saturation 0.90
    cfg.schedule = Schedule::uniform(365.0, 30);

    const Index nx = cfg.geometry.nx;
    const Index ny = cfg.geometry.ny;
    std::vector<Index> inj_rows;
    std::vector<Index> prod_rows;
    if (which == ReservoirCase::A) {
        for (Index j = 0; j < ny; ++j) {
            inj_rows.push_back(j);
            prod_rows.push_back(j);
        }
    } else {
        inj_rows = detail::spread_rows(ny, 4);
        prod_rows = detail::spread_rows(ny, 6);
    }
    const double total_rate = cfg.pore_volume() / cfg.schedule.total_days; // 1 PV over the schedule
    for (Index j : inj_rows) {
        cfg.wells.push_back({0, j, WellKind::injector, total_rate / static_cast<double>(inj_rows.size())});
    }
    for (Index j : prod_rows) {
        cfg.wells.push_back({nx - 1, j, WellKind::producer, total_rate / static_cast<double>(prod_rows.size())});
    }
    return cfg;
}

/// Sinuous left-to-right bands used as synthetic truth.
struct ChannelSpec {
    int count = 2;
    double width = 3.0;      // cells
    double amplitude = 1.5;  // cells
    double wavelength = 1.0; // fraction of the grid length
};

/// Channel permeability field in mD; deterministic per seed.
[[nodiscard]] inline GridField make_channel_field(const GridGeometry &grid, double background_md = 20.0,
                                                  double channel_md = 200.0, const ChannelSpec &spec = {},
                                                  std::uint64_t seed = 1)
{
    detail::require(background_md > 0.0 && channel_md > background_md,
                    "make_channel_field: need channel_md > background_md > 0");
    detail::require(spec.width >= 0.0 && spec.width < static_cast<double>(grid.ny),
                    "make_channel_field: channel width must be smaller than the grid");
    detail::require(spec.count >= 0 && spec.wavelength > 0.0, "make_channel_field: invalid channel spec");
    GridField field(grid.nx, grid.ny, background_md);
    if (spec.width == 0.0 || spec.count == 0) {
        return field;
    }
    Rng rng(seed);
    const auto ny = static_cast<double>(grid.ny);
    const auto nx = static_cast<double>(grid.nx);
    for (int c = 0; c < spec.count; ++c) {
        const double centre = ny * (c + 0.5) / spec.count + rng.uniform(-0.1, 0.1) * ny / spec.count;
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (Index i = 0; i < grid.nx; ++i) {
            const double x = (static_cast<double>(i) + 0.5) / nx;
            const double yc = centre + spec.amplitude * std::sin(2.0 * std::numbers::pi * x / spec.wavelength + phase);
            for (Index j = 0; j < grid.ny; ++j) {
                if (std::abs(static_cast<double>(j) + 0.5 - yc) < 0.5 * spec.width) {
                    field(i, j) = channel_md;
                }
            }
        }
    }
    return field;
}

/// Smooth heterogeneous field: Gaussian-filtered white noise in the DCT
/// domain, rescaled to the requested log10 mean and standard deviation.
[[nodiscard]] inline GridField make_smooth_log_field(const GridGeometry &grid, double mean_log10 = std::log10(50.0),
                                                     double std_log10 = 0.4, double cutoff = 3.0,
                                                     std::uint64_t seed = 7)
{
    detail::require(std_log10 >= 0.0 && cutoff > 0.0, "make_smooth_log_field: invalid spectrum");
    Rng rng(seed);
    const DctBasis basis(grid.nx, grid.ny);
    Vector c(grid.cells());
    for (Index ky = 0; ky < grid.ny; ++ky) {
        for (Index kx = 0; kx < grid.nx; ++kx) {
            const double r2 = static_cast<double>(kx * kx + ky * ky);
            c[ky * grid.nx + kx] = (kx == 0 && ky == 0) ? 0.0 : rng.normal() * std::exp(-r2 / (2.0 * cutoff * cutoff));
        }
    }
    Vector f = basis.synthesize(c);
    const double sd = std::sqrt((f.array() - f.mean()).square().mean());
    if (sd > 0.0) {
        f = (f.array() - f.mean()) * (std_log10 / sd);
    }
    f.array() += mean_log10;
    return {grid.nx, grid.ny, Vector(Eigen::pow(10.0, f.array()).matrix())};
}

enum class NoiseKind { none, gaussian };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    double relative_level = 0.0; // fraction of the per-class standard deviation
    std::uint64_t seed = 11;
};

/// Zero-mean Gaussian noise per quantity class, std = level * class std.
[[nodiscard]] inline ObservationSet add_noise(const ObservationSet &y, const NoiseSpec &spec)
{
    detail::require(spec.relative_level >= 0.0, "add_noise: level must be >= 0");
    ObservationSet out = y;
    if (spec.kind == NoiseKind::none || spec.relative_level == 0.0) {
        return out;
    }
    const Vector scale = class_scales(y);
    Rng rng(spec.seed);
    for (Index r = 0; r < out.size(); ++r) {
        out.values[r] += spec.relative_level * scale[r] * rng.normal();
    }
    return out;
}

struct EvalReport {
    double relative_error = 0.0; // ||m - truth|| / ||truth||
    double correlation = 0.0;    // Pearson; 0 when either field is constant
    double support_overlap = 0.0; // |top-k(est) & top-k(truth)| / k, k = ceil(5% N)
    double misfit_ratio = 0.0;   // final / initial misfit, when telemetry exists
    int iterations = 0;
};

[[nodiscard]] inline double pearson(const Vector &a, const Vector &b)
{
    detail::require(a.size() == b.size() && a.size() > 0, "pearson: length mismatch");
    const Eigen::ArrayXd da = a.array() - a.mean();
    const Eigen::ArrayXd db = b.array() - b.mean();
    const double va = da.square().sum();
    const double vb = db.square().sum();
    if (va <= 0.0 || vb <= 0.0) {
        return 0.0;
    }
    return std::clamp((da * db).sum() / std::sqrt(va * vb), -1.0, 1.0);
}

/// Compare an estimate with the truth, both in the same parameter space.
[[nodiscard]] inline EvalReport evaluate(const Vector &m_final, const Vector &truth, const DctBasis &basis,
                                         const InversionResult *telemetry = nullptr)
{
    detail::require(m_final.size() == truth.size() && truth.size() == basis.size(), "evaluate: length mismatch");
    EvalReport r;
    const double tn = truth.norm();
    r.relative_error = tn > 0.0 ? (m_final - truth).norm() / tn : (m_final - truth).norm();
    r.correlation = pearson(m_final, truth);
    const auto k = static_cast<Index>(std::ceil(0.05 * static_cast<double>(truth.size()) - 1e-9));
    const auto se = top_k_support(basis.analyze(m_final), k);
    const auto st = top_k_support(basis.analyze(truth), k);
    std::vector<Index> common;
    std::set_intersection(se.begin(), se.end(), st.begin(), st.end(), std::back_inserter(common));
    r.support_overlap = static_cast<double>(common.size()) / static_cast<double>(k);
    if (telemetry && !telemetry->records.empty()) {
        const double m0 = telemetry->records.front().misfit;
        r.misfit_ratio = m0 > 0.0 ? telemetry->records.back().misfit / m0 : 0.0;
        r.iterations = telemetry->records.back().iteration;
    }
    return r;
}

struct ExperimentCase {
    /// Library defaults plus backtracking: full Gauss-Newton steps diverge on the reservoir cases.
    static SolverConfig default_solver()
    {
        SolverConfig s;
        s.max_step_halvings = 6;
        return s;
    }


    ReservoirCase reservoir = ReservoirCase::A;
    ReservoirScale scale = ReservoirScale::desk;
    GridField truth_md;          // empty selects the default channel field
    SolverConfig solver = default_solver();
    NoiseSpec noise;
    double initial_md = 20.0;    // homogeneous starting model
    std::uint64_t seed = 1;      // truth-field seed when truth_md is empty
};

struct CaseResult {
    TwoPhaseConfig config;
    GridField truth_md;
    ObservationSet clean;
    ObservationSet observed;
    InversionResult inversion;
    EvalReport report;
    GridField estimate_md;
};

namespace detail
{

struct PreparedCase {
    TwoPhaseConfig config;
    GridField truth_md;
    ObservationSet clean;
    ObservationSet observed;
    Vector scale;
};

inline PreparedCase prepare_case(const ExperimentCase &c)
{
    PreparedCase p;
    p.config = build_reservoir(c.reservoir, c.scale);
    p.truth_md = c.truth_md.size() > 0 ? c.truth_md : make_channel_field(p.config.geometry, 20.0, 200.0, {}, c.seed);
    require(p.truth_md.nx == p.config.geometry.nx && p.truth_md.ny == p.config.geometry.ny,
            "run_case: truth field does not match reservoir grid");
    p.clean = simulate_two_phase(p.truth_md, p.config).observations;
    p.observed = add_noise(p.clean, c.noise);
    p.scale = class_scales(p.observed);
    return p;
}

inline CaseResult solve_prepared(const PreparedCase &p, const ExperimentCase &c)
{
    CaseResult out{p.config, p.truth_md, p.clean, p.observed, {}, {}, {}};
    const Index nx = p.config.geometry.nx;
    const Index ny = p.config.geometry.ny;
    const ParamSpace space = c.solver.param_space;
    const TwoPhaseModel model(p.config, space, p.scale);
    const DctBasis basis(nx, ny);
    const Vector y = p.observed.values.cwiseQuotient(p.scale);
    const Vector m0 = to_parameters(GridField(nx, ny, c.initial_md), space);
    out.inversion = run_inversion(model, basis, y, m0, c.solver);
    out.estimate_md = to_permeability(out.inversion.m_final, nx, ny, space);
    out.report = evaluate(out.inversion.m_final, to_parameters(p.truth_md, space), basis, &out.inversion);
    return out;
}

} // namespace detail

/// Build the reservoir, simulate the truth, perturb, invert and score.
[[nodiscard]] inline CaseResult run_case(const ExperimentCase &c)
{
    return detail::solve_prepared(detail::prepare_case(c), c);
}

/// Same truth, noise and starting model for every p; only p varies.
[[nodiscard]] inline std::vector<CaseResult> p_sweep(const ExperimentCase &c,
                                                     const std::vector<double> &ps = {0.0, 0.5, 1.0, 1.5, 2.0})
{
    const auto prepared = detail::prepare_case(c);
    std::vector<CaseResult> out;
    for (double p : ps) {
        ExperimentCase ci = c;
        ci.solver.p = p;
        out.push_back(detail::solve_prepared(prepared, ci));
    }
    return out;
}

/// Same number of kept coefficients as top-fraction truncation, chosen uniformly at random.
[[nodiscard]] inline CoefficientVector truncate_random_fraction(const CoefficientVector &coeffs, double fraction,
                                                                std::uint64_t seed)
{
    detail::require(fraction > 0.0 && fraction <= 1.0, "truncate_random_fraction: fraction must lie in (0, 1]");
    const Index n = coeffs.size();
    const Index keep = std::min(n, static_cast<Index>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
    std::vector<Index> pool(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        pool[static_cast<std::size_t>(i)] = i;
    }
    Rng rng(seed);
    CoefficientVector out{coeffs.nx, coeffs.ny, Vector::Zero(n)};
    for (Index i = 0; i < keep; ++i) {
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(i + rng.below(n - i))]);
        out.values[pool[static_cast<std::size_t>(i)]] = coeffs.values[pool[static_cast<std::size_t>(i)]];
    }
    return out;
}

struct TruncationReport {
    double fraction = 0.0;
    Index kept = 0;
    double top_error = 0.0;           // relative L2 field error, largest coefficients kept
    double random_median_error = 0.0; // median over the random draws
    int random_draws = 0;
    GridField truncated;
};

[[nodiscard]] inline TruncationReport truncation_report(const GridField &field, double fraction, int draws = 20,
                                                        std::uint64_t seed = 1)
{
    const DctBasis basis(field.nx, field.ny);
    const CoefficientVector c = basis.analysis(field);
    const double norm = field.values.norm();
    detail::require(norm > 0.0, "truncation_report: field is identically zero");
    TruncationReport r;
    r.fraction = fraction;
    const CoefficientVector top = truncate_top_fraction(c, fraction);
    r.kept = static_cast<Index>((top.values.array() != 0.0).count());
    r.truncated = basis.synthesis(top);
    r.top_error = (r.truncated.values - field.values).norm() / norm;
    std::vector<double> errs;
    for (int d = 0; d < draws; ++d) {
        const GridField g = basis.synthesis(truncate_random_fraction(c, fraction, seed + static_cast<std::uint64_t>(d)));
        errs.push_back((g.values - field.values).norm() / norm);
    }
    r.random_draws = draws;
    if (!errs.empty()) {
        std::sort(errs.begin(), errs.end());
        const std::size_t h = errs.size() / 2;
        r.random_median_error = errs.size() % 2 ? errs[h] : 0.5 * (errs[h - 1] + errs[h]);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Linear tier
// ---------------------------------------------------------------------------

/// M x N sensing matrix with i.i.d. N(0, 1/M) entries.
[[nodiscard]] inline Matrix gaussian_sensing(Index rows, Index cols, std::uint64_t seed)
{
    detail::require(rows > 0 && cols > 0, "gaussian_sensing: dimensions must be positive");
    Rng rng(seed);
    Matrix a(rows, cols);
    const double s = 1.0 / std::sqrt(static_cast<double>(rows));
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            a(r, c) = s * rng.normal();
        }
    }
    return a;
}

struct SparseField {
    GridField field;
    Vector coefficients;          // in the DctBasis ordering
    std::vector<Index> support;   // sorted
};

/// Field with exactly k nonzero DCT coefficients of magnitude in [1, 2] and random sign.
[[nodiscard]] inline SparseField make_sparse_dct_field(Index nx, Index ny, Index k, std::uint64_t seed)
{
    const Index n = nx * ny;
    detail::require(k >= 0 && k <= n, "make_sparse_dct_field: sparsity outside [0, N]");
    Rng rng(seed);
    std::vector<Index> pool(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        pool[static_cast<std::size_t>(i)] = i;
    }
    for (Index i = 0; i < k; ++i) {
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(i + rng.below(n - i))]);
    }
    SparseField out;
    out.support.assign(pool.begin(), pool.begin() + k);
    std::sort(out.support.begin(), out.support.end());
    out.coefficients = Vector::Zero(n);
    for (Index idx : out.support) {
        const double mag = rng.uniform(1.0, 2.0);
        out.coefficients[idx] = rng.uniform() < 0.5 ? -mag : mag;
    }
    const DctBasis basis(nx, ny);
    out.field = GridField(nx, ny, basis.synthesize(out.coefficients));
    return out;
}

/// Back-projection A^T y scaled to minimise ||y - t A A^T y||.
///
/// A zero start is a fixed point of the multiplicative iteration and the
/// least-squares start already fits exactly, so neither is usable here.
[[nodiscard]] inline Vector backprojection_start(const Matrix &a, const Vector &y)
{
    const Vector aty = a.transpose() * y;
    const Vector back = a * aty;
    const double den = back.squaredNorm();
    return den > 0.0 ? Vector(aty * (aty.squaredNorm() / den)) : aty;
}

/// Indices of coefficients whose magnitude exceeds `rel_threshold * max|c|`.
[[nodiscard]] inline std::vector<Index> significant_support(const Vector &coeffs, double rel_threshold = 1e-3)
{
    std::vector<Index> out;
    const double top = coeffs.cwiseAbs().maxCoeff();
    for (Index i = 0; i < coeffs.size(); ++i) {
        if (top > 0.0 && std::abs(coeffs[i]) > rel_threshold * top) {
            out.push_back(i);
        }
    }
    return out;
}

} // namespace sparsehm

#endif
