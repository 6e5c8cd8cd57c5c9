#ifndef SPARSEHM_RESERVOIR_HPP
#define SPARSEHM_RESERVOIR_HPP

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <sparsehm/core.hpp>

namespace sparsehm
{

namespace units
{
inline constexpr double millidarcy = 9.869233e-16; // m^2
inline constexpr double day = 86400.0;             // s
} // namespace units

struct GridGeometry {
    Index nx = 32;
    Index ny = 32;
    double dx = 10.0;
    double dy = 10.0;
    double dz = 10.0;

    [[nodiscard]] Index cells() const noexcept
    {
        return nx * ny;
    }
    [[nodiscard]] double cell_volume() const noexcept
    {
        return dx * dy * dz;
    }
    void validate() const
    {
        detail::require(nx > 0 && ny > 0, "GridGeometry: cell counts must be positive");
        detail::require(dx > 0 && dy > 0 && dz > 0, "GridGeometry: cell sizes must be positive");
    }
};

/// Rock and fluid description with quadratic Corey curves by default.
struct RockFluidProps {
    double porosity = 0.20;
    double water_viscosity = 1.0e-3; // Pa s
    double oil_viscosity = 5.0e-3;   // Pa s
    double initial_water_saturation = 0.10;
    double connate_water = 0.10;  // S_wc
    double residual_oil = 0.10;   // S_or
    double water_exponent = 2.0;
    double oil_exponent = 2.0;

    void validate() const
    {
        detail::require(porosity > 0.0 && porosity < 1.0, "RockFluidProps: porosity must lie in (0, 1)");
        detail::require(water_viscosity > 0.0 && oil_viscosity > 0.0, "RockFluidProps: viscosities must be positive");
        detail::require(connate_water >= 0.0 && residual_oil >= 0.0 && connate_water + residual_oil < 1.0,
                        "RockFluidProps: residual saturations must be in [0, 1) with S_wc + S_or < 1");
        detail::require(initial_water_saturation >= connate_water - 1e-12
                            && initial_water_saturation <= 1.0 - residual_oil + 1e-12,
                        "RockFluidProps: initial water saturation outside [S_wc, 1 - S_or]");
        detail::require(water_exponent > 0.0 && oil_exponent > 0.0, "RockFluidProps: Corey exponents must be positive");
    }

    [[nodiscard]] double normalized(double sw) const noexcept
    {
        const double s = (sw - connate_water) / (1.0 - connate_water - residual_oil);
        return std::clamp(s, 0.0, 1.0);
    }
    [[nodiscard]] double krw(double sw) const noexcept
    {
        return std::pow(normalized(sw), water_exponent);
    }
    [[nodiscard]] double kro(double sw) const noexcept
    {
        return std::pow(1.0 - normalized(sw), oil_exponent);
    }
    [[nodiscard]] double water_mobility(double sw) const noexcept
    {
        return krw(sw) / water_viscosity;
    }
    [[nodiscard]] double oil_mobility(double sw) const noexcept
    {
        return kro(sw) / oil_viscosity;
    }
    [[nodiscard]] double total_mobility(double sw) const noexcept
    {
        return water_mobility(sw) + oil_mobility(sw);
    }
    [[nodiscard]] double fractional_flow(double sw) const noexcept
    {
        const double lw = water_mobility(sw);
        return lw / (lw + oil_mobility(sw));
    }
    /// Upper bound of df_w/dS_w over the mobile range, by dense sampling.
    [[nodiscard]] double max_fractional_flow_slope() const
    {
        constexpr int samples = 4000;
        const double lo = connate_water;
        const double hi = 1.0 - residual_oil;
        const double h = (hi - lo) / samples;
        double best = 0.0;
        double prev = fractional_flow(lo);
        for (int k = 1; k <= samples; ++k) {
            const double cur = fractional_flow(lo + h * k);
            best = std::max(best, (cur - prev) / h);
            prev = cur;
        }
        // Chord slopes under-estimate the peak tangent slightly.
        return best * 1.02;
    }
};

enum class WellKind { injector, producer };

/// Rate-controlled well occupying a single cell.
struct WellSpec {
    Index i = 0;
    Index j = 0;
    WellKind kind = WellKind::injector;
    double rate = 0.0; // m^3/day, non-negative; sign follows from kind
};

/// Report times in days, strictly increasing.
struct Schedule {
    double total_days = 365.0;
    std::vector<double> report_days;

    static Schedule uniform(double total_days, int intervals)
    {
        Schedule s;
        s.total_days = total_days;
        for (int k = 1; k <= intervals; ++k) {
            s.report_days.push_back(total_days * k / intervals);
        }
        return s;
    }
    void validate() const
    {
        detail::require(total_days > 0.0, "Schedule: total time must be positive");
        for (std::size_t k = 0; k < report_days.size(); ++k) {
            detail::require(report_days[k] > (k == 0 ? 0.0 : report_days[k - 1]),
                            "Schedule: report times must be strictly increasing and positive");
        }
        detail::require(report_days.empty() || report_days.back() <= total_days + 1e-9,
                        "Schedule: last report time exceeds total time");
    }
};

enum class Quantity { pressure, water_saturation };

inline const char *to_string(Quantity q)
{
    return q == Quantity::pressure ? "pressure" : "water_saturation";
}

struct ObservationKey {
    double time_days = 0.0;
    Index well = 0;
    Quantity quantity = Quantity::pressure;
};

/// Flattened well measurements with one key per entry.
struct ObservationSet {
    Vector values;
    std::vector<ObservationKey> index;

    [[nodiscard]] Index size() const noexcept
    {
        return values.size();
    }
};

struct StateSnapshot {
    GridField pressure;         // Pa
    GridField water_saturation; // fraction
    double time_days = 0.0;
};

inline void validate_wells(const GridGeometry &g, const std::vector<WellSpec> &wells)
{
    std::set<std::pair<Index, Index>> seen;
    double inj = 0.0;
    double prod = 0.0;
    for (const auto &w : wells) {
        detail::require(w.i >= 0 && w.i < g.nx && w.j >= 0 && w.j < g.ny, "wells: cell index outside grid");
        detail::require(w.rate >= 0.0, "wells: rates are magnitudes and must be non-negative");
        detail::require(seen.insert({w.i, w.j}).second, "wells: two wells share a cell");
        (w.kind == WellKind::injector ? inj : prod) += w.rate;
    }
    detail::require(std::abs(inj - prod) <= 1e-9 * std::max({inj, prod, 1.0}),
                    "wells: injector and producer rates do not balance");
}

/// Signed volumetric source per cell in m^3/s (injection positive).
[[nodiscard]] inline Vector well_sources(const GridGeometry &g, const std::vector<WellSpec> &wells)
{
    Vector q = Vector::Zero(g.cells());
    for (const auto &w : wells) {
        const double r = w.rate / units::day;
        q[w.j * g.nx + w.i] += (w.kind == WellKind::injector ? r : -r);
    }
    return q;
}

/// Interior face between cells a < b with its geometric factor area / distance.
struct Face {
    Index a = 0;
    Index b = 0;
    double geom = 0.0;
};

[[nodiscard]] inline std::vector<Face> grid_faces(const GridGeometry &g)
{
    std::vector<Face> faces;
    faces.reserve(static_cast<std::size_t>(2 * g.cells()));
    for (Index j = 0; j < g.ny; ++j) {
        for (Index i = 0; i < g.nx; ++i) {
            const Index c = j * g.nx + i;
            if (i + 1 < g.nx) {
                faces.push_back({c, c + 1, g.dy * g.dz / g.dx});
            }
            if (j + 1 < g.ny) {
                faces.push_back({c, c + g.nx, g.dx * g.dz / g.dy});
            }
        }
    }
    return faces;
}

/// Harmonic-mean face permeabilities (m^2) times geometry.
[[nodiscard]] inline Vector face_transmissibility(const std::vector<Face> &faces, const Vector &perm_si)
{
    Vector t(static_cast<Index>(faces.size()));
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const double ka = perm_si[faces[f].a];
        const double kb = perm_si[faces[f].b];
        t[static_cast<Index>(f)] = 2.0 * ka * kb / (ka + kb) * faces[f].geom;
    }
    return t;
}

/// Default gauge: the grid's central cell.
[[nodiscard]] inline Index default_gauge(const GridGeometry &g) noexcept
{
    return (g.ny / 2) * g.nx + g.nx / 2;
}

/// Symmetric two-point-flux pressure operator with one pinned cell.
///
/// The pinned cell's row and column are replaced by the identity, which is
/// exact elimination of p_gauge = 0 and keeps the matrix SPD. The sparsity
/// pattern is analysed once; each `solve` refactorises numerically.
class PressureSystem
{
public:
    PressureSystem(const GridGeometry &g, std::vector<Face> faces, Index gauge)
        : n_(g.cells()), gauge_(gauge), faces_(std::move(faces))
    {
        detail::require(gauge >= 0 && gauge < n_, "PressureSystem: gauge cell outside grid");
        assemble(Vector::Ones(static_cast<Index>(faces_.size())));
        solver_.analyzePattern(matrix_);
    }

    [[nodiscard]] const std::vector<Face> &faces() const noexcept
    {
        return faces_;
    }
    [[nodiscard]] Index gauge() const noexcept
    {
        return gauge_;
    }
    [[nodiscard]] const Eigen::SparseMatrix<double> &matrix() const noexcept
    {
        return matrix_;
    }

    /// Assemble with face conductances `coeff` and factorise.
    void factorize(const Vector &coeff)
    {
        assemble(coeff);
        solver_.factorize(matrix_);
        if (solver_.info() != Eigen::Success) {
            throw SolverFailure("pressure system: factorisation failed (disconnected or non-positive conductances)");
        }
    }

    /// Solve A x = rhs with the gauge entry of rhs forced to zero.
    [[nodiscard]] Vector solve(Vector rhs) const
    {
        rhs[gauge_] = 0.0;
        Vector x = solver_.solve(rhs);
        if (solver_.info() != Eigen::Success || !x.allFinite()) {
            throw SolverFailure("pressure system: solve failed");
        }
        return x;
    }

    /// Full (unpinned) residual of div(coeff grad p) = q, per cell.
    [[nodiscard]] Vector conservation_residual(const Vector &coeff, const Vector &p, const Vector &q) const
    {
        Vector r = -q;
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            const double flux = coeff[static_cast<Index>(f)] * (p[faces_[f].a] - p[faces_[f].b]);
            r[faces_[f].a] += flux;
            r[faces_[f].b] -= flux;
        }
        return r;
    }

private:
    void assemble(const Vector &coeff)
    {
        triplets_.clear();
        triplets_.reserve(faces_.size() * 4 + static_cast<std::size_t>(n_));
        Vector diag = Vector::Zero(n_);
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            const auto [a, b, geom] = faces_[f];
            const double c = coeff[static_cast<Index>(f)];
            diag[a] += c;
            diag[b] += c;
            if (a != gauge_ && b != gauge_) {
                triplets_.emplace_back(a, b, -c);
                triplets_.emplace_back(b, a, -c);
            }
        }
        diag[gauge_] = 1.0;
        for (Index c = 0; c < n_; ++c) {
            triplets_.emplace_back(c, c, diag[c]);
        }
        matrix_.resize(n_, n_);
        matrix_.setFromTriplets(triplets_.begin(), triplets_.end());
    }

    Index n_;
    Index gauge_;
    std::vector<Face> faces_;
    std::vector<Eigen::Triplet<double>> triplets_;
    Eigen::SparseMatrix<double> matrix_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

} // namespace sparsehm

#endif
