#ifndef SPARSEHM_SENSITIVITY_HPP
#define SPARSEHM_SENSITIVITY_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <sparsehm/single_phase.hpp>

namespace sparsehm
{

/// Dense sensitivity matrix G = dg/dm evaluated at m_ref.
struct JacobianMatrix {
    Matrix entries;
    Vector m_ref;
    ParamSpace param_space = ParamSpace::permeability;

    [[nodiscard]] Index rows() const noexcept
    {
        return entries.rows();
    }
    [[nodiscard]] Index cols() const noexcept
    {
        return entries.cols();
    }
};

/// For g linear, G is the sensing matrix itself.
[[nodiscard]] inline JacobianMatrix jacobian_linear(const Matrix &sensing, const Vector &m_ref = Vector(),
                                                    ParamSpace space = ParamSpace::permeability)
{
    return {sensing, m_ref, space};
}

enum class FdScheme { central, forward };

struct FdOptions {
    double rel_step = 1e-6;
    double scale_floor = 1e-8;
    FdScheme scheme = FdScheme::central;
};

/// Column-by-column finite-difference Jacobian of a pure vector function.
///
/// Step for column j is h = rel_step * max(|m_j|, scale_floor). The forward
/// scheme evaluates g(m) once (or reuses `g_at_m`) and costs N + 1 runs;
/// the central scheme costs 2N.
template <typename Fn>
[[nodiscard]] JacobianMatrix jacobian_fd(Fn &&g, const Vector &m, const FdOptions &opts = {},
                                         ParamSpace space = ParamSpace::permeability, const Vector *g_at_m = nullptr)
{
    detail::require(opts.rel_step > 0.0, "jacobian_fd: rel_step must be positive");
    detail::require(opts.scale_floor > 0.0, "jacobian_fd: scale_floor must be positive");
    auto eval = [&](const Vector &x, Index col) -> Vector {
        try {
            return g(x);
        } catch (const std::exception &e) {
            throw SolverFailure("jacobian_fd: forward evaluation failed at column " + std::to_string(col) + ": "
                                + e.what());
        }
    };

    Vector base;
    if (opts.scheme == FdScheme::forward) {
        base = g_at_m ? *g_at_m : eval(m, -1);
    }
    Matrix jac;
    Vector x = m;
    for (Index j = 0; j < m.size(); ++j) {
        const double h = opts.rel_step * std::max(std::abs(m[j]), opts.scale_floor);
        Vector col;
        if (opts.scheme == FdScheme::central) {
            x[j] = m[j] + h;
            const Vector up = eval(x, j);
            x[j] = m[j] - h;
            const Vector down = eval(x, j);
            col = (up - down) / (2.0 * h);
        } else {
            x[j] = m[j] + h;
            col = (eval(x, j) - base) / h;
        }
        x[j] = m[j];
        if (jac.size() == 0) {
            jac.resize(col.size(), m.size());
        }
        jac.col(j) = col;
    }
    if (!jac.allFinite()) {
        throw SolverFailure("jacobian_fd: non-finite sensitivities");
    }
    return {std::move(jac), m, space};
}

/// Convert a permeability-space Jacobian to log10-permeability columns.
///
/// dg/d(log10 k_j) = dg/dk_j * k_j * ln 10.
[[nodiscard]] inline JacobianMatrix to_log_space(const JacobianMatrix &perm_jac, const Vector &perm)
{
    detail::require(perm_jac.param_space == ParamSpace::permeability, "to_log_space: input must be in permeability space");
    detail::require(perm.size() == perm_jac.cols(), "to_log_space: permeability length does not match columns");
    JacobianMatrix out{perm_jac.entries * (perm * std::numbers::ln10).asDiagonal(), perm.array().log10().matrix(),
                       ParamSpace::log_permeability};
    return out;
}

/// Discrete adjoint of the steady single-phase pressure system.
///
/// Rows are the well pressures (input well order); columns are cell
/// permeabilities in mD. For each observed cell the adjoint system
/// A^T nu = e_cell is solved once on the existing factorisation, then
/// dO/dk_j = -nu^T (dA/dk_j) p is assembled face by face.
[[nodiscard]] inline JacobianMatrix jacobian_adjoint_single_phase(const GridField &perm_md,
                                                                  const GridGeometry &geometry,
                                                                  const RockFluidProps &props,
                                                                  const std::vector<WellSpec> &wells, Index gauge = -1)
{
    const SinglePhaseResult fwd = solve_single_phase(perm_md, geometry, props, wells, gauge);
    PressureSystem system(geometry, grid_faces(geometry), fwd.gauge);
    system.factorize(fwd.face_conductance);
    const auto &faces = system.faces();
    const Vector &p = fwd.pressure.values;
    const Vector &k = perm_md.values;

    // dc_f/dk_a for the harmonic mean, per mD.
    const double scale = units::millidarcy / props.water_viscosity;
    Matrix g = Matrix::Zero(static_cast<Index>(wells.size()), geometry.cells());
    for (std::size_t r = 0; r < wells.size(); ++r) {
        Vector rhs = Vector::Zero(geometry.cells());
        rhs[wells[r].j * geometry.nx + wells[r].i] = 1.0;
        const Vector nu = system.solve(rhs); // A is symmetric
        for (const auto &f : faces) {
            const double ka = k[f.a];
            const double kb = k[f.b];
            const double s2 = (ka + kb) * (ka + kb);
            const double w = -(nu[f.a] - nu[f.b]) * (p[f.a] - p[f.b]) * f.geom * scale;
            g(static_cast<Index>(r), f.a) += w * 2.0 * kb * kb / s2;
            g(static_cast<Index>(r), f.b) += w * 2.0 * ka * ka / s2;
        }
    }
    return {std::move(g), k, ParamSpace::permeability};
}

/// The Gauss-Newton data vector y - g(m) + G m.
[[nodiscard]] inline Vector linearized_data(const Vector &y, const Vector &g_at_m, const Matrix &jac, const Vector &m)
{
    detail::require(y.size() == g_at_m.size() && jac.rows() == y.size() && jac.cols() == m.size(),
                    "linearized_data: shape mismatch");
    return y - g_at_m + jac * m;
}

} // namespace sparsehm

#endif
