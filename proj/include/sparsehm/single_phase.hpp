#ifndef SPARSEHM_SINGLE_PHASE_HPP
#define SPARSEHM_SINGLE_PHASE_HPP

#include <vector>

#include <sparsehm/reservoir.hpp>

namespace sparsehm
{

struct SinglePhaseResult {
    GridField pressure;          // Pa, gauge cell pinned to zero
    Vector well_pressures;       // Pa, one per well in input order
    Vector face_conductance;     // T_f / mu, m^3 / (Pa s)
    Index gauge = 0;
};

/// Steady incompressible Darcy flow of water with rate-controlled wells.
///
/// Solves sum_f T_f / mu_w (p_a - p_b) = q_a for every cell, with T_f the
/// harmonic-mean face transmissibility. `gauge < 0` selects the central cell.
[[nodiscard]] inline SinglePhaseResult solve_single_phase(const GridField &perm_md, const GridGeometry &geometry,
                                                          const RockFluidProps &props,
                                                          const std::vector<WellSpec> &wells, Index gauge = -1)
{
    geometry.validate();
    props.validate();
    validate_wells(geometry, wells);
    detail::require(perm_md.nx == geometry.nx && perm_md.ny == geometry.ny,
                    "solve_single_phase: permeability grid does not match geometry");
    detail::require((perm_md.values.array() > 0.0).all() && perm_md.values.allFinite(),
                    "solve_single_phase: permeability must be strictly positive");
    if (gauge < 0) {
        gauge = default_gauge(geometry);
    }

    PressureSystem system(geometry, grid_faces(geometry), gauge);
    const Vector coeff =
        face_transmissibility(system.faces(), perm_md.values * units::millidarcy) / props.water_viscosity;
    system.factorize(coeff);
    const Vector p = system.solve(well_sources(geometry, wells));

    SinglePhaseResult out{GridField(geometry.nx, geometry.ny, p), Vector(static_cast<Index>(wells.size())), coeff,
                          gauge};
    for (std::size_t w = 0; w < wells.size(); ++w) {
        out.well_pressures[static_cast<Index>(w)] = p[wells[w].j * geometry.nx + wells[w].i];
    }
    return out;
}

} // namespace sparsehm

#endif
