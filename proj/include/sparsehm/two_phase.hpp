#ifndef SPARSEHM_TWO_PHASE_HPP
#define SPARSEHM_TWO_PHASE_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <sparsehm/reservoir.hpp>

namespace sparsehm
{

struct TwoPhaseNumerics {
    int pressure_steps_per_report = 2; // implicit pressure solves per report interval
    double cfl = 0.9;                  // target Courant number when planning saturation sub-steps
    Index gauge = -1;                  // pinned pressure cell, < 0 selects the central cell
};

struct TwoPhaseConfig {
    GridGeometry geometry;
    RockFluidProps props;
    std::vector<WellSpec> wells;
    Schedule schedule;
    TwoPhaseNumerics numerics;

    void validate() const
    {
        geometry.validate();
        props.validate();
        validate_wells(geometry, wells);
        schedule.validate();
        detail::require(numerics.pressure_steps_per_report >= 1, "numerics: pressure_steps_per_report must be >= 1");
        detail::require(numerics.cfl > 0.0 && numerics.cfl <= 1.0, "numerics: cfl must lie in (0, 1]");
    }

    [[nodiscard]] double pore_volume() const noexcept
    {
        return props.porosity * geometry.cell_volume() * static_cast<double>(geometry.cells());
    }
};

/// Saturation sub-step counts, one per implicit pressure step.
///
/// Reusing the plan of a nearby parameter vector keeps the discrete map
/// m -> g(m) smooth under small perturbations, which finite differences need.
struct StepPlan {
    std::vector<int> substeps;
};

struct TwoPhaseResult {
    ObservationSet observations;
    std::vector<StateSnapshot> snapshots; // one per report time
    StepPlan plan;                        // plan actually used
    double water_injected = 0.0;          // m^3
    double water_produced = 0.0;          // m^3
    double storage_change = 0.0;          // m^3 of water
    double mass_balance_error = 0.0;      // (injected - produced - storage change) / injected
    int cfl_refinements = 0;              // steps where a supplied plan violated CFL <= 1 and was refined
    int pressure_solves = 0;
    int saturation_steps = 0;
};

/// Observation vector in time-major, well-id, quantity order.
///
/// Injectors report pressure; producers report pressure then water
/// saturation, both taken in the well's own cell.
[[nodiscard]] inline ObservationSet extract_observations(const std::vector<StateSnapshot> &snapshots,
                                                         const std::vector<WellSpec> &wells,
                                                         const Schedule &schedule)
{
    const std::size_t per_time = [&] {
        std::size_t n = 0;
        for (const auto &w : wells) {
            n += w.kind == WellKind::injector ? 1 : 2;
        }
        return n;
    }();
    ObservationSet obs;
    obs.values.resize(static_cast<Index>(per_time * schedule.report_days.size()));
    obs.index.reserve(per_time * schedule.report_days.size());
    Index r = 0;
    for (double t : schedule.report_days) {
        const auto it = std::find_if(snapshots.begin(), snapshots.end(),
                                     [&](const StateSnapshot &s) { return std::abs(s.time_days - t) <= 1e-9 * (1.0 + t); });
        if (it == snapshots.end()) {
            throw InvalidInput("extract_observations: no snapshot at report time " + std::to_string(t));
        }
        for (std::size_t w = 0; w < wells.size(); ++w) {
            const Index c = wells[w].j * it->pressure.nx + wells[w].i;
            obs.values[r++] = it->pressure.values[c];
            obs.index.push_back({t, static_cast<Index>(w), Quantity::pressure});
            if (wells[w].kind == WellKind::producer) {
                obs.values[r++] = it->water_saturation.values[c];
                obs.index.push_back({t, static_cast<Index>(w), Quantity::water_saturation});
            }
        }
    }
    return obs;
}

namespace detail
{

inline double corey(double s, double n) noexcept
{
    return n == 2.0 ? s * s : std::pow(s, n);
}

/// Cached relative-permeability evaluation on the hot path.
struct FluidKernel {
    explicit FluidKernel(const RockFluidProps &p)
        : swc(p.connate_water), span(1.0 - p.connate_water - p.residual_oil), nw(p.water_exponent),
          no(p.oil_exponent), inv_mu_w(1.0 / p.water_viscosity), inv_mu_o(1.0 / p.oil_viscosity)
    {
    }
    double swc, span, nw, no, inv_mu_w, inv_mu_o;

    void mobilities(double sw, double &lw, double &lo) const noexcept
    {
        const double s = std::clamp((sw - swc) / span, 0.0, 1.0);
        lw = corey(s, nw) * inv_mu_w;
        lo = corey(1.0 - s, no) * inv_mu_o;
    }
};

} // namespace detail

/// Two-phase incompressible waterflood by IMPES.
///
/// Each report interval is split into `pressure_steps_per_report` implicit
/// pressure solves with upstream total mobility (direction from the previous
/// solve). Saturation is advanced explicitly with single-point upstream
/// fractional flow, sub-stepped so that the Courant number based on the
/// maximum slope of f_w stays below `cfl`. When a `plan` is supplied its
/// sub-step counts are used unless they would exceed Courant number 1, in
/// which case the step is refined and `cfl_refinements` is incremented.
[[nodiscard]] inline TwoPhaseResult simulate_two_phase(const GridField &perm_md, const TwoPhaseConfig &config,
                                                       const StepPlan *plan = nullptr)
{
    config.validate();
    const auto &g = config.geometry;
    const auto &props = config.props;
    detail::require(perm_md.nx == g.nx && perm_md.ny == g.ny,
                    "simulate_two_phase: permeability grid does not match geometry");
    detail::require((perm_md.values.array() > 0.0).all() && perm_md.values.allFinite(),
                    "simulate_two_phase: permeability must be strictly positive and finite");

    const Index n = g.cells();
    const Index gauge = config.numerics.gauge < 0 ? default_gauge(g) : config.numerics.gauge;
    PressureSystem system(g, grid_faces(g), gauge);
    const auto &faces = system.faces();
    const auto nf = static_cast<Index>(faces.size());
    const Vector trans = face_transmissibility(faces, perm_md.values * units::millidarcy);
    const Vector q = well_sources(g, config.wells);
    const double pore = props.porosity * g.cell_volume();
    const double slope = props.max_fractional_flow_slope();
    const detail::FluidKernel fluid(props);

    std::vector<Index> injector_cells;
    std::vector<Index> producer_cells;
    std::vector<double> injector_rates;
    std::vector<double> producer_rates;
    for (const auto &w : config.wells) {
        const Index c = w.j * g.nx + w.i;
        if (w.rate == 0.0) {
            continue;
        }
        if (w.kind == WellKind::injector) {
            injector_cells.push_back(c);
            injector_rates.push_back(w.rate / units::day);
        } else {
            producer_cells.push_back(c);
            producer_rates.push_back(w.rate / units::day);
        }
    }

    TwoPhaseResult out;
    Vector sw = Vector::Constant(n, props.initial_water_saturation);
    const double initial_water = pore * sw.sum();
    Vector lw(n), lo(n), fw(n), face_mob(nf), coeff(nf), flux(nf), inflow(n);
    Vector flux_prev;

    auto update_mobility = [&] {
        for (Index c = 0; c < n; ++c) {
            fluid.mobilities(sw[c], lw[c], lo[c]);
            fw[c] = lw[c] / (lw[c] + lo[c]);
        }
    };
    auto solve_pressure = [&]() -> Vector {
        for (Index f = 0; f < nf; ++f) {
            const Index a = faces[static_cast<std::size_t>(f)].a;
            const Index b = faces[static_cast<std::size_t>(f)].b;
            const double ma = lw[a] + lo[a];
            const double mb = lw[b] + lo[b];
            if (flux_prev.size() == 0) {
                face_mob[f] = 0.5 * (ma + mb);
            } else {
                face_mob[f] = flux_prev[f] >= 0.0 ? ma : mb;
            }
        }
        coeff = trans.cwiseProduct(face_mob);
        system.factorize(coeff);
        Vector p = system.solve(q);
        for (Index f = 0; f < nf; ++f) {
            flux[f] = coeff[f] * (p[faces[static_cast<std::size_t>(f)].a] - p[faces[static_cast<std::size_t>(f)].b]);
        }
        flux_prev = flux;
        ++out.pressure_solves;
        return p;
    };

    const int per_report = config.numerics.pressure_steps_per_report;
    std::size_t outer = 0;
    double t_prev = 0.0;
    update_mobility();
    Vector p;
    if (!config.schedule.report_days.empty()) {
        p = solve_pressure();
    }
    for (double t_report : config.schedule.report_days) {
        const double dt_outer = (t_report - t_prev) * units::day / per_report;
        for (int s = 0; s < per_report; ++s, ++outer) {
            if (s > 0) {
                p = solve_pressure();
            }
            inflow = Vector::Zero(n);
            for (Index f = 0; f < nf; ++f) {
                const auto &fc = faces[static_cast<std::size_t>(f)];
                inflow[flux[f] >= 0.0 ? fc.b : fc.a] += std::abs(flux[f]);
            }
            for (std::size_t k = 0; k < injector_cells.size(); ++k) {
                inflow[injector_cells[k]] += injector_rates[k];
            }
            const double max_rate = inflow.maxCoeff() * slope / pore; // 1/s
            const double courant_one = max_rate > 0.0 ? dt_outer * max_rate : 0.0;
            int nsub = std::max(1, static_cast<int>(std::ceil(courant_one / config.numerics.cfl)));
            if (plan && outer < plan->substeps.size()) {
                const int planned = std::max(1, plan->substeps[outer]);
                const int needed = std::max(1, static_cast<int>(std::ceil(courant_one)));
                if (planned >= needed) {
                    nsub = planned;
                } else {
                    ++out.cfl_refinements;
                }
            }
            out.plan.substeps.push_back(nsub);

            const double dt = dt_outer / nsub;
            const double factor = dt / pore;
            for (int k = 0; k < nsub; ++k) {
                // Mobilities are refreshed every sub-step; fluxes stay fixed.
                Vector rhs = Vector::Zero(n);
                for (Index f = 0; f < nf; ++f) {
                    const auto &fc = faces[static_cast<std::size_t>(f)];
                    const double w = flux[f] * (flux[f] >= 0.0 ? fw[fc.a] : fw[fc.b]);
                    rhs[fc.a] -= w;
                    rhs[fc.b] += w;
                }
                for (std::size_t c = 0; c < injector_cells.size(); ++c) {
                    rhs[injector_cells[c]] += injector_rates[c];
                    out.water_injected += injector_rates[c] * dt;
                }
                for (std::size_t c = 0; c < producer_cells.size(); ++c) {
                    const double w = producer_rates[c] * fw[producer_cells[c]];
                    rhs[producer_cells[c]] -= w;
                    out.water_produced += w * dt;
                }
                sw += factor * rhs;
                update_mobility();
                ++out.saturation_steps;
            }
        }
        // Pressure consistent with the saturation at the report time; it is
        // also the first pressure of the next interval.
        p = solve_pressure();
        out.snapshots.push_back({GridField(g.nx, g.ny, p), GridField(g.nx, g.ny, sw), t_report});
        t_prev = t_report;
    }

    out.storage_change = pore * sw.sum() - initial_water;
    out.mass_balance_error = out.water_injected > 0.0
                                 ? (out.water_injected - out.water_produced - out.storage_change) / out.water_injected
                                 : 0.0;
    out.observations = extract_observations(out.snapshots, config.wells, config.schedule);
    return out;
}

} // namespace sparsehm

#endif
