#ifndef SPARSEHM_RESERVOIR_MODEL_HPP
#define SPARSEHM_RESERVOIR_MODEL_HPP

#include <cmath>
#include <utility>
#include <vector>

#include <sparsehm/sensitivity.hpp>
#include <sparsehm/two_phase.hpp>

namespace sparsehm
{

/// Map a parameter vector to a permeability field in mD.
[[nodiscard]] inline GridField to_permeability(const Vector &m, Index nx, Index ny, ParamSpace space)
{
    if (space == ParamSpace::permeability) {
        return {nx, ny, m};
    }
    return {nx, ny, Vector(Eigen::pow(10.0, m.array()).matrix())};
}

[[nodiscard]] inline Vector to_parameters(const GridField &perm_md, ParamSpace space)
{
    if (space == ParamSpace::permeability) {
        return perm_md.values;
    }
    return perm_md.values.array().log10().matrix();
}

/// One scale per observation entry: the standard deviation of that entry's
/// quantity class (pressure or saturation) in `reference`, or 1 when the
/// class is constant.
[[nodiscard]] inline Vector class_scales(const ObservationSet &reference)
{
    Vector scale = Vector::Ones(reference.size());
    for (Quantity q : {Quantity::pressure, Quantity::water_saturation}) {
        double sum = 0.0;
        double sq = 0.0;
        int count = 0;
        for (std::size_t r = 0; r < reference.index.size(); ++r) {
            if (reference.index[r].quantity == q) {
                const double v = reference.values[static_cast<Index>(r)];
                sum += v;
                sq += v * v;
                ++count;
            }
        }
        if (count < 2) {
            continue;
        }
        const double mean = sum / count;
        const double var = std::max(sq / count - mean * mean, 0.0);
        const double sd = std::sqrt(var);
        for (std::size_t r = 0; r < reference.index.size(); ++r) {
            if (reference.index[r].quantity == q && sd > 0.0) {
                scale[static_cast<Index>(r)] = sd;
            }
        }
    }
    return scale;
}

/// Two-phase forward-model handle: parameters -> scaled observations.
///
/// The Jacobian is a forward-difference FD in parameter space. Every
/// perturbed run reuses the saturation sub-step plan of the base run, so
/// the columns differentiate one smooth discrete map.
class TwoPhaseModel
{
public:
    TwoPhaseModel(TwoPhaseConfig config, ParamSpace space, Vector data_scale, FdOptions fd = default_fd())
        : config_(std::move(config)), space_(space), scale_(std::move(data_scale)), fd_(fd)
    {
        config_.validate();
    }

    /// Forward differences with a unit floor so steps stay ~1e-6 in log10 units.
    static FdOptions default_fd()
    {
        return {1e-6, 1.0, FdScheme::forward};
    }

    [[nodiscard]] const TwoPhaseConfig &config() const noexcept
    {
        return config_;
    }
    [[nodiscard]] ParamSpace param_space() const noexcept
    {
        return space_;
    }
    [[nodiscard]] const Vector &data_scale() const noexcept
    {
        return scale_;
    }

    [[nodiscard]] TwoPhaseResult simulate(const Vector &m, const StepPlan *plan = nullptr) const
    {
        return simulate_two_phase(to_permeability(m, config_.geometry.nx, config_.geometry.ny, space_), config_, plan);
    }

    [[nodiscard]] Vector evaluate(const Vector &m) const
    {
        return scaled(simulate(m).observations.values);
    }

    [[nodiscard]] Matrix jacobian(const Vector &m) const
    {
        const TwoPhaseResult base = simulate(m);
        const Vector g0 = scaled(base.observations.values);
        const StepPlan plan = base.plan;
        auto g = [&](const Vector &x) { return scaled(simulate(x, &plan).observations.values); };
        return jacobian_fd(g, m, fd_, space_, &g0).entries;
    }

private:
    [[nodiscard]] Vector scaled(const Vector &raw) const
    {
        detail::require(raw.size() == scale_.size(), "TwoPhaseModel: data scale length does not match observations");
        return raw.cwiseQuotient(scale_);
    }

    TwoPhaseConfig config_;
    ParamSpace space_;
    Vector scale_;
    FdOptions fd_;
};

/// Steady single-phase handle: parameters -> well pressures (Pa).
class SinglePhaseModel
{
public:
    SinglePhaseModel(GridGeometry geometry, RockFluidProps props, std::vector<WellSpec> wells,
                     ParamSpace space = ParamSpace::permeability, Index gauge = -1)
        : geometry_(geometry), props_(props), wells_(std::move(wells)), space_(space), gauge_(gauge)
    {
    }

    [[nodiscard]] Vector evaluate(const Vector &m) const
    {
        return solve_single_phase(to_permeability(m, geometry_.nx, geometry_.ny, space_), geometry_, props_, wells_,
                                  gauge_)
            .well_pressures;
    }

    /// Adjoint Jacobian in this model's parameter space.
    [[nodiscard]] Matrix jacobian(const Vector &m) const
    {
        const GridField perm = to_permeability(m, geometry_.nx, geometry_.ny, space_);
        JacobianMatrix jac = jacobian_adjoint_single_phase(perm, geometry_, props_, wells_, gauge_);
        if (space_ == ParamSpace::log_permeability) {
            jac = to_log_space(jac, perm.values);
        }
        return jac.entries;
    }

    [[nodiscard]] const GridGeometry &geometry() const noexcept
    {
        return geometry_;
    }
    [[nodiscard]] const std::vector<WellSpec> &wells() const noexcept
    {
        return wells_;
    }

private:
    GridGeometry geometry_;
    RockFluidProps props_;
    std::vector<WellSpec> wells_;
    ParamSpace space_;
    Index gauge_;
};

} // namespace sparsehm

#endif
