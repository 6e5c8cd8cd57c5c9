#ifndef SPARSEHM_LINEAR_MODEL_HPP
#define SPARSEHM_LINEAR_MODEL_HPP

#include <sparsehm/reservoir.hpp>

namespace sparsehm
{

/// y = A m, with synthetic keys (time 0, well = row, pressure).
[[nodiscard]] inline ObservationSet simulate_linear(const Matrix &sensing, const Vector &m)
{
    detail::require(sensing.cols() == m.size(), "simulate_linear: matrix columns do not match parameter length");
    ObservationSet obs;
    obs.values = sensing * m;
    obs.index.reserve(static_cast<std::size_t>(sensing.rows()));
    for (Index r = 0; r < sensing.rows(); ++r) {
        obs.index.push_back({0.0, r, Quantity::pressure});
    }
    return obs;
}

/// Forward-model handle for the linear tier.
class LinearModel
{
public:
    explicit LinearModel(Matrix sensing) : a_(std::move(sensing)) {}

    [[nodiscard]] Vector evaluate(const Vector &m) const
    {
        return simulate_linear(a_, m).values;
    }
    [[nodiscard]] Matrix jacobian(const Vector & /*m*/) const
    {
        return a_;
    }
    [[nodiscard]] const Matrix &matrix() const noexcept
    {
        return a_;
    }

private:
    Matrix a_;
};

} // namespace sparsehm

#endif
