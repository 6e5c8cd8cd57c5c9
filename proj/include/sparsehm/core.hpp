#ifndef SPARSEHM_CORE_HPP
#define SPARSEHM_CORE_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sparsehm
{

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Raised when caller-supplied data violates a documented precondition.
class InvalidInput : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical solve cannot produce a trustworthy answer.
class SolverFailure : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

namespace detail
{

inline void require(bool cond, const std::string &what)
{
    if (!cond) {
        throw InvalidInput(what);
    }
}

} // namespace detail

/// Cell-centred scalar field on an nx-by-ny grid.
///
/// Storage is row-major with y outer: the value of cell (i, j) lives at
/// `values[j * nx + i]`.
struct GridField {
    Index nx = 0;
    Index ny = 0;
    Vector values;

    GridField() = default;
    GridField(Index nx_, Index ny_, double fill = 0.0) : nx(nx_), ny(ny_), values(Vector::Constant(nx_ * ny_, fill))
    {
        detail::require(nx_ > 0 && ny_ > 0, "GridField: dimensions must be positive");
    }
    GridField(Index nx_, Index ny_, Vector v) : nx(nx_), ny(ny_), values(std::move(v))
    {
        detail::require(nx_ > 0 && ny_ > 0, "GridField: dimensions must be positive");
        detail::require(values.size() == nx_ * ny_, "GridField: value count does not match nx*ny");
    }

    [[nodiscard]] Index size() const noexcept
    {
        return nx * ny;
    }
    [[nodiscard]] Index linear(Index i, Index j) const noexcept
    {
        return j * nx + i;
    }
    double &operator()(Index i, Index j)
    {
        return values[linear(i, j)];
    }
    [[nodiscard]] double operator()(Index i, Index j) const
    {
        return values[linear(i, j)];
    }
};

/// Parameterisation of the unknown field seen by the inversion.
enum class ParamSpace { permeability, log_permeability };

inline const char *to_string(ParamSpace s)
{
    return s == ParamSpace::permeability ? "permeability" : "log-permeability";
}

} // namespace sparsehm

#endif
