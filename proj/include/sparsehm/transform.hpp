#ifndef SPARSEHM_TRANSFORM_HPP
#define SPARSEHM_TRANSFORM_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <sparsehm/core.hpp>

namespace sparsehm
{

/// Transform-domain representation of a field.
///
/// Entry (kx, ky) is stored at `values[ky * nx + kx]`, the same row-major
/// layout used by GridField.
struct CoefficientVector {
    Index nx = 0;
    Index ny = 0;
    Vector values;

    [[nodiscard]] Index size() const noexcept
    {
        return values.size();
    }
    [[nodiscard]] double operator()(Index kx, Index ky) const
    {
        return values[ky * nx + kx];
    }
};

/// Orthonormal separable 2D DCT-II.
///
/// The 1D factor is C[k][i] = s_k cos(pi (2i + 1) k / 2n) with s_0 = sqrt(1/n)
/// and s_k = sqrt(2/n) otherwise, so C is orthogonal and synthesis is the
/// transpose of analysis. Stateless after construction; safe to share.
class DctBasis
{
public:
    DctBasis(Index nx, Index ny) : nx_(nx), ny_(ny)
    {
        detail::require(nx >= 2 && ny >= 2, "DctBasis: nx and ny must be >= 2");
        cx_ = dct_matrix(nx);
        cy_ = dct_matrix(ny);
    }

    [[nodiscard]] Index nx() const noexcept
    {
        return nx_;
    }
    [[nodiscard]] Index ny() const noexcept
    {
        return ny_;
    }
    [[nodiscard]] Index size() const noexcept
    {
        return nx_ * ny_;
    }

    /// The orthonormal 1D DCT-II matrix of order n (rows are frequencies).
    static Matrix dct_matrix(Index n)
    {
        Matrix c(n, n);
        const double s0 = std::sqrt(1.0 / static_cast<double>(n));
        const double sk = std::sqrt(2.0 / static_cast<double>(n));
        for (Index k = 0; k < n; ++k) {
            for (Index i = 0; i < n; ++i) {
                c(k, i) = (k == 0 ? s0 : sk)
                          * std::cos(std::numbers::pi * static_cast<double>((2 * i + 1) * k) / (2.0 * static_cast<double>(n)));
            }
        }
        return c;
    }

    [[nodiscard]] CoefficientVector analysis(const GridField &field) const
    {
        detail::require(field.nx == nx_ && field.ny == ny_, "analysis: field dimensions do not match basis");
        return {nx_, ny_, analyze(field.values)};
    }

    [[nodiscard]] GridField synthesis(const CoefficientVector &coeffs) const
    {
        detail::require(coeffs.size() == size(), "synthesis: coefficient length does not match basis");
        return {nx_, ny_, synthesize(coeffs.values)};
    }

    /// Phi * m on a flat vector in field ordering.
    [[nodiscard]] Vector analyze(const Vector &m) const
    {
        detail::require(m.size() == size(), "analysis: vector length does not match basis");
        using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const RowMat> f(m.data(), ny_, nx_);
        RowMat c = cy_ * f * cx_.transpose();
        return Eigen::Map<const Vector>(c.data(), size());
    }

    /// Phi^T * c on a flat vector in coefficient ordering.
    [[nodiscard]] Vector synthesize(const Vector &c) const
    {
        detail::require(c.size() == size(), "synthesis: vector length does not match basis");
        using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const RowMat> k(c.data(), ny_, nx_);
        RowMat f = cy_.transpose() * k * cx_;
        return Eigen::Map<const Vector>(f.data(), size());
    }

    /// Explicit N-by-N matrix Phi = kron(Cy, Cx) in the documented orderings.
    [[nodiscard]] Matrix dense() const
    {
        Matrix phi(size(), size());
        for (Index ky = 0; ky < ny_; ++ky) {
            for (Index kx = 0; kx < nx_; ++kx) {
                for (Index j = 0; j < ny_; ++j) {
                    for (Index i = 0; i < nx_; ++i) {
                        phi(ky * nx_ + kx, j * nx_ + i) = cy_(ky, j) * cx_(kx, i);
                    }
                }
            }
        }
        return phi;
    }

    /// Phi^T diag(w) Phi, assembled densely.
    [[nodiscard]] Matrix weighted_gram(const Vector &w) const
    {
        detail::require(w.size() == size(), "weighted_gram: weight length does not match basis");
        const Matrix phi = dense();
        return phi.transpose() * w.asDiagonal() * phi;
    }

private:
    Index nx_;
    Index ny_;
    Matrix cx_;
    Matrix cy_;
};

/// Keep the ceil(fraction * N) largest-magnitude entries and zero the rest.
///
/// Ties in magnitude keep the lower linear index first.
[[nodiscard]] inline CoefficientVector truncate_top_fraction(const CoefficientVector &coeffs, double fraction)
{
    detail::require(fraction > 0.0 && fraction <= 1.0, "truncate_top_fraction: fraction must lie in (0, 1]");
    const Index n = coeffs.size();
    // Guard against products such as 0.1 * 10 landing a hair above an integer.
    const auto keep = static_cast<Index>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(coeffs.values[a]) > std::abs(coeffs.values[b]); });
    CoefficientVector out{coeffs.nx, coeffs.ny, Vector::Zero(n)};
    for (Index r = 0; r < std::min(keep, n); ++r) {
        const Index idx = order[static_cast<std::size_t>(r)];
        out.values[idx] = coeffs.values[idx];
    }
    return out;
}

/// Linear indices of the k largest-magnitude entries, same tie rule as truncation.
[[nodiscard]] inline std::vector<Index> top_k_support(const Vector &values, Index k)
{
    std::vector<Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(values[a]) > std::abs(values[b]); });
    order.resize(static_cast<std::size_t>(std::min<Index>(k, values.size())));
    std::sort(order.begin(), order.end());
    return order;
}

} // namespace sparsehm

#endif
