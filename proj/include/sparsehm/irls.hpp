#ifndef SPARSEHM_IRLS_HPP
#define SPARSEHM_IRLS_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include <sparsehm/sensitivity.hpp>
#include <sparsehm/transform.hpp>

namespace sparsehm
{

enum class RegularizationMode { additive, multiplicative };

inline const char *to_string(RegularizationMode m)
{
    return m == RegularizationMode::additive ? "additive" : "multiplicative";
}

struct SolverConfig {
    double p = 1.0;
    RegularizationMode mode = RegularizationMode::multiplicative;
    std::optional<double> alpha; // additive only
    double alpha_decay = 1.0;    // alpha_n = alpha * alpha_decay^(n-1)
    int max_iterations = 30;
    double misfit_tolerance = 1e-4;
    double epsilon_floor = 1e-8;
    double damping = 0.0; // initial damping on factorisation failure; 0 selects 1e-10 * trace / N
    ParamSpace param_space = ParamSpace::log_permeability;
    double noise_energy = 0.0; // sigma: stop once misfit <= sigma
    double clamp_low = -2.0;   // log10 mD box, applied only in log-permeability space
    double clamp_high = 5.0;
    int max_step_halvings = 0; // 0 takes the full Gauss-Newton step every iteration

    void validate() const
    {
        detail::require(p >= 0.0 && p <= 2.0, "SolverConfig: p must lie in [0, 2]");
        if (mode == RegularizationMode::additive) {
            detail::require(alpha.has_value(), "SolverConfig: additive mode requires alpha");
            detail::require(*alpha >= 0.0, "SolverConfig: alpha must be >= 0");
        }
        detail::require(alpha_decay > 0.0, "SolverConfig: alpha_decay must be positive");
        detail::require(max_iterations >= 0, "SolverConfig: max_iterations must be >= 0");
        detail::require(epsilon_floor > 0.0, "SolverConfig: epsilon_floor must be positive");
        detail::require(damping >= 0.0 && noise_energy >= 0.0, "SolverConfig: damping and sigma must be >= 0");
        detail::require(clamp_low < clamp_high, "SolverConfig: clamp box is empty");
        detail::require(max_step_halvings >= 0, "SolverConfig: max_step_halvings must be >= 0");
    }

    /// Only 0 < p <= 1 is sparsity promoting; other values are still allowed.
    [[nodiscard]] bool promotes_sparsity() const noexcept
    {
        return p > 0.0 && p <= 1.0;
    }
};

/// Diagonal of W, strictly positive.
struct WeightMatrix {
    Vector diagonal;
};

struct IterationRecord {
    int iteration = 0;           // 0 is the starting model
    double misfit = 0.0;         // ||y - g(m)||^2
    double sparsity = 0.0;       // SP(m) with W built at this iterate
    double cost = 0.0;           // additive or multiplicative objective
    double epsilon = 0.0;        // epsilon_n
    std::optional<double> beta;  // multiplicative only
    double alpha = 0.0;          // additive only
    int clamp_count = 0;         // parameters clamped when producing this iterate
    std::size_t snapshot = 0;    // index into InversionResult::iterates
};

enum class StopReason { max_iterations, misfit_stalled, discrepancy };

inline const char *to_string(StopReason r)
{
    switch (r) {
    case StopReason::max_iterations:
        return "max_iterations";
    case StopReason::misfit_stalled:
        return "misfit_stalled";
    case StopReason::discrepancy:
        return "discrepancy";
    }
    return "unknown";
}

struct InversionResult {
    Vector m_final;
    std::vector<IterationRecord> records;
    std::vector<Vector> iterates;
    StopReason stop = StopReason::max_iterations;
};

/// Raised when a driver aborts; carries the telemetry gathered so far.
class InversionFailure : public SolverFailure
{
public:
    InversionFailure(const std::string &what, InversionResult partial)
        : SolverFailure(what), partial_(std::move(partial))
    {
    }
    [[nodiscard]] const InversionResult &partial() const noexcept
    {
        return partial_;
    }

private:
    InversionResult partial_;
};

[[nodiscard]] inline double squared_misfit(const Vector &y, const Vector &g_at_m)
{
    detail::require(y.size() == g_at_m.size(), "misfit: shape mismatch");
    return (y - g_at_m).squaredNorm();
}

/// epsilon_n = max(||y - g(m)||^2, floor).
[[nodiscard]] inline double compute_epsilon(const Vector &y, const Vector &g_at_m, double floor = 1e-8)
{
    return std::max(squared_misfit(y, g_at_m), floor);
}

/// W_ii = (c_i^2 + eps)^((p - 2) / 2).
[[nodiscard]] inline WeightMatrix compute_weights(const Vector &coeffs, double eps, double p)
{
    detail::require(eps > 0.0, "compute_weights: eps must be positive");
    const double expo = 0.5 * (p - 2.0);
    WeightMatrix w{(coeffs.array().square() + eps).pow(expo).matrix()};
    if (!w.diagonal.allFinite() || (w.diagonal.array() <= 0.0).any()) {
        throw SolverFailure("compute_weights: weights are not finite and positive");
    }
    return w;
}

[[nodiscard]] inline WeightMatrix compute_weights(const CoefficientVector &coeffs, double eps, double p)
{
    return compute_weights(coeffs.values, eps, p);
}

/// SP(m) = sum_i W_ii (Phi m)_i^2.
[[nodiscard]] inline double sparsity_term(const Vector &m, const DctBasis &basis, const WeightMatrix &w)
{
    detail::require(w.diagonal.size() == basis.size(), "sparsity_term: weight length does not match basis");
    return w.diagonal.dot(basis.analyze(m).cwiseAbs2());
}

[[nodiscard]] inline double additive_cost(const Vector &m, const Vector &y, const Vector &g_at_m,
                                          const DctBasis &basis, const WeightMatrix &w, double alpha)
{
    return squared_misfit(y, g_at_m) + alpha * sparsity_term(m, basis, w);
}

[[nodiscard]] inline double multiplicative_cost(const Vector &m, const Vector &y, const Vector &g_at_m,
                                                const DctBasis &basis, const WeightMatrix &w)
{
    return squared_misfit(y, g_at_m) * sparsity_term(m, basis, w);
}

/// beta = misfit / SP, with SP replaced by `floor` when SP < floor.
[[nodiscard]] inline double compute_beta(const Vector &y, const Vector &g_at_m, double sp, double floor = 1e-8)
{
    return squared_misfit(y, g_at_m) / std::max(sp, floor);
}

struct StepDiagnostics {
    bool dual_form = false;
    double damping = 0.0;
    double relative_residual = 0.0;
};

/// Solve (G^T G + c Phi^T W Phi) m = G^T y_n.
///
/// With c > 0 and fewer rows than columns the identical solution is formed
/// through the M-by-M system (G Q^-1 G^T + I) z = y_n, m = Q^-1 G^T z,
/// Q = c Phi^T W Phi; this stays accurate as c W -> 0, where the N-by-N
/// matrix loses the regulariser to rounding. Otherwise the N-by-N matrix
/// is Cholesky factorised, adding damping * I (x10 per retry, up to
/// 1e-2 * trace / N) only if factorisation fails.
[[nodiscard]] inline Vector regularized_step(const Matrix &jac, const WeightMatrix &w, const DctBasis &basis,
                                             double weight, const Vector &y_n, double damping = 0.0,
                                             StepDiagnostics *diag = nullptr)
{
    const Index n = basis.size();
    detail::require(jac.cols() == n && w.diagonal.size() == n, "regularized_step: parameter dimension mismatch");
    detail::require(jac.rows() == y_n.size(), "regularized_step: data dimension mismatch");
    detail::require(weight >= 0.0 && std::isfinite(weight), "regularized_step: regularisation weight must be >= 0");
    detail::require((w.diagonal.array() > 0.0).all(), "regularized_step: weights must be positive");

    const Vector rhs = jac.transpose() * y_n;
    StepDiagnostics local;
    Vector m;
    const Vector d = weight * w.diagonal;
    if (weight > 0.0 && jac.rows() < n && (d.array() > 0.0).all() && d.allFinite()) {
        local.dual_form = true;
        // B = G Phi^T, so G Q^-1 G^T = B D^-1 B^T.
        Matrix b(jac.rows(), n);
        for (Index r = 0; r < jac.rows(); ++r) {
            b.row(r) = basis.analyze(jac.row(r).transpose()).transpose();
        }
        const Vector dinv = d.cwiseInverse();
        Matrix s = b * dinv.asDiagonal() * b.transpose();
        s.diagonal().array() += 1.0;
        Eigen::LLT<Matrix> llt(s);
        if (llt.info() != Eigen::Success) {
            throw SolverFailure("regularized_step: dual system factorisation failed");
        }
        const Vector z = llt.solve(y_n);
        m = basis.synthesize(dinv.cwiseProduct(b.transpose() * z));
    } else {
        Matrix h = jac.transpose() * jac;
        if (weight > 0.0) {
            h += basis.weighted_gram(d);
        }
        const double scale = h.trace() / static_cast<double>(n);
        if (!(scale > 0.0) || !std::isfinite(scale)) {
            throw SolverFailure("regularized_step: normal equations have trace/N = " + std::to_string(scale));
        }
        double delta = 0.0;
        Eigen::LLT<Matrix> llt(h);
        if (llt.info() != Eigen::Success) {
            delta = damping > 0.0 ? damping : 1e-10 * scale;
            while (true) {
                Matrix hd = h;
                hd.diagonal().array() += delta;
                llt.compute(hd);
                if (llt.info() == Eigen::Success) {
                    break;
                }
                delta *= 10.0;
                if (delta > 1e-2 * scale) {
                    throw SolverFailure("regularized_step: normal equations not positive definite even with damping "
                                        + std::to_string(delta / 10.0) + "; trace/N = " + std::to_string(scale));
                }
            }
        }
        m = llt.solve(rhs);
        local.damping = delta;
        Matrix hd = h;
        hd.diagonal().array() += delta;
        const double denom = rhs.norm();
        local.relative_residual = denom > 0.0 ? (hd * m - rhs).norm() / denom : (hd * m).norm();
    }
    if (local.dual_form) {
        Matrix h = jac.transpose() * jac + basis.weighted_gram(d);
        const double denom = rhs.norm();
        local.relative_residual = denom > 0.0 ? (h * m - rhs).norm() / denom : (h * m).norm();
    }
    if (!m.allFinite()) {
        throw SolverFailure("regularized_step: non-finite update");
    }
    if (diag) {
        *diag = local;
    }
    return m;
}

/// Additive update: (G^T G + alpha Phi^T W Phi) m = G^T y_n.
[[nodiscard]] inline Vector additive_step(const Matrix &jac, const WeightMatrix &w, const DctBasis &basis,
                                          double alpha, const Vector &y_n, double damping = 0.0,
                                          StepDiagnostics *diag = nullptr)
{
    return regularized_step(jac, w, basis, alpha, y_n, damping, diag);
}

/// Multiplicative update: (G^T G + beta(m_n) Phi^T W Phi) m = G^T y_n.
[[nodiscard]] inline Vector multiplicative_step(const Matrix &jac, const WeightMatrix &w, const DctBasis &basis,
                                                double beta, const Vector &y_n, double damping = 0.0,
                                                StepDiagnostics *diag = nullptr)
{
    return regularized_step(jac, w, basis, beta, y_n, damping, diag);
}

/// Anything with pure `evaluate(m)` and `jacobian(m)`.
template <typename M>
concept ForwardModel = requires(const M &model, const Vector &m) {
    { model.evaluate(m) } -> std::convertible_to<Vector>;
    { model.jacobian(m) } -> std::convertible_to<Matrix>;
};

namespace detail
{

struct IterateState {
    Vector g;
    double misfit = 0.0;
    double epsilon = 0.0;
    WeightMatrix w;
    double sp = 0.0;
    double beta = 0.0;
};

inline IterateState describe(const Vector &m, const Vector &g, const Vector &y, const DctBasis &basis,
                             const SolverConfig &cfg)
{
    IterateState s;
    s.g = g;
    s.misfit = squared_misfit(y, g);
    s.epsilon = std::max(s.misfit, cfg.epsilon_floor);
    s.w = compute_weights(basis.analyze(m), s.epsilon, cfg.p);
    s.sp = sparsity_term(m, basis, s.w);
    s.beta = s.misfit / std::max(s.sp, cfg.epsilon_floor);
    return s;
}

template <ForwardModel Model>
InversionResult run_irls(const Model &model, const DctBasis &basis, const Vector &y, const Vector &m0,
                         const SolverConfig &cfg, RegularizationMode mode)
{
    cfg.validate();
    if (mode == RegularizationMode::additive) {
        require(cfg.alpha.has_value(), "run_additive: alpha must be set");
    }
    require(m0.size() == basis.size(), "irls: starting model length does not match basis");

    InversionResult result;
    const bool additive = mode == RegularizationMode::additive;
    const bool clamp = cfg.param_space == ParamSpace::log_permeability;
    auto alpha_at = [&](int n) { return additive ? *cfg.alpha * std::pow(cfg.alpha_decay, n - 1) : 0.0; };

    Vector m = m0;
    IterateState state;
    auto push_record = [&](int iteration, int clamps) {
        IterationRecord rec;
        rec.iteration = iteration;
        rec.misfit = state.misfit;
        rec.sparsity = state.sp;
        rec.epsilon = state.epsilon;
        rec.clamp_count = clamps;
        if (additive) {
            rec.alpha = alpha_at(std::max(iteration, 1));
            rec.cost = state.misfit + rec.alpha * state.sp;
        } else {
            rec.beta = state.beta;
            rec.cost = state.misfit * state.sp;
        }
        rec.snapshot = result.iterates.size();
        result.iterates.push_back(m);
        result.records.push_back(rec);
    };
    auto fail = [&](const std::exception &e) {
        result.m_final = m;
        throw InversionFailure(std::string("irls aborted: ") + e.what(), result);
    };

    try {
        state = describe(m, model.evaluate(m), y, basis, cfg);
    } catch (const std::exception &e) {
        fail(e);
    }
    push_record(0, 0);

    int stalled = 0;
    result.stop = StopReason::max_iterations;
    for (int n = 1; n <= cfg.max_iterations; ++n) {
        if (state.misfit <= cfg.noise_energy) {
            result.stop = StopReason::discrepancy;
            break;
        }
        int clamps = 0;
        try {
            const Matrix jac = model.jacobian(m);
            const Vector y_n = linearized_data(y, state.g, jac, m);
            const double weight = additive ? alpha_at(n) : state.beta;
            const Vector full = regularized_step(jac, state.w, basis, weight, y_n, cfg.damping);
            auto project = [&](Vector v, int &count) {
                count = 0;
                if (clamp) {
                    for (Index i = 0; i < v.size(); ++i) {
                        const double c = std::clamp(v[i], cfg.clamp_low, cfg.clamp_high);
                        count += c != v[i] ? 1 : 0;
                        v[i] = c;
                    }
                }
                return v;
            };
            // Objective the update minimises: W and the weight frozen at m_n.
            auto frozen = [&](const Vector &x, const Vector &gx) {
                return squared_misfit(y, gx) + weight * sparsity_term(x, basis, state.w);
            };
            const double previous = state.misfit;
            Vector next = project(full, clamps);
            Vector g_next = model.evaluate(next);
            if (cfg.max_step_halvings > 0) {
                const double here = frozen(m, state.g);
                double t = 1.0;
                for (int h = 0; h < cfg.max_step_halvings && !(frozen(next, g_next) < here); ++h) {
                    t *= 0.5;
                    next = project(m + t * (full - m), clamps);
                    g_next = model.evaluate(next);
                }
            }
            m = std::move(next);
            state = describe(m, g_next, y, basis, cfg);
            const double change = std::abs(state.misfit - previous) / std::max(previous, cfg.epsilon_floor);
            stalled = change < cfg.misfit_tolerance ? stalled + 1 : 0;
        } catch (const std::exception &e) {
            fail(e);
        }
        push_record(n, clamps);
        if (stalled >= 2) {
            result.stop = StopReason::misfit_stalled;
            break;
        }
    }
    if (result.stop == StopReason::max_iterations && state.misfit <= cfg.noise_energy) {
        result.stop = StopReason::discrepancy;
    }
    result.m_final = m;
    return result;
}

} // namespace detail

/// Gauss-Newton with additive reweighted l_p regularisation.
template <ForwardModel Model>
[[nodiscard]] InversionResult run_additive(const Model &model, const DctBasis &basis, const Vector &y,
                                           const Vector &m0, const SolverConfig &config)
{
    return detail::run_irls(model, basis, y, m0, config, RegularizationMode::additive);
}

/// Gauss-Newton with multiplicative reweighted l_p regularisation; beta is
/// recomputed from the current iterate every iteration.
template <ForwardModel Model>
[[nodiscard]] InversionResult run_multiplicative(const Model &model, const DctBasis &basis, const Vector &y,
                                                 const Vector &m0, const SolverConfig &config)
{
    return detail::run_irls(model, basis, y, m0, config, RegularizationMode::multiplicative);
}

/// Dispatch on config.mode.
template <ForwardModel Model>
[[nodiscard]] InversionResult run_inversion(const Model &model, const DctBasis &basis, const Vector &y,
                                            const Vector &m0, const SolverConfig &config)
{
    return detail::run_irls(model, basis, y, m0, config, config.mode);
}

} // namespace sparsehm

#endif
