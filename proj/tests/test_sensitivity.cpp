#include <gtest/gtest.h>

#include <sparsehm/experiments.hpp>

using namespace sparsehm;

namespace
{

GridField lognormal_perm(Index nx, Index ny, std::uint64_t seed)
{
    Rng rng(seed);
    GridField k(nx, ny);
    for (Index i = 0; i < k.values.size(); ++i) {
        k.values[i] = std::pow(10.0, 1.3 + 0.3 * rng.normal());
    }
    return k;
}

const GridGeometry grid8{8, 8, 10.0, 10.0, 10.0};

std::vector<WellSpec> five_spot()
{
    return {{0, 0, WellKind::injector, 60.0},
            {7, 7, WellKind::producer, 20.0},
            {0, 7, WellKind::producer, 20.0},
            {7, 0, WellKind::producer, 20.0},
            {2, 5, WellKind::producer, 0.0}};
}

double rel_fro(const Matrix &a, const Matrix &ref)
{
    return (a - ref).norm() / ref.norm();
}

} // namespace

TEST(Sensitivity, LinearJacobianIsTheMatrix)
{
    EXPECT_EQ(jacobian_linear(Matrix::Identity(3, 3)).entries, Matrix::Identity(3, 3));
    Matrix a = gaussian_sensing(4, 5, 2);
    a.row(2).setZero();
    Vector m_ref = Vector::Constant(5, 3.0);
    const JacobianMatrix j = jacobian_linear(a, m_ref);
    EXPECT_EQ(j.entries, a);
    EXPECT_EQ(j.m_ref, m_ref);
    EXPECT_EQ(j.entries.row(2).cwiseAbs().maxCoeff(), 0.0);
    const LinearModel model(a);
    EXPECT_EQ(model.jacobian(Vector::Zero(5)), model.jacobian(Vector::Ones(5)));
}

TEST(Sensitivity, FiniteDifferencesOnLinearModel)
{
    const Matrix a = gaussian_sensing(6, 9, 5);
    const LinearModel model(a);
    Vector m = Vector::LinSpaced(9, -2.0, 3.0);
    const JacobianMatrix j = jacobian_fd([&](const Vector &x) { return model.evaluate(x); }, m);
    EXPECT_LT(rel_fro(j.entries, a), 1e-8);
    EXPECT_EQ(j.m_ref, m);
}

TEST(Sensitivity, FiniteDifferencesOnSquare)
{
    Vector m(2);
    m << 1.0, 2.0;
    const JacobianMatrix j = jacobian_fd([](const Vector &x) { return Vector(x.array().square()); }, m);
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = 2.0;
    expected(1, 1) = 4.0;
    EXPECT_LT((j.entries - expected).cwiseAbs().maxCoeff(), 1e-6);
    FdOptions fwd;
    fwd.scheme = FdScheme::forward;
    const JacobianMatrix jf = jacobian_fd([](const Vector &x) { return Vector(x.array().square()); }, m, fwd);
    EXPECT_LT((jf.entries - expected).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Sensitivity, FiniteDifferenceFailureNamesColumn)
{
    Vector m = Vector::Ones(3);
    auto g = [](const Vector &x) -> Vector {
        if (x[1] > 1.0) {
            throw SolverFailure("boom");
        }
        return x;
    };
    try {
        (void)jacobian_fd(g, m);
        FAIL() << "expected a failure";
    } catch (const SolverFailure &e) {
        EXPECT_NE(std::string(e.what()).find("column 1"), std::string::npos) << e.what();
    }
    FdOptions bad;
    bad.rel_step = 0.0;
    EXPECT_THROW((void)jacobian_fd(g, m, bad), InvalidInput);
}

TEST(Sensitivity, AdjointMatchesCentralFdOnRandomInstances)
{
    const auto wells = five_spot();
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const GridField k = lognormal_perm(8, 8, s);
        const JacobianMatrix adj = jacobian_adjoint_single_phase(k, grid8, RockFluidProps{}, wells);
        const SinglePhaseModel model(grid8, RockFluidProps{}, wells);
        const JacobianMatrix fd = jacobian_fd([&](const Vector &x) { return model.evaluate(x); }, k.values);
        EXPECT_LT(rel_fro(fd.entries, adj.entries), 1e-5) << "seed " << s;
    }
}

TEST(Sensitivity, FdErrorFallsFourfoldWhenStepHalves)
{
    const auto wells = five_spot();
    const GridField k = lognormal_perm(8, 8, 11);
    const JacobianMatrix adj = jacobian_adjoint_single_phase(k, grid8, RockFluidProps{}, wells);
    const SinglePhaseModel model(grid8, RockFluidProps{}, wells);
    auto g = [&](const Vector &x) { return model.evaluate(x); };
    const double e1 = rel_fro(jacobian_fd(g, k.values, {1e-2, 1e-8, FdScheme::central}).entries, adj.entries);
    const double e2 = rel_fro(jacobian_fd(g, k.values, {5e-3, 1e-8, FdScheme::central}).entries, adj.entries);
    EXPECT_GE(e1 / e2, 3.0);
    EXPECT_LE(e1 / e2, 5.0);
}

TEST(Sensitivity, SymmetricLayoutGivesSymmetricSensitivity)
{
    const GridGeometry g{8, 5, 10.0, 10.0, 5.0};
    const std::vector<WellSpec> wells{{0, 2, WellKind::injector, 50.0}, {7, 2, WellKind::producer, 50.0}};
    const JacobianMatrix j = jacobian_adjoint_single_phase(GridField(8, 5, 30.0), g, RockFluidProps{}, wells);
    const Vector diff = j.entries.row(0) - j.entries.row(1);
    const double scale = diff.cwiseAbs().maxCoeff();
    ASSERT_GT(scale, 0.0);
    for (Index jy = 0; jy < 5; ++jy) {
        for (Index ix = 0; ix < 8; ++ix) {
            EXPECT_LT(std::abs(diff[jy * 8 + ix] - diff[jy * 8 + (7 - ix)]), 1e-8 * scale);
            EXPECT_LT(std::abs(diff[jy * 8 + ix] - diff[(4 - jy) * 8 + ix]), 1e-8 * scale);
        }
    }
}

TEST(Sensitivity, GaugeCellHasZeroRow)
{
    const GridGeometry g{6, 6, 10.0, 10.0, 10.0};
    const Index gi = default_gauge(g) % 6;
    const Index gj = default_gauge(g) / 6;
    const std::vector<WellSpec> wells{{0, 0, WellKind::injector, 10.0},
                                      {5, 5, WellKind::producer, 10.0},
                                      {gi, gj, WellKind::producer, 0.0}};
    const JacobianMatrix j = jacobian_adjoint_single_phase(lognormal_perm(6, 6, 4), g, RockFluidProps{}, wells);
    EXPECT_EQ(j.entries.row(2).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(j.entries.row(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sensitivity, LogSpaceChainRule)
{
    const auto wells = five_spot();
    const GridField k = lognormal_perm(8, 8, 21);
    const JacobianMatrix perm = jacobian_adjoint_single_phase(k, grid8, RockFluidProps{}, wells);
    const JacobianMatrix logj = to_log_space(perm, k.values);
    EXPECT_EQ(logj.param_space, ParamSpace::log_permeability);
    for (Index c = 0; c < 64; ++c) {
        EXPECT_LT((logj.entries.col(c) - perm.entries.col(c) * k.values[c] * std::log(10.0)).norm(),
                  1e-12 * perm.entries.col(c).norm() * k.values[c] + 1e-300);
    }
    const SinglePhaseModel logmodel(grid8, RockFluidProps{}, wells, ParamSpace::log_permeability);
    const Vector m = k.values.array().log10().matrix();
    const JacobianMatrix fd = jacobian_fd([&](const Vector &x) { return logmodel.evaluate(x); }, m,
                                          {1e-6, 1.0, FdScheme::central}, ParamSpace::log_permeability);
    EXPECT_LT(rel_fro(fd.entries, logj.entries), 1e-5);
    EXPECT_LT(rel_fro(logmodel.jacobian(m), logj.entries), 1e-12);
}

TEST(Sensitivity, LinearizedData)
{
    const Matrix a = gaussian_sensing(5, 4, 8);
    const Vector m = Vector::LinSpaced(4, 0.5, 2.0);
    const Vector y = Vector::LinSpaced(5, -1.0, 1.0);
    EXPECT_LT((linearized_data(y, a * m, a, m) - y).norm(), 1e-14);
    const Vector g0 = Vector::Constant(5, 0.3);
    EXPECT_EQ(linearized_data(y, g0, a, Vector::Zero(4)), y - g0);
    const Vector g = Vector::LinSpaced(5, 2.0, 7.0);
    Vector expected(5);
    for (Index r = 0; r < 5; ++r) {
        double gm = 0.0;
        for (Index c = 0; c < 4; ++c) {
            gm += a(r, c) * m[c];
        }
        expected[r] = y[r] - g[r] + gm;
    }
    EXPECT_LT((linearized_data(y, g, a, m) - expected).norm(), 1e-13);
    EXPECT_THROW((void)linearized_data(y, g, a, Vector::Zero(3)), InvalidInput);
}

TEST(Sensitivity, TwoPhaseFdJacobianMatchesCentralDifferences)
{
    // Coarse check on a small heterogeneous case: forward differences with a
    // frozen step plan against central differences without one.
    TwoPhaseConfig cfg;
    cfg.geometry = {6, 6, 20.0, 20.0, 10.0};
    cfg.schedule = Schedule::uniform(200.0, 4);
    const double rate = cfg.pore_volume() / 400.0;
    cfg.wells = {{0, 2, WellKind::injector, rate}, {5, 3, WellKind::producer, rate}};
    Rng rng(3);
    Vector m(36);
    for (Index i = 0; i < 36; ++i) {
        m[i] = 1.3 + 0.3 * rng.normal();
    }
    const TwoPhaseModel model(cfg, ParamSpace::log_permeability, Vector::Ones(12));
    const Matrix gf = model.jacobian(m);
    auto g = [&](const Vector &x) { return model.evaluate(x); };
    const Matrix gc = jacobian_fd(g, m, {1e-4, 1.0, FdScheme::central}, ParamSpace::log_permeability).entries;
    EXPECT_EQ(gf.rows(), 12);
    EXPECT_EQ(gf.cols(), 36);
    EXPECT_TRUE(gf.allFinite());
    EXPECT_LT(rel_fro(gf, gc), 1e-2);
}
