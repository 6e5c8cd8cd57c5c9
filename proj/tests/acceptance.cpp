// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>

#include <sparsehm/sparsehm.hpp>

#include "oracles.hpp"

using namespace sparsehm;

namespace
{

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double rel_fro(const Matrix &a, const Matrix &ref)
{
    return (a - ref).norm() / ref.norm();
}

int failures = 0;

void report(int id, const std::string &name, double limit_s, const std::function<Outcome()> &body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception &e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0.0 && secs >= limit_s) {
        o.pass = false;
        o.detail += "; runtime over " + fmt("%.0f", limit_s) + " s";
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %2d %s: %s (%s; %.1f s)\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
}

void info(const std::string &text)
{
    std::printf("  info: %s\n", text.c_str());
    std::fflush(stdout);
}

// Inputs shared by several criteria.
double worst_mass_balance = 0.0;

void track(const TwoPhaseResult &r)
{
    worst_mass_balance = std::max(worst_mass_balance, std::abs(r.mass_balance_error));
}

ExperimentCase desk_case(ReservoirCase rc)
{
    ExperimentCase c;
    c.reservoir = rc;
    c.scale = ReservoirScale::desk;
    return c;
}

const std::vector<double> sweep_ps{0.0, 0.5, 1.0, 1.5, 2.0};
std::vector<CaseResult> sweep_a;
CaseResult run_b;

Outcome transform_criterion()
{
    const DctBasis basis(32, 32);
    double worst_rt = 0.0;
    double worst_parseval = 0.0;
    for (std::uint64_t s = 1; s <= 50; ++s) {
        Rng rng(s);
        Vector f(1024);
        for (Index i = 0; i < f.size(); ++i) {
            f[i] = rng.uniform(-1.0, 1.0);
        }
        const Vector c = basis.analyze(f);
        worst_rt = std::max(worst_rt, (basis.synthesize(c) - f).cwiseAbs().maxCoeff());
        worst_parseval = std::max(worst_parseval, std::abs(c.norm() - f.norm()) / f.norm());
    }
    return {worst_rt < 1e-10 && worst_parseval < 1e-10,
            "max round trip " + fmt("%.2e", worst_rt) + ", max Parseval " + fmt("%.2e", worst_parseval)};
}

Outcome compaction_criterion()
{
    const auto cfg = build_reservoir(ReservoirCase::A, ReservoirScale::full);
    const TruncationReport r = truncation_report(make_channel_field(cfg.geometry), 0.05, 20, 1);
    const auto desk = build_reservoir(ReservoirCase::A, ReservoirScale::desk);
    const TruncationReport d = truncation_report(make_channel_field(desk.geometry), 0.05, 20, 1);
    info("16x16 desk channel field: top " + fmt("%.3f", d.top_error) + " vs random median "
         + fmt("%.3f", d.random_median_error) + " (ratio " + fmt("%.2f", d.random_median_error / d.top_error) + ")");
    return {3.0 * r.top_error <= r.random_median_error,
            "32x32: top-5% error " + fmt("%.3f", r.top_error) + ", random-5% median " + fmt("%.3f", r.random_median_error)
                + ", ratio " + fmt("%.2f", r.random_median_error / r.top_error)};
}

Outcome gradient_criterion()
{
    const GridGeometry g{8, 8, 10.0, 10.0, 10.0};
    const std::vector<WellSpec> wells{{0, 0, WellKind::injector, 60.0},
                                      {7, 7, WellKind::producer, 20.0},
                                      {0, 7, WellKind::producer, 20.0},
                                      {7, 0, WellKind::producer, 20.0},
                                      {2, 5, WellKind::producer, 0.0}};
    double worst = 0.0;
    double lo = 1e300;
    double hi = 0.0;
    for (std::uint64_t s = 1; s <= 5; ++s) {
        Rng rng(1000 + s);
        GridField k(8, 8);
        for (Index i = 0; i < 64; ++i) {
            k.values[i] = std::pow(10.0, 1.3 + 0.3 * rng.normal());
        }
        const Matrix adj = jacobian_adjoint_single_phase(k, g, RockFluidProps{}, wells).entries;
        const SinglePhaseModel model(g, RockFluidProps{}, wells);
        auto fwd = [&](const Vector &x) { return model.evaluate(x); };
        worst = std::max(worst, rel_fro(jacobian_fd(fwd, k.values).entries, adj));
        const double e1 = rel_fro(jacobian_fd(fwd, k.values, {1e-2, 1e-8, FdScheme::central}).entries, adj);
        const double e2 = rel_fro(jacobian_fd(fwd, k.values, {5e-3, 1e-8, FdScheme::central}).entries, adj);
        lo = std::min(lo, e1 / e2);
        hi = std::max(hi, e1 / e2);
    }
    return {worst < 1e-5 && lo >= 3.0 && hi <= 5.0,
            "max relative error " + fmt("%.2e", worst) + ", halving ratios in [" + fmt("%.3f", lo) + ", "
                + fmt("%.3f", hi) + "]"};
}

Outcome physics_criterion()
{
    for (auto rc : {ReservoirCase::A, ReservoirCase::B}) {
        for (auto sc : {ReservoirScale::desk, ReservoirScale::full}) {
            const auto cfg = build_reservoir(rc, sc);
            track(simulate_two_phase(make_channel_field(cfg.geometry), cfg));
            track(simulate_two_phase(make_smooth_log_field(cfg.geometry), cfg));
        }
    }
    const Index n = 64;
    TwoPhaseConfig cfg;
    cfg.geometry = {n, 1, 5.0, 10.0, 10.0};
    const double area = cfg.geometry.dy * cfg.geometry.dz;
    const double q = cfg.pore_volume() / 200.0;
    cfg.wells = {{0, 0, WellKind::injector, q}, {n - 1, 0, WellKind::producer, q}};
    cfg.schedule.total_days = 100.0;
    cfg.schedule.report_days = {40.0, 50.0, 60.0};
    cfg.numerics.gauge = n - 1;
    const auto r = simulate_two_phase(GridField(n, 1, 100.0), cfg);
    track(r);
    const RockFluidProps &p = cfg.props;
    const double s0 = p.initial_water_saturation;
    const auto bl = oracle::buckley_leverett([&](double s) { return p.fractional_flow(s); }, s0,
                                             1.0 - p.residual_oil);
    const double s_mid = 0.5 * (bl.shock_saturation + s0);
    double worst_front = 0.0;
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
        const double x_exact = q * cfg.schedule.report_days[k] / (p.porosity * area) * bl.front_slope;
        const auto &s = r.snapshots[k].water_saturation.values;
        double x_num = -1.0;
        for (Index c = 0; c + 1 < n; ++c) {
            if (s[c] >= s_mid && s[c + 1] < s_mid) {
                x_num = (c + 0.5) * cfg.geometry.dx + cfg.geometry.dx * (s[c] - s_mid) / (s[c] - s[c + 1]);
                break;
            }
        }
        worst_front = std::max(worst_front, x_num < 0.0 ? 1.0 : std::abs(x_num - x_exact) / x_exact);
    }
    return {worst_mass_balance < 1e-8 && worst_front < 0.05,
            "max mass balance " + fmt("%.2e", worst_mass_balance) + " over simulator runs so far, BL front error "
                + fmt("%.2f%%", 100.0 * worst_front) + " at 40/50/60 days"};
}

SolverConfig cs_config()
{
    SolverConfig cfg;
    cfg.param_space = ParamSpace::permeability;
    cfg.max_iterations = 100;
    cfg.misfit_tolerance = 0.0;
    return cfg;
}

Outcome cs_criterion()
{
    const DctBasis basis(8, 8);
    int recovered = 0;
    for (int s = 1; s <= 20; ++s) {
        const SparseField t = make_sparse_dct_field(8, 8, 4, 100 + s);
        const Matrix a = gaussian_sensing(24, 64, 200 + s);
        const Vector y = a * t.field.values;
        const auto r = run_multiplicative(LinearModel(a), basis, y, backprojection_start(a, y), cs_config());
        const Vector c = basis.analyze(r.m_final);
        recovered += significant_support(c, 1e-2) == t.support
                     && (r.m_final - t.field.values).norm() < 1e-3 * t.field.values.norm();
    }
    // Sub-instances keep k/N and M/N of the main tier.
    const DctBasis small(4, 4);
    const Matrix psi = oracle::dct2d_synthesis_matrix(4, 4);
    int unique = 0;
    int fitted = 0;
    int matched = 0;
    for (int s = 1; s <= 20; ++s) {
        const SparseField t = make_sparse_dct_field(4, 4, 1, 100 + s);
        const Matrix a = gaussian_sensing(6, 16, 200 + s);
        const Vector y = a * t.field.values;
        const auto l0 = oracle::exhaustive_l0(a, psi, y, 2);
        const bool u = l0.size == 1 && l0.supports.size() == 1
                       && std::vector<Index>(l0.supports[0].begin(), l0.supports[0].end()) == t.support;
        unique += u;
        const auto r = run_multiplicative(LinearModel(a), small, y, backprojection_start(a, y), cs_config());
        if ((a * r.m_final - y).norm() > 1e-6 * y.norm()) {
            continue;
        }
        ++fitted;
        matched += u && (small.analyze(r.m_final) - l0.coefficients[0]).norm() < 1e-3 * l0.coefficients[0].norm();
    }
    return {recovered >= 18 && unique == 20 && matched == fitted,
            "N=64: " + std::to_string(recovered) + "/20 recovered; N=16: l0 oracle unique and planted on "
                + std::to_string(unique) + "/20, " + std::to_string(matched) + " of " + std::to_string(fitted)
                + " data-fitting IRLS solutions equal the l0 solution"};
}

Outcome qualitative_criterion()
{
    const auto t0 = std::chrono::steady_clock::now();
    sweep_a = p_sweep(desk_case(ReservoirCase::A), sweep_ps);
    const double per_run = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 5.0;
    auto corr = [&](double p) {
        for (std::size_t k = 0; k < sweep_ps.size(); ++k) {
            if (sweep_ps[k] == p) {
                return sweep_a[k].report.correlation;
            }
        }
        throw std::runtime_error("missing p in sweep");
    };
    std::string line;
    for (std::size_t k = 0; k < sweep_a.size(); ++k) {
        const auto &r = sweep_a[k];
        line += "p=" + fmt("%g", sweep_ps[k]) + " corr " + fmt("%.3f", r.report.correlation) + " misfit ratio "
                + fmt("%.2e", r.report.misfit_ratio) + "; ";
    }
    info(line);
    const CaseResult &p1 = sweep_a[2];
    const bool a = p1.report.misfit_ratio < 0.1 && p1.report.iterations <= 30;
    const double gap = corr(1.0) - corr(2.0);
    const bool b = gap >= 0.15;
    const double d05 = std::abs(corr(0.5) - corr(1.0));
    const double d15 = std::abs(corr(1.5) - corr(2.0));
    const bool c = d05 <= 0.1 && d15 <= 0.1;
    return {a && b && c && per_run < 600.0,
            std::string("(a) ") + (a ? "pass" : "fail") + " p=1 misfit ratio " + fmt("%.2e", p1.report.misfit_ratio)
                + "; (b) " + (b ? "pass" : "fail") + " corr gap p1-p2 " + fmt("%.3f", gap) + "; (c) " + (c ? "pass" : "fail")
                + " |p0.5-p1| " + fmt("%.3f", d05) + ", |p1.5-p2| " + fmt("%.3f", d15)};
}

Outcome p0_criterion()
{
    const CaseResult &p0 = sweep_a[0];
    bool finite = p0.inversion.m_final.allFinite();
    bool monotone = true;
    std::string costs;
    for (std::size_t i = 0; i < p0.inversion.records.size(); ++i) {
        const auto &rec = p0.inversion.records[i];
        finite = finite && std::isfinite(rec.misfit) && std::isfinite(rec.cost) && std::isfinite(rec.sparsity);
        if (i > 0 && rec.cost > p0.inversion.records[i - 1].cost) {
            monotone = false;
        }
        costs += fmt("%.3g", rec.cost) + (i + 1 < p0.inversion.records.size() ? " " : "");
    }
    info("p=0 cost sequence: " + costs);
    info(std::string("p=0 non-monotone cost observed (non-blocking): ") + (monotone ? "no" : "yes"));
    return {p0.report.iterations == 30 && finite,
            std::to_string(p0.report.iterations) + " iterations, " + (finite ? "all finite" : "non-finite values")};
}

Outcome reservoir_b_criterion()
{
    ExperimentCase c = desk_case(ReservoirCase::B);
    c.solver.p = 1.0;
    run_b = run_case(c);
    track(simulate_two_phase(run_b.truth_md, run_b.config));
    info("observations: A " + std::to_string(sweep_a[2].clean.size()) + ", B " + std::to_string(run_b.clean.size()));
    return {run_b.report.misfit_ratio < 0.15 && run_b.report.correlation >= 0.5,
            "misfit ratio " + fmt("%.2e", run_b.report.misfit_ratio) + ", correlation "
                + fmt("%.3f", run_b.report.correlation)};
}

Outcome identity_criterion()
{
    int identical = 0;
    for (std::uint64_t s = 1; s <= 10; ++s) {
        Rng rng(500 + s);
        const Index nx = 3 + static_cast<Index>(s % 3);
        const Index ny = 4;
        const Index n = nx * ny;
        const Index m = s % 2 ? n / 2 : n + 3;
        const DctBasis basis(nx, ny);
        Matrix g(m, n);
        Vector yn(m);
        WeightMatrix w{Vector(n)};
        for (Index i = 0; i < g.size(); ++i) {
            g.data()[i] = rng.normal();
        }
        for (Index i = 0; i < m; ++i) {
            yn[i] = rng.normal();
        }
        for (Index i = 0; i < n; ++i) {
            w.diagonal[i] = rng.uniform(0.05, 5.0);
        }
        const double c = rng.uniform(0.01, 2.0);
        const Vector a = additive_step(g, w, basis, c, yn);
        const Vector b = multiplicative_step(g, w, basis, c, yn);
        identical += a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
    }
    return {identical == 10, std::to_string(identical) + "/10 instances bitwise identical"};
}

Outcome beta_criterion()
{
    const auto &recs = sweep_a[2].inversion.records;
    if (recs.size() < 2 || !recs[1].beta || !recs.back().beta) {
        return {false, "missing beta telemetry"};
    }
    const double b1 = *recs[1].beta;
    const double bn = *recs.back().beta;
    return {bn <= 0.1 * b1, "beta at iteration 1 " + fmt("%.3g", b1) + ", final " + fmt("%.3g", bn) + ", ratio "
                                + fmt("%.2e", bn / b1)};
}

void truth_seed_survey()
{
    // Non-binding: the p=1 versus p=2 gap on other channel draws.
    std::string line;
    for (std::uint64_t seed : {2, 3}) {
        ExperimentCase c = desk_case(ReservoirCase::A);
        c.seed = seed;
        const auto r = p_sweep(c, {1.0, 2.0});
        line += "seed " + std::to_string(seed) + ": p1 " + fmt("%.3f", r[0].report.correlation) + " p2 "
                + fmt("%.3f", r[1].report.correlation) + "; ";
    }
    info("truth-seed survey (non-binding) " + line);
}

} // namespace

int main()
{
    report(1, "transform round trip and Parseval", 5.0, transform_criterion);
    report(2, "channel field DCT compaction", 10.0, compaction_criterion);
    report(3, "single-phase adjoint gradient", 120.0, gradient_criterion);
    report(4, "two-phase mass balance and Buckley-Leverett front", 60.0, physics_criterion);
    report(5, "linear compressed-sensing tier", 120.0, cs_criterion);
    report(6, "desk Reservoir A p-sweep", 0.0, qualitative_criterion);
    report(7, "p=0 completion and finiteness", 0.0, p0_criterion);
    report(8, "desk Reservoir B with reduced data", 600.0, reservoir_b_criterion);
    report(9, "additive/multiplicative step identity", 5.0, identity_criterion);
    report(10, "beta adaptivity", 0.0, beta_criterion);
    truth_seed_survey();
    info("max two-phase mass balance error over all tracked runs " + fmt("%.2e", worst_mass_balance));
    std::printf("acceptance: %d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
