// sparsehm command-line driver.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <sparsehm/sparsehm.hpp>

namespace fs = std::filesystem;
using namespace sparsehm;

namespace
{

class UsageError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

std::string p_label(double p)
{
    std::ostringstream os;
    os << p;
    return os.str();
}

struct Setup {
    io::KeyValueConfig kv;
    fs::path base;
    io::ModelKind kind = io::ModelKind::two_phase;
    TwoPhaseConfig forward;     // two_phase and single_phase
    io::LinearSetup linear;     // linear
    GridGeometry grid;          // geometry for grid files
};

Setup load_setup(const fs::path &config)
{
    Setup s{io::KeyValueConfig::load(config), config.parent_path(), {}, {}, {}, {}};
    s.kind = io::model_kind(s.kv);
    if (s.kind == io::ModelKind::linear) {
        s.linear = io::parse_linear_setup(s.kv);
        s.grid = {s.linear.nx, s.linear.ny, 1.0, 1.0, 1.0};
    } else {
        s.forward = io::parse_forward_config(s.kv);
        s.grid = s.forward.geometry;
    }
    return s;
}

const char *field_units(io::ModelKind kind)
{
    return kind == io::ModelKind::linear ? "1" : "mD";
}

GridField load_truth(const Setup &s, const std::optional<fs::path> &truth, std::uint64_t seed)
{
    if (truth) {
        io::GridFile g = io::read_grid(*truth);
        if (g.field.nx != s.grid.nx || g.field.ny != s.grid.ny) {
            throw io::FormatError(truth->string() + ": grid does not match the configured grid");
        }
        return g.field;
    }
    if (s.kind == io::ModelKind::linear) {
        return make_sparse_dct_field(s.grid.nx, s.grid.ny, static_cast<Index>(s.kv.integer("sparsity", 4)), seed).field;
    }
    return io::make_truth(s.kv, s.grid, seed, s.base);
}

ObservationSet single_phase_observations(const Vector &well_pressures)
{
    ObservationSet obs;
    obs.values = well_pressures;
    for (Index w = 0; w < well_pressures.size(); ++w) {
        obs.index.push_back({0.0, w, Quantity::pressure});
    }
    return obs;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    fs::path config;
    std::optional<fs::path> truth;
    fs::path out = "simulate_out";
    std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs &a)
{
    const Setup s = load_setup(a.config);
    const auto seed = a.seed.value_or(static_cast<std::uint64_t>(s.kv.integer("seed", 1)));
    const GridField truth = load_truth(s, a.truth, seed);
    io::write_grid(a.out / "truth.txt", truth, s.grid, field_units(s.kind));

    switch (s.kind) {
    case io::ModelKind::linear: {
        io::write_observations(a.out / "observations.txt", simulate_linear(s.linear.sensing(), truth.values));
        break;
    }
    case io::ModelKind::single_phase: {
        const auto r = solve_single_phase(truth, s.forward.geometry, s.forward.props, s.forward.wells,
                                          s.forward.numerics.gauge);
        io::write_observations(a.out / "observations.txt", single_phase_observations(r.well_pressures));
        io::write_grid(a.out / "pressure.txt", r.pressure, s.grid, "Pa");
        break;
    }
    case io::ModelKind::two_phase: {
        const auto r = simulate_two_phase(truth, s.forward);
        io::write_observations(a.out / "observations.txt", r.observations);
        for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
            char tag[32];
            std::snprintf(tag, sizeof tag, "%03zu", k + 1);
            io::write_grid(a.out / "snapshots" / (std::string("pressure_") + tag + ".txt"), r.snapshots[k].pressure,
                           s.grid, "Pa");
            io::write_grid(a.out / "snapshots" / (std::string("saturation_") + tag + ".txt"),
                           r.snapshots[k].water_saturation, s.grid, "fraction");
        }
        auto out = io::open_out(a.out / "simulation_summary.txt");
        out << "# volumes in m^3; snapshot files numbered by report index\n";
        out << "report_days =";
        for (double d : s.forward.schedule.report_days) {
            out << ' ' << io::format_real(d);
        }
        out << '\n';
        out << "water_injected = " << io::format_real(r.water_injected) << '\n';
        out << "water_produced = " << io::format_real(r.water_produced) << '\n';
        out << "storage_change = " << io::format_real(r.storage_change) << '\n';
        out << "mass_balance_error = " << io::format_real(r.mass_balance_error) << '\n';
        out << "pressure_solves = " << r.pressure_solves << '\n';
        out << "saturation_steps = " << r.saturation_steps << '\n';
        out << "cfl_refinements = " << r.cfl_refinements << '\n';
        break;
    }
    }
    std::cout << "simulate: wrote " << a.out.string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct InvertArgs {
    fs::path config;
    fs::path obs;
    fs::path out = "invert_out";
    std::optional<fs::path> truth;
    std::optional<double> p;
    std::optional<std::string> mode;
    std::optional<double> alpha;
    std::optional<int> max_iter;
    std::optional<std::uint64_t> seed;
};

SolverConfig solver_from(const Setup &s, const InvertArgs &a)
{
    SolverConfig cfg = s.kind == io::ModelKind::linear ? SolverConfig{} : ExperimentCase::default_solver();
    if (s.kind == io::ModelKind::linear) {
        cfg.param_space = ParamSpace::permeability;
        cfg.max_iterations = 100;
        cfg.misfit_tolerance = 0.0;
    }
    try {
        cfg = io::parse_solver_config(s.kv, cfg);
        if (a.mode) {
            cfg.mode = io::parse_mode(*a.mode, "--mode");
        }
    } catch (const io::FormatError &e) {
        throw UsageError(e.what());
    }
    if (a.p) {
        cfg.p = *a.p;
    }
    if (a.alpha) {
        cfg.alpha = *a.alpha;
    }
    if (a.max_iter) {
        cfg.max_iterations = *a.max_iter;
    }
    if (s.kind == io::ModelKind::linear && cfg.param_space != ParamSpace::permeability) {
        throw UsageError("linear model works in raw parameter space; set param_space = permeability");
    }
    if (cfg.mode == RegularizationMode::additive && !cfg.alpha) {
        throw UsageError("--mode additive requires --alpha");
    }
    try {
        cfg.validate();
    } catch (const InvalidInput &e) {
        throw UsageError(e.what());
    }
    return cfg;
}

void write_inversion(const fs::path &out, const Setup &s, const SolverConfig &cfg, const Vector &m,
                     const std::vector<IterationRecord> &records)
{
    const GridField field = s.kind == io::ModelKind::linear ? GridField(s.grid.nx, s.grid.ny, m)
                                                            : to_permeability(m, s.grid.nx, s.grid.ny, cfg.param_space);
    io::write_grid(out / "m_final.txt", field, s.grid, field_units(s.kind));
    io::write_iteration_log(out / "iteration_log.csv", records);
}

int cmd_invert(const InvertArgs &a)
{
    // Everything that can be a usage error is checked before any output exists.
    const Setup s = load_setup(a.config);
    const SolverConfig cfg = solver_from(s, a);
    const ObservationSet obs = io::read_observations(a.obs);
    const DctBasis basis(s.grid.nx, s.grid.ny);
    const Index nx = s.grid.nx;
    const Index ny = s.grid.ny;

    auto run = [&](const auto &model, const Vector &y, const Vector &m0) {
        try {
            return run_inversion(model, basis, y, m0, cfg);
        } catch (const InversionFailure &e) {
            const auto &partial = e.partial();
            if (!partial.iterates.empty()) {
                write_inversion(a.out, s, cfg, partial.iterates.back(), partial.records);
            }
            throw;
        }
    };

    InversionResult result;
    if (s.kind == io::ModelKind::linear) {
        const Matrix sensing = s.linear.sensing();
        if (obs.size() != sensing.rows()) {
            throw io::FormatError(a.obs.string() + ": observation count does not match rows");
        }
        result = run(LinearModel(sensing), obs.values, backprojection_start(sensing, obs.values));
    } else {
        const Vector scale = class_scales(obs);
        const Vector y = obs.values.cwiseQuotient(scale);
        const Vector m0 = to_parameters(GridField(nx, ny, s.kv.real("initial_md", 20.0)), cfg.param_space);
        if (s.kind == io::ModelKind::single_phase) {
            const SinglePhaseModel model(s.forward.geometry, s.forward.props, s.forward.wells, cfg.param_space,
                                         s.forward.numerics.gauge);
            if (obs.size() != static_cast<Index>(s.forward.wells.size())) {
                throw io::FormatError(a.obs.string() + ": expected one pressure per well");
            }
            struct Scaled {
                const SinglePhaseModel &inner;
                const Vector &scale;
                Vector evaluate(const Vector &m) const
                {
                    return inner.evaluate(m).cwiseQuotient(scale);
                }
                Matrix jacobian(const Vector &m) const
                {
                    return scale.cwiseInverse().asDiagonal() * inner.jacobian(m);
                }
            };
            result = run(Scaled{model, scale}, y, m0);
        } else {
            const TwoPhaseModel model(s.forward, cfg.param_space, scale);
            result = run(model, y, m0);
        }
    }

    write_inversion(a.out, s, cfg, result.m_final, result.records);
    {
        auto out = io::open_out(a.out / "run.txt");
        out << "# inversion settings and outcome\n";
        out << "model = " << s.kv.get("model", "two_phase") << '\n';
        out << "p = " << io::format_real(cfg.p) << '\n';
        out << "mode = " << to_string(cfg.mode) << '\n';
        if (cfg.alpha) {
            out << "alpha = " << io::format_real(*cfg.alpha) << '\n';
        }
        out << "param_space = " << to_string(cfg.param_space) << '\n';
        out << "max_iterations = " << cfg.max_iterations << '\n';
        out << "seed = " << a.seed.value_or(static_cast<std::uint64_t>(s.kv.integer("seed", 1))) << '\n';
        out << "stop = " << to_string(result.stop) << '\n';
        out << "sparsity_promoting = " << (cfg.promotes_sparsity() ? "yes" : "no") << '\n';
    }
    if (a.truth) {
        io::GridFile t = io::read_grid(*a.truth);
        if (t.field.nx != nx || t.field.ny != ny) {
            throw io::FormatError(a.truth->string() + ": grid does not match the configured grid");
        }
        const Vector truth = s.kind == io::ModelKind::linear ? t.field.values : to_parameters(t.field, cfg.param_space);
        auto out = io::open_out(a.out / "eval_report.txt");
        io::write_eval_report(out, evaluate(result.m_final, truth, basis, &result));
    }
    const auto &first = result.records.front();
    const auto &last = result.records.back();
    std::cout << "invert: " << last.iteration << " iterations, misfit " << first.misfit << " -> " << last.misfit
              << " (" << to_string(result.stop) << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_sweep(const fs::path &case_path, const fs::path &out)
{
    const auto kv = io::KeyValueConfig::load(case_path);
    ExperimentCase c;
    try {
        c = io::parse_experiment_case(kv, case_path.parent_path());
    } catch (const InvalidInput &e) {
        throw UsageError(e.what());
    }
    const std::vector<double> ps = {0.0, 0.5, 1.0, 1.5, 2.0};
    const auto results = p_sweep(c, ps);
    const GridGeometry &grid = results.front().config.geometry;
    io::write_grid(out / "truth.txt", results.front().truth_md, grid, "mD");
    io::write_observations(out / "observations.txt", results.front().observed);
    auto summary = io::open_out(out / "summary.csv");
    summary << "# one row per p; misfit in normalised data units, correlation and overlap in "
            << to_string(c.solver.param_space) << " space\n";
    summary << "p,final_misfit,correlation,overlap,seed\n";
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto &r = results[k];
        const fs::path dir = out / ("p_" + p_label(ps[k]));
        io::write_grid(dir / "m_final.txt", r.estimate_md, grid, "mD");
        io::write_iteration_log(dir / "iteration_log.csv", r.inversion.records);
        auto rep = io::open_out(dir / "eval_report.txt");
        io::write_eval_report(rep, r.report);
        summary << io::format_real(ps[k]) << ',' << io::format_real(r.inversion.records.back().misfit) << ','
                << io::format_real(r.report.correlation) << ',' << io::format_real(r.report.support_overlap) << ','
                << c.seed << '\n';
        std::cout << "sweep: p = " << ps[k] << " correlation " << r.report.correlation << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_truncate_demo(const fs::path &field_path, double fraction, const fs::path &out)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw UsageError("--fraction must lie in (0, 1]");
    }
    const io::GridFile g = io::read_grid(field_path);
    const TruncationReport r = truncation_report(g.field, fraction);
    io::write_grid(out / "truncated.txt", r.truncated, g.geometry, g.units);
    auto rep = io::open_out(out / "truncation_report.txt");
    rep << "# relative L2 field errors; random draws keep the same number of coefficients\n";
    rep << "fraction = " << io::format_real(r.fraction) << '\n';
    rep << "kept = " << r.kept << '\n';
    rep << "top_error = " << io::format_real(r.top_error) << '\n';
    rep << "random_median_error = " << io::format_real(r.random_median_error) << '\n';
    rep << "random_draws = " << r.random_draws << '\n';
    std::cout << "truncate-demo: kept " << r.kept << ", error " << r.top_error << " (random median "
              << r.random_median_error << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckReport {
    double relative_error = 0.0;
    double halving_ratio = 0.0;
    double error_h = 0.0;
    double error_h2 = 0.0;
};

double rel_frobenius(const Matrix &a, const Matrix &ref)
{
    return (a - ref).norm() / std::max(ref.norm(), std::numeric_limits<double>::min());
}

int cmd_gradcheck(const fs::path &config, std::uint64_t seed, const std::optional<fs::path> &out)
{
    const Setup s = load_setup(config);
    Rng rng(seed);
    GradcheckReport rep;
    const FdOptions fine{1e-6, 1e-8, FdScheme::central};
    const FdOptions coarse{1e-2, 1e-8, FdScheme::central};
    const FdOptions half{5e-3, 1e-8, FdScheme::central};
    std::string label;
    if (s.kind == io::ModelKind::linear) {
        label = "linear";
        const LinearModel model(s.linear.sensing());
        Vector m(s.grid.cells());
        for (Index i = 0; i < m.size(); ++i) {
            m[i] = 1.0 + rng.normal();
        }
        const Matrix exact = model.jacobian(m);
        auto g = [&](const Vector &x) { return model.evaluate(x); };
        rep.relative_error = rel_frobenius(jacobian_fd(g, m, fine).entries, exact);
        // A linear map has no truncation error, so there is no halving ratio to measure.
        rep.error_h = rel_frobenius(jacobian_fd(g, m, coarse).entries, exact);
        rep.error_h2 = rel_frobenius(jacobian_fd(g, m, half).entries, exact);
        rep.halving_ratio = std::nan("");
    } else if (s.kind == io::ModelKind::single_phase) {
        label = "single_phase";
        GridField perm(s.grid.nx, s.grid.ny);
        for (Index i = 0; i < perm.values.size(); ++i) {
            perm.values[i] = std::pow(10.0, 1.3 + 0.3 * rng.normal());
        }
        const SinglePhaseModel model(s.forward.geometry, s.forward.props, s.forward.wells, ParamSpace::permeability,
                                     s.forward.numerics.gauge);
        const Matrix adj = model.jacobian(perm.values);
        auto g = [&](const Vector &x) { return model.evaluate(x); };
        rep.relative_error = rel_frobenius(jacobian_fd(g, perm.values, fine).entries, adj);
        rep.error_h = rel_frobenius(jacobian_fd(g, perm.values, coarse).entries, adj);
        rep.error_h2 = rel_frobenius(jacobian_fd(g, perm.values, half).entries, adj);
        rep.halving_ratio = rep.error_h / rep.error_h2;
    } else {
        throw UsageError("gradcheck needs model = single_phase or model = linear");
    }
    std::ostringstream text;
    text << "# Jacobian check: exact/adjoint vs central finite differences, relative Frobenius norm\n";
    text << "model = " << label << '\n';
    text << "seed = " << seed << '\n';
    text << "relative_error = " << io::format_real(rep.relative_error) << '\n';
    text << "error_step_1e-2 = " << io::format_real(rep.error_h) << '\n';
    text << "error_step_5e-3 = " << io::format_real(rep.error_h2) << '\n';
    text << "halving_ratio = " << (std::isnan(rep.halving_ratio) ? "n/a" : io::format_real(rep.halving_ratio)) << '\n';
    if (out) {
        auto f = io::open_out(*out);
        f << text.str();
    }
    std::cout << text.str();
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Sparse history matching: DCT-domain lp regularised inversion of waterflood data"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto *simulate = app.add_subcommand("simulate", "Run the forward model on a truth field");
    simulate->add_option("--config", sim.config, "Configuration file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--truth", sim.truth, "Truth grid file (default: generated from the config)")
        ->check(CLI::ExistingFile);
    simulate->add_option("--out", sim.out, "Output directory");
    simulate->add_option("--seed", sim.seed, "Truth generator seed (overrides config)");

    InvertArgs inv;
    auto *invert = app.add_subcommand("invert", "Invert observations with IRLS");
    invert->add_option("--config", inv.config, "Configuration file")->required()->check(CLI::ExistingFile);
    invert->add_option("--obs", inv.obs, "Observation file")->required()->check(CLI::ExistingFile);
    invert->add_option("--out", inv.out, "Output directory");
    invert->add_option("--truth", inv.truth, "Truth grid for the evaluation report")->check(CLI::ExistingFile);
    invert->add_option("--p", inv.p, "Quasi-norm exponent in [0, 2]");
    invert->add_option("--mode", inv.mode, "additive | multiplicative");
    invert->add_option("--alpha", inv.alpha, "Regularisation weight (additive mode)");
    invert->add_option("--max-iter", inv.max_iter, "Iteration cap");
    invert->add_option("--seed", inv.seed, "Run seed, recorded in run.txt");

    fs::path sweep_case;
    fs::path sweep_out = "sweep_out";
    auto *sweep = app.add_subcommand("sweep", "Run p = 0, 0.5, 1, 1.5, 2 on one case");
    sweep->add_option("--case", sweep_case, "Case file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", sweep_out, "Output directory");

    fs::path trunc_field;
    double trunc_fraction = 0.05;
    fs::path trunc_out = "truncate_out";
    auto *truncate = app.add_subcommand("truncate-demo", "Keep the largest DCT coefficients of a grid");
    truncate->add_option("--field", trunc_field, "Grid file")->required()->check(CLI::ExistingFile);
    truncate->add_option("--fraction", trunc_fraction, "Fraction of coefficients kept, in (0, 1]");
    truncate->add_option("--out", trunc_out, "Output directory");

    fs::path grad_config;
    std::uint64_t grad_seed = 1;
    std::optional<fs::path> grad_out;
    auto *gradcheck = app.add_subcommand("gradcheck", "Compare analytic Jacobians with finite differences");
    gradcheck->add_option("--config", grad_config, "Configuration file")->required()->check(CLI::ExistingFile);
    gradcheck->add_option("--seed", grad_seed, "Seed for the random test point");
    gradcheck->add_option("--out", grad_out, "Also write the report to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*simulate) {
            return cmd_simulate(sim);
        }
        if (*invert) {
            return cmd_invert(inv);
        }
        if (*sweep) {
            return cmd_sweep(sweep_case, sweep_out);
        }
        if (*truncate) {
            return cmd_truncate_demo(trunc_field, trunc_fraction, trunc_out);
        }
        if (*gradcheck) {
            return cmd_gradcheck(grad_config, grad_seed, grad_out);
        }
    } catch (const UsageError &e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
