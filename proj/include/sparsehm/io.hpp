#ifndef SPARSEHM_IO_HPP
#define SPARSEHM_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sparsehm/experiments.hpp>

namespace sparsehm::io
{

/// Raised for unreadable or malformed files.
class FormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Shortest round-trip-safe text for a double (17 significant digits).
inline std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path &path)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    return out;
}

inline std::ifstream open_in(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open " + path.string());
    }
    return in;
}

inline std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Lines with '#' comments and surrounding blanks removed.
inline std::vector<std::string> content_lines(std::istream &in)
{
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (!line.empty()) {
            lines.push_back(line);
        }
    }
    return lines;
}

inline double parse_real(const std::string &token, const std::string &context)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) {
            throw std::invalid_argument(token);
        }
        return v;
    } catch (const std::exception &) {
        throw FormatError(context + ": '" + token + "' is not a number");
    }
}

inline long long parse_int(const std::string &token, const std::string &context)
{
    try {
        std::size_t used = 0;
        const long long v = std::stoll(token, &used);
        if (used != token.size()) {
            throw std::invalid_argument(token);
        }
        return v;
    } catch (const std::exception &) {
        throw FormatError(context + ": '" + token + "' is not an integer");
    }
}

// ---------------------------------------------------------------------------
// Grid files
//
//   # comment lines (optional)
//   nx ny dx dy dz units
//   ny rows of nx reals; row j = 0 first, column i = 0 first
// ---------------------------------------------------------------------------

struct GridFile {
    GridField field;
    GridGeometry geometry;
    std::string units;
};

inline void write_grid(std::ostream &out, const GridField &field, const GridGeometry &geometry,
                       const std::string &units)
{
    out << "# grid: header 'nx ny dx dy dz units', then ny rows (j = 0 first) of nx values (i = 0 first)\n";
    out << field.nx << ' ' << field.ny << ' ' << format_real(geometry.dx) << ' ' << format_real(geometry.dy) << ' '
        << format_real(geometry.dz) << ' ' << units << '\n';
    for (Index j = 0; j < field.ny; ++j) {
        for (Index i = 0; i < field.nx; ++i) {
            out << (i ? " " : "") << format_real(field(i, j));
        }
        out << '\n';
    }
}

inline void write_grid(const std::filesystem::path &path, const GridField &field, const GridGeometry &geometry,
                       const std::string &units)
{
    auto out = open_out(path);
    write_grid(out, field, geometry, units);
}

inline GridFile read_grid(std::istream &in, const std::string &name = "grid")
{
    const auto lines = content_lines(in);
    if (lines.empty()) {
        throw FormatError(name + ": empty grid file");
    }
    std::istringstream head(lines[0]);
    std::string t_nx, t_ny, t_dx, t_dy, t_dz, units;
    if (!(head >> t_nx >> t_ny >> t_dx >> t_dy >> t_dz >> units)) {
        throw FormatError(name + ": header must be 'nx ny dx dy dz units'");
    }
    GridFile g;
    g.geometry = {static_cast<Index>(parse_int(t_nx, name)), static_cast<Index>(parse_int(t_ny, name)),
                  parse_real(t_dx, name), parse_real(t_dy, name), parse_real(t_dz, name)};
    g.units = units;
    if (g.geometry.nx <= 0 || g.geometry.ny <= 0) {
        throw FormatError(name + ": non-positive grid dimensions");
    }
    if (static_cast<Index>(lines.size()) != g.geometry.ny + 1) {
        throw FormatError(name + ": expected " + std::to_string(g.geometry.ny) + " data rows");
    }
    g.field = GridField(g.geometry.nx, g.geometry.ny);
    for (Index j = 0; j < g.geometry.ny; ++j) {
        std::istringstream row(lines[static_cast<std::size_t>(j + 1)]);
        std::string tok;
        Index i = 0;
        while (row >> tok) {
            if (i >= g.geometry.nx) {
                throw FormatError(name + ": too many values in row " + std::to_string(j));
            }
            g.field(i++, j) = parse_real(tok, name);
        }
        if (i != g.geometry.nx) {
            throw FormatError(name + ": too few values in row " + std::to_string(j));
        }
    }
    return g;
}

inline GridFile read_grid(const std::filesystem::path &path)
{
    auto in = open_in(path);
    return read_grid(in, path.string());
}

// ---------------------------------------------------------------------------
// Observation files: one row per entry in observation order.
// ---------------------------------------------------------------------------

inline void write_observations(std::ostream &out, const ObservationSet &obs)
{
    out << "# observations: time-major, then well id, then quantity; pressure in Pa, water_saturation as fraction\n";
    out << "time_days well quantity value\n";
    for (Index r = 0; r < obs.size(); ++r) {
        const auto &k = obs.index[static_cast<std::size_t>(r)];
        out << format_real(k.time_days) << ' ' << k.well << ' ' << to_string(k.quantity) << ' '
            << format_real(obs.values[r]) << '\n';
    }
}

inline void write_observations(const std::filesystem::path &path, const ObservationSet &obs)
{
    auto out = open_out(path);
    write_observations(out, obs);
}

inline ObservationSet read_observations(std::istream &in, const std::string &name = "observations")
{
    auto lines = content_lines(in);
    if (lines.empty() || lines[0].rfind("time_days", 0) != 0) {
        throw FormatError(name + ": missing 'time_days well quantity value' header");
    }
    ObservationSet obs;
    obs.values.resize(static_cast<Index>(lines.size() - 1));
    for (std::size_t r = 1; r < lines.size(); ++r) {
        std::istringstream row(lines[r]);
        std::string t, w, q, v;
        if (!(row >> t >> w >> q >> v)) {
            throw FormatError(name + ": malformed row " + std::to_string(r));
        }
        ObservationKey key{parse_real(t, name), static_cast<Index>(parse_int(w, name)), Quantity::pressure};
        if (q == "water_saturation") {
            key.quantity = Quantity::water_saturation;
        } else if (q != "pressure") {
            throw FormatError(name + ": unknown quantity '" + q + "'");
        }
        obs.index.push_back(key);
        obs.values[static_cast<Index>(r - 1)] = parse_real(v, name);
    }
    return obs;
}

inline ObservationSet read_observations(const std::filesystem::path &path)
{
    auto in = open_in(path);
    return read_observations(in, path.string());
}

// ---------------------------------------------------------------------------
// Iteration log (CSV)
// ---------------------------------------------------------------------------

inline void write_iteration_log(std::ostream &out, const std::vector<IterationRecord> &records)
{
    out << "# misfit, SP, cost and epsilon in normalised data units; beta empty for additive runs\n";
    out << "iter,misfit,SP,cost,epsilon,beta,clamp_count\n";
    for (const auto &r : records) {
        out << r.iteration << ',' << format_real(r.misfit) << ',' << format_real(r.sparsity) << ','
            << format_real(r.cost) << ',' << format_real(r.epsilon) << ','
            << (r.beta ? format_real(*r.beta) : std::string()) << ',' << r.clamp_count << '\n';
    }
}

inline void write_iteration_log(const std::filesystem::path &path, const std::vector<IterationRecord> &records)
{
    auto out = open_out(path);
    write_iteration_log(out, records);
}

inline std::vector<IterationRecord> read_iteration_log(std::istream &in, const std::string &name = "log")
{
    const auto lines = content_lines(in);
    if (lines.empty() || lines[0] != "iter,misfit,SP,cost,epsilon,beta,clamp_count") {
        throw FormatError(name + ": missing iteration log header");
    }
    std::vector<IterationRecord> out;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        std::vector<std::string> cells;
        std::stringstream row(lines[r]);
        std::string cell;
        while (std::getline(row, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() == 6) {
            cells.emplace_back();
        }
        if (cells.size() != 7) {
            throw FormatError(name + ": malformed row " + std::to_string(r));
        }
        IterationRecord rec;
        rec.iteration = static_cast<int>(parse_int(cells[0], name));
        rec.misfit = parse_real(cells[1], name);
        rec.sparsity = parse_real(cells[2], name);
        rec.cost = parse_real(cells[3], name);
        rec.epsilon = parse_real(cells[4], name);
        if (!cells[5].empty()) {
            rec.beta = parse_real(cells[5], name);
        }
        rec.clamp_count = static_cast<int>(parse_int(cells[6], name));
        out.push_back(rec);
    }
    return out;
}

inline std::vector<IterationRecord> read_iteration_log(const std::filesystem::path &path)
{
    auto in = open_in(path);
    return read_iteration_log(in, path.string());
}

inline void write_eval_report(std::ostream &out, const EvalReport &r)
{
    out << "# evaluation in the inversion's parameter space; support overlap over the top 5% DCT coefficients\n";
    out << "relative_error = " << format_real(r.relative_error) << '\n';
    out << "correlation = " << format_real(r.correlation) << '\n';
    out << "support_overlap = " << format_real(r.support_overlap) << '\n';
    out << "misfit_ratio = " << format_real(r.misfit_ratio) << '\n';
    out << "iterations = " << r.iterations << '\n';
}

// ---------------------------------------------------------------------------
// Flat key = value configuration
// ---------------------------------------------------------------------------

/// Ordered multimap of keys to raw values; repeated keys (e.g. `well`) accumulate.
class KeyValueConfig
{
public:
    static KeyValueConfig parse(std::istream &in, const std::string &name = "config")
    {
        KeyValueConfig cfg;
        cfg.name_ = name;
        for (const auto &line : content_lines(in)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw FormatError(name + ": expected 'key = value' in line '" + line + "'");
            }
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) {
                throw FormatError(name + ": empty key in line '" + line + "'");
            }
            cfg.values_[key].push_back(trim(line.substr(eq + 1)));
        }
        return cfg;
    }
    static KeyValueConfig load(const std::filesystem::path &path)
    {
        auto in = open_in(path);
        return parse(in, path.string());
    }

    [[nodiscard]] bool has(const std::string &key) const
    {
        return values_.count(key) != 0;
    }
    [[nodiscard]] const std::string &name() const noexcept
    {
        return name_;
    }
    [[nodiscard]] std::string get(const std::string &key, const std::string &fallback) const
    {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second.back();
    }
    [[nodiscard]] double real(const std::string &key, double fallback) const
    {
        return has(key) ? parse_real(get(key, ""), name_ + ": " + key) : fallback;
    }
    [[nodiscard]] long long integer(const std::string &key, long long fallback) const
    {
        return has(key) ? parse_int(get(key, ""), name_ + ": " + key) : fallback;
    }
    [[nodiscard]] std::vector<std::string> all(const std::string &key) const
    {
        const auto it = values_.find(key);
        return it == values_.end() ? std::vector<std::string>{} : it->second;
    }

private:
    std::string name_;
    std::map<std::string, std::vector<std::string>> values_;
};

enum class ModelKind { two_phase, single_phase, linear };

inline ModelKind model_kind(const KeyValueConfig &kv)
{
    const std::string m = kv.get("model", "two_phase");
    if (m == "two_phase") {
        return ModelKind::two_phase;
    }
    if (m == "single_phase") {
        return ModelKind::single_phase;
    }
    if (m == "linear") {
        return ModelKind::linear;
    }
    throw FormatError(kv.name() + ": unknown model '" + m + "'");
}

inline ReservoirCase parse_reservoir(const std::string &s, const std::string &ctx)
{
    if (s == "A") {
        return ReservoirCase::A;
    }
    if (s == "B") {
        return ReservoirCase::B;
    }
    throw FormatError(ctx + ": reservoir must be A or B");
}

inline ReservoirScale parse_scale(const std::string &s, const std::string &ctx)
{
    if (s == "desk") {
        return ReservoirScale::desk;
    }
    if (s == "full") {
        return ReservoirScale::full;
    }
    throw FormatError(ctx + ": scale must be desk or full");
}

/// Forward configuration: an optional `reservoir`/`scale` preset, then
/// overrides. Any `well = injector|producer i j rate_m3_per_day` line
/// replaces the preset's wells.
inline TwoPhaseConfig parse_forward_config(const KeyValueConfig &kv)
{
    TwoPhaseConfig cfg;
    if (kv.has("reservoir")) {
        cfg = build_reservoir(parse_reservoir(kv.get("reservoir", ""), kv.name()),
                              parse_scale(kv.get("scale", "desk"), kv.name()));
    }
    auto &g = cfg.geometry;
    g.nx = static_cast<Index>(kv.integer("nx", g.nx));
    g.ny = static_cast<Index>(kv.integer("ny", g.ny));
    g.dx = kv.real("dx", g.dx);
    g.dy = kv.real("dy", g.dy);
    g.dz = kv.real("dz", g.dz);
    auto &p = cfg.props;
    p.porosity = kv.real("porosity", p.porosity);
    p.water_viscosity = kv.real("water_viscosity", p.water_viscosity);
    p.oil_viscosity = kv.real("oil_viscosity", p.oil_viscosity);
    p.initial_water_saturation = kv.real("initial_water_saturation", p.initial_water_saturation);
    p.connate_water = kv.real("connate_water", p.connate_water);
    p.residual_oil = kv.real("residual_oil", p.residual_oil);
    p.water_exponent = kv.real("water_exponent", p.water_exponent);
    p.oil_exponent = kv.real("oil_exponent", p.oil_exponent);
    if (kv.has("report_days")) {
        cfg.schedule.report_days.clear();
        std::istringstream days(kv.get("report_days", ""));
        std::string tok;
        while (days >> tok) {
            cfg.schedule.report_days.push_back(parse_real(tok, kv.name() + ": report_days"));
        }
        cfg.schedule.total_days = kv.real("total_days", cfg.schedule.report_days.empty()
                                                            ? cfg.schedule.total_days
                                                            : cfg.schedule.report_days.back());
    } else if (kv.has("report_intervals") || kv.has("total_days")) {
        cfg.schedule = Schedule::uniform(kv.real("total_days", cfg.schedule.total_days),
                                         static_cast<int>(kv.integer("report_intervals",
                                                                     static_cast<long long>(cfg.schedule.report_days.size()))));
    }
    const auto wells = kv.all("well");
    if (!wells.empty()) {
        cfg.wells.clear();
        for (const auto &w : wells) {
            std::istringstream row(w);
            std::string kind, i, j, rate;
            if (!(row >> kind >> i >> j >> rate) || (kind != "injector" && kind != "producer")) {
                throw FormatError(kv.name() + ": well must be 'injector|producer i j rate'");
            }
            cfg.wells.push_back({static_cast<Index>(parse_int(i, kv.name())), static_cast<Index>(parse_int(j, kv.name())),
                                 kind == "injector" ? WellKind::injector : WellKind::producer,
                                 parse_real(rate, kv.name())});
        }
    }
    cfg.numerics.pressure_steps_per_report =
        static_cast<int>(kv.integer("pressure_steps_per_report", cfg.numerics.pressure_steps_per_report));
    cfg.numerics.cfl = kv.real("cfl", cfg.numerics.cfl);
    cfg.numerics.gauge = static_cast<Index>(kv.integer("gauge", cfg.numerics.gauge));
    try {
        cfg.validate();
    } catch (const InvalidInput &e) {
        throw FormatError(kv.name() + ": " + e.what());
    }
    return cfg;
}

inline ParamSpace parse_param_space(const std::string &s, const std::string &ctx)
{
    if (s == "log-permeability" || s == "log") {
        return ParamSpace::log_permeability;
    }
    if (s == "permeability") {
        return ParamSpace::permeability;
    }
    throw FormatError(ctx + ": param_space must be permeability or log-permeability");
}

inline RegularizationMode parse_mode(const std::string &s, const std::string &ctx)
{
    if (s == "additive") {
        return RegularizationMode::additive;
    }
    if (s == "multiplicative") {
        return RegularizationMode::multiplicative;
    }
    throw FormatError(ctx + ": mode must be additive or multiplicative");
}

inline SolverConfig parse_solver_config(const KeyValueConfig &kv, SolverConfig cfg = {})
{
    cfg.p = kv.real("p", cfg.p);
    if (kv.has("mode")) {
        cfg.mode = parse_mode(kv.get("mode", ""), kv.name());
    }
    if (kv.has("alpha")) {
        cfg.alpha = kv.real("alpha", 0.0);
    }
    cfg.alpha_decay = kv.real("alpha_decay", cfg.alpha_decay);
    cfg.max_iterations = static_cast<int>(kv.integer("max_iterations", cfg.max_iterations));
    cfg.misfit_tolerance = kv.real("misfit_tolerance", cfg.misfit_tolerance);
    cfg.epsilon_floor = kv.real("epsilon_floor", cfg.epsilon_floor);
    cfg.damping = kv.real("damping", cfg.damping);
    if (kv.has("param_space")) {
        cfg.param_space = parse_param_space(kv.get("param_space", ""), kv.name());
    }
    cfg.noise_energy = kv.real("noise_energy", cfg.noise_energy);
    cfg.clamp_low = kv.real("clamp_low", cfg.clamp_low);
    cfg.clamp_high = kv.real("clamp_high", cfg.clamp_high);
    cfg.max_step_halvings = static_cast<int>(kv.integer("max_step_halvings", cfg.max_step_halvings));
    return cfg;
}

/// Linear-tier settings: `nx`, `ny`, `rows` and `sensing_seed`.
struct LinearSetup {
    Index nx = 8;
    Index ny = 8;
    Index rows = 24;
    std::uint64_t sensing_seed = 1;

    [[nodiscard]] Matrix sensing() const
    {
        return gaussian_sensing(rows, nx * ny, sensing_seed);
    }
};

inline LinearSetup parse_linear_setup(const KeyValueConfig &kv)
{
    LinearSetup s;
    s.nx = static_cast<Index>(kv.integer("nx", s.nx));
    s.ny = static_cast<Index>(kv.integer("ny", s.ny));
    s.rows = static_cast<Index>(kv.integer("rows", s.rows));
    s.sensing_seed = static_cast<std::uint64_t>(kv.integer("sensing_seed", static_cast<long long>(s.sensing_seed)));
    if (s.nx < 2 || s.ny < 2 || s.rows < 1) {
        throw FormatError(kv.name() + ": linear model needs nx, ny >= 2 and rows >= 1");
    }
    return s;
}

inline ChannelSpec parse_channel_spec(const KeyValueConfig &kv)
{
    ChannelSpec c;
    c.count = static_cast<int>(kv.integer("channel_count", c.count));
    c.width = kv.real("channel_width", c.width);
    c.amplitude = kv.real("channel_amplitude", c.amplitude);
    c.wavelength = kv.real("channel_wavelength", c.wavelength);
    return c;
}

/// Truth field named by `truth`: `channel` (default), `smooth`, or a grid file
/// path resolved relative to the config file.
inline GridField make_truth(const KeyValueConfig &kv, const GridGeometry &grid, std::uint64_t seed,
                            const std::filesystem::path &base = {})
{
    const std::string kind = kv.get("truth", "channel");
    if (kind == "channel") {
        return make_channel_field(grid, kv.real("background_md", 20.0), kv.real("channel_md", 200.0),
                                  parse_channel_spec(kv), seed);
    }
    if (kind == "smooth") {
        return make_smooth_log_field(grid, std::log10(kv.real("mean_md", 50.0)), kv.real("std_log10", 0.4),
                                     kv.real("cutoff", 3.0), seed);
    }
    std::filesystem::path path(kind);
    if (path.is_relative() && !base.empty()) {
        path = base / path;
    }
    GridFile g = read_grid(path);
    if (g.field.nx != grid.nx || g.field.ny != grid.ny) {
        throw FormatError(path.string() + ": truth grid does not match configured grid");
    }
    return g.field;
}

/// Experiment case: reservoir preset, truth, noise and solver settings.
inline ExperimentCase parse_experiment_case(const KeyValueConfig &kv, const std::filesystem::path &base = {})
{
    ExperimentCase c;
    c.reservoir = parse_reservoir(kv.get("reservoir", "A"), kv.name());
    c.scale = parse_scale(kv.get("scale", "desk"), kv.name());
    c.seed = static_cast<std::uint64_t>(kv.integer("seed", static_cast<long long>(c.seed)));
    const TwoPhaseConfig cfg = build_reservoir(c.reservoir, c.scale);
    c.truth_md = make_truth(kv, cfg.geometry, c.seed, base);
    const double level = kv.real("noise_level", 0.0);
    c.noise.kind = level > 0.0 ? NoiseKind::gaussian : NoiseKind::none;
    c.noise.relative_level = level;
    c.noise.seed = static_cast<std::uint64_t>(kv.integer("noise_seed", static_cast<long long>(c.noise.seed)));
    c.initial_md = kv.real("initial_md", c.initial_md);
    c.solver = parse_solver_config(kv, c.solver);
    return c;
}

} // namespace sparsehm::io

#endif
