#include "subdiff/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace subdiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = std::numbers::pi;

bool is_power_of_two(int value)
{
    return value > 0 && (value & (value - 1)) == 0;
}

std::string trim(const std::string& s)
{
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos)
        return {};
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> parts;
    size_t start = 0;
    while (start <= s.size()) {
        const size_t comma = s.find(',', start);
        if (comma == std::string::npos) {
            parts.push_back(trim(s.substr(start)));
            break;
        }
        parts.push_back(trim(s.substr(start, comma - start)));
        start = comma + 1;
    }
    return parts;
}

double parse_double(const std::string& s, const char* what)
{
    const std::string t = trim(s);
    char* end = nullptr;
    const double value = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size())
        throw ConfigError(std::string("malformed number for ") + what + ": '" + s + "'");
    return value;
}

int parse_int(const std::string& s, const char* what)
{
    const std::string t = trim(s);
    char* end = nullptr;
    const long value = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size())
        throw ConfigError(std::string("malformed integer for ") + what + ": '" + s + "'");
    return static_cast<int>(value);
}

bool parse_bool(const std::string& s, const char* what)
{
    const std::string t = trim(s);
    if (t == "1" || t == "true" || t == "yes")
        return true;
    if (t == "0" || t == "false" || t == "no")
        return false;
    throw ConfigError(std::string("malformed flag for ") + what + ": '" + s + "'");
}

std::vector<double> parse_double_list(const std::string& s, const char* what)
{
    std::vector<double> values;
    for (const auto& part : split_list(s))
        values.push_back(parse_double(part, what));
    return values;
}

std::vector<int> parse_int_list(const std::string& s, const char* what)
{
    std::vector<int> values;
    for (const auto& part : split_list(s))
        values.push_back(parse_int(part, what));
    return values;
}

// One sweep point; under SquaredTime coupling `sweep` carries N.
struct Tuple {
    double alpha = 0;
    double r = 0;
    int sweep = 0;
    int group = 0; // consecutive tuples with equal group form one rate column
};

std::string tuple_prefix(const ExperimentConfig& config, const Tuple& tuple)
{
    char buf[96];
    const char base = config.coupling == PdeCoupling::SquaredTime
                              && config.kind == ExperimentKind::Pde
                          ? 'N'
                          : 'M';
    std::snprintf(buf, sizeof buf, "alpha=%g r=%g %c=%d: ", tuple.alpha, tuple.r,
                  base, tuple.sweep);
    return buf;
}

IvpProblem power_problem(double alpha)
{
    IvpProblem problem;
    problem.alpha = alpha;
    problem.initial_value = 0.0;
    problem.exact = PowerSum({{1.0, alpha}});
    const PowerSum exact = *problem.exact;
    problem.forcing = [exact, alpha](double t) { return exact.caputo(alpha, t); };
    return problem;
}

struct PdeProblemDef {
    double edge = kPi;
    SpatialOperatorSpec spec;
    SpaceTimeFn forcing;
    SpaceFn initial;
    SpaceTimeFn exact; // empty when the solution is unknown
};

// Unknown-solution benchmark: -Laplace + (1 + x + y + t) with a polynomial
// forcing and a product-of-sines initial layer.
PdeProblemDef layer_problem()
{
    PdeProblemDef def;
    def.spec.diffusion_x = [](double, double, double) { return 1.0; };
    def.spec.diffusion_y = [](double, double, double) { return 1.0; };
    def.spec.reaction = [](double x, double y, double t) { return 1.0 + x + y + t; };
    def.forcing = [](double x, double y, double t) {
        return x * (kPi - x) * y * (kPi - y) * (1.0 + t * t * t * t) + t * t;
    };
    def.initial = [](double x, double y) { return std::sin(x) * std::sin(y); };
    return def;
}

// Manufactured solution u = t^alpha sin x sin y of the plain heat operator.
PdeProblemDef manufactured_problem(double alpha)
{
    PdeProblemDef def;
    def.spec.diffusion_x = [](double, double, double) { return 1.0; };
    def.spec.diffusion_y = [](double, double, double) { return 1.0; };
    const double g1 = std::tgamma(1.0 + alpha);
    def.forcing = [g1, alpha](double x, double y, double t) {
        return (g1 + 2.0 * std::pow(t, alpha)) * std::sin(x) * std::sin(y);
    };
    def.initial = [](double, double) { return 0.0; };
    def.exact = [alpha](double x, double y, double t) {
        return std::pow(t, alpha) * std::sin(x) * std::sin(y);
    };
    return def;
}

PdeProblemDef make_pde_problem(const std::string& name, double alpha)
{
    if (name == "layer")
        return layer_problem();
    if (name == "manufactured")
        return manufactured_problem(alpha);
    throw ConfigError("unknown pde problem '" + name + "'");
}

std::vector<double> nodal_errors(const TemporalMesh& mesh,
                                 const std::vector<double>& u, const PowerSum& exact)
{
    std::vector<double> errors(u.size());
    for (size_t m = 0; m < u.size(); ++m)
        errors[m] = std::abs(u[m] - exact.value(mesh.node(static_cast<int>(m))));
    return errors;
}

double ivp_tuple_value(const ExperimentConfig& config, const Tuple& tuple,
                       std::vector<double>* errors_out)
{
    const auto mesh = build_graded_mesh(config.horizon, tuple.sweep, tuple.r);
    const auto problem = power_problem(tuple.alpha);
    const auto u = solve_ivp(config.scheme, mesh, problem);
    const auto errors = nodal_errors(mesh, u, *problem.exact);
    if (errors_out)
        *errors_out = errors;
    if (config.norm == NormKind::FinalTime)
        return errors.back();
    return *std::max_element(errors.begin(), errors.end());
}

double pde_exact_error(const PdeSolution& solution, const PdeProblemDef& def,
                       NormKind norm)
{
    const auto& mesh = solution.mesh;
    const int M = mesh.intervals();
    const auto exact_at = [&def](double t) {
        return [&def, t](double x, double y) { return def.exact(x, y, t); };
    };
    if (norm == NormKind::FinalTime)
        return max_nodal_error(solution, M, exact_at(mesh.node(M)));
    if (norm == NormKind::MaxOverTime) {
        double worst = 0.0;
        for (int m = 0; m <= M; ++m)
            worst = std::max(worst, max_nodal_error(solution, m, exact_at(mesh.node(m))));
        return worst;
    }
    // discrete L2 norm over interior nodes at the final time
    const auto& grid = solution.grid;
    const double h = grid.spacing();
    const double t = mesh.node(M);
    const auto& u = solution.interior.back();
    double sum = 0.0;
    for (int k = 1; k < grid.intervals(); ++k)
        for (int i = 1; i < grid.intervals(); ++i) {
            const double d = u[static_cast<size_t>(grid.index(i, k))]
                             - def.exact(i * h, k * h, t);
            sum += d * d;
        }
    return std::sqrt(h * h * sum);
}

double pde_tuple_value(const ExperimentConfig& config, const Tuple& tuple)
{
    int M = tuple.sweep;
    int N = 0;
    switch (config.coupling) {
    case PdeCoupling::FixedSpace:
        N = config.Ns.front();
        break;
    case PdeCoupling::Diagonal:
        N = M;
        break;
    case PdeCoupling::SquaredTime:
        N = tuple.sweep;
        M = N * N;
        break;
    }

    const auto def = make_pde_problem(config.problem, tuple.alpha);
    const auto solve = [&](int m, int n) {
        return solve_parabolic(config.scheme, tuple.alpha,
                               build_graded_mesh(config.horizon, m, tuple.r),
                               SpatialGrid2D(def.edge, n), def.spec, def.forcing,
                               def.initial);
    };

    if (!config.two_mesh)
        return pde_exact_error(solve(M, N), def, config.norm);

    const int fine_n = config.coupling == PdeCoupling::FixedSpace ? N : 2 * N;
    const auto coarse = solve(M, N);
    const auto fine = solve(2 * M, fine_n);
    if (config.norm == NormKind::FinalTime)
        return two_mesh_error(coarse, fine);
    std::vector<int> levels(static_cast<size_t>(M) + 1);
    std::iota(levels.begin(), levels.end(), 0);
    return two_mesh_error(coarse, fine, levels);
}

double run_tuple(const ExperimentConfig& config, const Tuple& tuple,
                 std::vector<double>* ivp_errors)
{
    try {
        switch (config.kind) {
        case ExperimentKind::Ivp:
            return ivp_tuple_value(config, tuple, ivp_errors);
        case ExperimentKind::Pde:
            return pde_tuple_value(config, tuple);
        case ExperimentKind::Stability: {
            const auto mesh = build_graded_mesh(config.horizon, tuple.sweep, tuple.r);
            return empirical_stability_check(config.scheme, mesh, tuple.alpha,
                                             *config.gamma);
        }
        case ExperimentKind::Barrier: {
            const auto mesh = build_graded_mesh(config.horizon, tuple.sweep, tuple.r);
            return verify_barrier_bound(mesh, tuple.alpha, *config.anchor,
                                        config.scheme);
        }
        case ExperimentKind::Truncation: {
            const auto mesh = build_graded_mesh(config.horizon, tuple.sweep, tuple.r);
            return truncation_report(config.scheme, mesh, power_problem(tuple.alpha))
                .bound_ratio;
        }
        }
        throw std::logic_error("unreachable experiment kind");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(tuple_prefix(config, tuple) + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(tuple_prefix(config, tuple) + e.what());
    }
}

int resolved_spatial_intervals(const ExperimentConfig& config, const Tuple& tuple)
{
    if (config.kind != ExperimentKind::Pde)
        return 0;
    switch (config.coupling) {
    case PdeCoupling::FixedSpace:
        return config.Ns.front();
    case PdeCoupling::Diagonal:
        return tuple.sweep;
    case PdeCoupling::SquaredTime:
        return tuple.sweep;
    }
    return 0;
}

// keeps rates that round to zero from printing as "-0.000"
double displayed_rate(double rate)
{
    return std::abs(rate) < 5e-4 ? 0.0 : rate;
}

void format_csv_row(const ErrorRow& row, std::ostream& os)
{
    char buf[160];
    if (std::isnan(row.rate))
        std::snprintf(buf, sizeof buf, "%.9e,%.9e,%d,%.9e,\n", row.alpha, row.r,
                      row.M, row.value);
    else
        std::snprintf(buf, sizeof buf, "%.9e,%.9e,%d,%.9e,%.3f\n", row.alpha, row.r,
                      row.M, row.value, displayed_rate(row.rate));
    os << buf;
}

void emit_markdown(const ErrorReport& report, std::ostream& os)
{
    char buf[96];
    os << "rates computed in " << report.rate_base << "^-q\n";
    size_t i = 0;
    while (i < report.rows.size()) {
        // one block per grading exponent, in first-appearance order
        const double r = report.rows[i].r;
        std::snprintf(buf, sizeof buf, "\n## r = %.6g\n\n", r);
        os << buf;

        // column set comes from the block's first alpha group
        size_t probe = i;
        std::vector<int> columns;
        const double first_alpha = report.rows[i].alpha;
        while (probe < report.rows.size() && report.rows[probe].r == r
               && report.rows[probe].alpha == first_alpha)
            columns.push_back(report.rows[probe++].M);

        os << "| " << report.rate_base << " |";
        for (int m : columns) {
            std::snprintf(buf, sizeof buf, " %d |", m);
            os << buf;
        }
        os << "\n|---|";
        for (size_t c = 0; c < columns.size(); ++c)
            os << "---|";
        os << "\n";

        while (i < report.rows.size() && report.rows[i].r == r) {
            const double alpha = report.rows[i].alpha;
            std::snprintf(buf, sizeof buf, "| alpha=%.6g |", alpha);
            os << buf;
            const size_t row_start = i;
            while (i < report.rows.size() && report.rows[i].r == r
                   && report.rows[i].alpha == alpha) {
                std::snprintf(buf, sizeof buf, " %.3e |", report.rows[i].value);
                os << buf;
                ++i;
            }
            os << "\n| rate q |";
            for (size_t j = row_start; j < i; ++j) {
                if (std::isnan(report.rows[j].rate))
                    os << "  |";
                else {
                    std::snprintf(buf, sizeof buf, " %.3f |",
                                  displayed_rate(report.rows[j].rate));
                    os << buf;
                }
            }
            os << "\n";
        }
    }
}

ExperimentConfig golden_config(const GoldenTable& table, const GoldenCell& cell)
{
    ExperimentConfig config;
    config.kind = table.kind;
    config.scheme = table.scheme;
    config.norm = table.norm;
    config.coupling = table.coupling;
    config.problem = table.problem;
    config.alphas = {cell.alpha};
    config.rs = {cell.r};
    if (table.kind == ExperimentKind::Pde && table.coupling == PdeCoupling::SquaredTime)
        config.Ns = {cell.M};
    else
        config.Ms = {cell.M};
    if (table.fixed_n > 0)
        config.Ns = {table.fixed_n};
    return config;
}

} // namespace

void validate_config(const ExperimentConfig& config)
{
    if (config.alphas.empty())
        throw ConfigError("alpha list is empty");
    for (double a : config.alphas)
        if (!(a > 0.0 && a < 1.0))
            throw ConfigError("alpha values must lie in (0,1)");
    if (config.rs.empty())
        throw ConfigError("r list is empty");
    for (double r : config.rs)
        if (!(r >= 1.0))
            throw ConfigError("grading exponents must satisfy r >= 1");
    if (!(config.horizon > 0.0))
        throw ConfigError("horizon must be positive");
    if (config.threads < 1)
        throw ConfigError("threads must be positive");

    const bool squared = config.kind == ExperimentKind::Pde
                         && config.coupling == PdeCoupling::SquaredTime;
    const auto& sweep = squared ? config.Ns : config.Ms;
    const char* sweep_name = squared ? "N" : "M";
    if (sweep.empty())
        throw ConfigError(std::string(sweep_name) + " list is empty");
    for (int v : sweep)
        if (v < 1)
            throw ConfigError(std::string(sweep_name) + " values must be positive");
    if (sweep.size() > 1)
        for (int v : sweep)
            if (!is_power_of_two(v))
                throw ConfigError(std::string(sweep_name)
                                  + " values must be powers of two when rates are requested");

    switch (config.kind) {
    case ExperimentKind::Ivp:
    case ExperimentKind::Truncation:
        if (config.problem != "power")
            throw ConfigError("initial-value experiments support problem=power only");
        if (config.norm == NormKind::SpatialL2)
            throw ConfigError("spatial-l2 norm needs a pde experiment");
        break;
    case ExperimentKind::Pde:
        if (config.problem != "layer" && config.problem != "manufactured")
            throw ConfigError("pde problem must be layer or manufactured");
        if (config.coupling == PdeCoupling::FixedSpace) {
            if (config.Ns.size() != 1)
                throw ConfigError("fixed coupling needs exactly one N");
            if (config.Ns.front() < 2)
                throw ConfigError("N must be at least 2");
        } else if (config.coupling == PdeCoupling::Diagonal) {
            if (!config.Ns.empty())
                throw ConfigError("diagonal coupling derives N from M; drop the N list");
        } else {
            for (int n : config.Ns)
                if (n < 2)
                    throw ConfigError("N must be at least 2");
            if (!config.Ms.empty())
                throw ConfigError("squared coupling derives M from N; drop the M list");
        }
        if (config.two_mesh && config.norm == NormKind::SpatialL2)
            throw ConfigError("spatial-l2 norm needs an exact solution; disable two_mesh");
        if (!config.two_mesh && config.problem == "layer")
            throw ConfigError("layer problem has no exact solution; keep two_mesh on");
        break;
    case ExperimentKind::Stability:
        if (!config.gamma)
            throw ConfigError("stability experiments need gamma");
        if (config.norm == NormKind::SpatialL2)
            throw ConfigError("spatial-l2 norm needs a pde experiment");
        break;
    case ExperimentKind::Barrier:
        if (!config.anchor)
            throw ConfigError("barrier experiments need an anchor index p");
        if (config.norm == NormKind::SpatialL2)
            throw ConfigError("spatial-l2 norm needs a pde experiment");
        break;
    }

    if (config.envelope_overlay && config.kind != ExperimentKind::Ivp)
        throw ConfigError("pointwise envelope output is available for ivp experiments only");
}

ErrorReport run_experiment(const ExperimentConfig& config)
{
    validate_config(config);

    const bool squared = config.kind == ExperimentKind::Pde
                         && config.coupling == PdeCoupling::SquaredTime;
    const auto& sweep = squared ? config.Ns : config.Ms;

    std::vector<Tuple> tuples;
    int group = 0;
    for (double alpha : config.alphas) {
        for (double r : config.rs) {
            for (int v : sweep)
                tuples.push_back({alpha, r, v, group});
            ++group;
        }
    }

    const bool overlay = config.envelope_overlay;
    std::vector<double> values(tuples.size());
    std::vector<std::vector<double>> error_tracks(overlay ? tuples.size() : 0);

    const auto eval = [&](size_t idx) {
        std::vector<double> errors;
        values[idx] = run_tuple(config, tuples[idx], overlay ? &errors : nullptr);
        if (overlay)
            error_tracks[idx] = std::move(errors);
    };

    const size_t workers = std::min<size_t>(static_cast<size_t>(config.threads),
                                            tuples.size());
    if (workers <= 1) {
        for (size_t idx = 0; idx < tuples.size(); ++idx)
            eval(idx);
    } else {
        std::atomic<size_t> next{0};
        std::mutex error_mutex;
        std::exception_ptr first_error;
        const auto drained = [&] {
            std::lock_guard<std::mutex> lock(error_mutex);
            return static_cast<bool>(first_error);
        };
        const auto work = [&] {
            for (;;) {
                const size_t idx = next.fetch_add(1);
                if (idx >= tuples.size() || drained())
                    return;
                try {
                    eval(idx);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error)
                        first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w)
            pool.emplace_back(work);
        for (auto& t : pool)
            t.join();
        if (first_error)
            std::rethrow_exception(first_error);
    }

    ErrorReport report;
    report.rate_base = squared ? 'N' : 'M';
    report.rows.reserve(tuples.size());
    for (size_t idx = 0; idx < tuples.size(); ++idx) {
        ErrorRow row;
        row.alpha = tuples[idx].alpha;
        row.r = tuples[idx].r;
        row.M = tuples[idx].sweep;
        row.N = resolved_spatial_intervals(config, tuples[idx]);
        row.value = values[idx];
        row.rate = kNaN;
        if (idx > 0 && tuples[idx].group == tuples[idx - 1].group) {
            const double prev = values[idx - 1];
            if (prev > 0.0 && row.value > 0.0)
                row.rate = std::log(prev / row.value)
                           / std::log(static_cast<double>(tuples[idx].sweep)
                                      / tuples[idx - 1].sweep);
        }
        report.rows.push_back(row);
    }

    if (overlay) {
        const EnvelopeKind kind = config.scheme == SchemeKind::L1
                                      ? EnvelopeKind::L1Error
                                      : EnvelopeKind::AlikhanovError;
        for (size_t idx = 0; idx < tuples.size(); ++idx) {
            const auto mesh = build_graded_mesh(config.horizon, tuples[idx].sweep,
                                                tuples[idx].r);
            const auto envelope
                = error_envelope(mesh, tuples[idx].alpha, tuples[idx].r, kind);
            PointwiseBlock block;
            block.alpha = tuples[idx].alpha;
            block.r = tuples[idx].r;
            block.M = tuples[idx].sweep;
            block.rows = pointwise_rows(mesh, error_tracks[idx], envelope);
            report.pointwise.push_back(std::move(block));
        }
    }
    return report;
}

std::vector<double> compute_rates(const std::vector<std::pair<int, double>>& errors)
{
    for (size_t i = 0; i < errors.size(); ++i) {
        if (!(errors[i].second > 0.0))
            throw std::invalid_argument("rates need strictly positive errors");
        if (i > 0 && errors[i].first <= errors[i - 1].first)
            throw std::invalid_argument("rates need strictly increasing M");
    }
    std::vector<double> rates;
    for (size_t i = 0; i + 1 < errors.size(); ++i)
        rates.push_back(std::log(errors[i].second / errors[i + 1].second)
                        / std::log(static_cast<double>(errors[i + 1].first)
                                   / errors[i].first));
    return rates;
}

void emit_table(const ErrorReport& report, TableFormat format, std::ostream& os)
{
    if (format == TableFormat::Markdown) {
        emit_markdown(report, os);
        return;
    }
    os << "# rate base " << report.rate_base << "\n";
    os << "alpha,r,M,error,rate\n";
    for (const auto& row : report.rows)
        format_csv_row(row, os);
}

ErrorReport parse_table_csv(std::istream& is)
{
    ErrorReport report;
    std::string line;
    bool saw_header = false;
    while (std::getline(is, line)) {
        const std::string t = trim(line);
        if (t.empty())
            continue;
        if (t.rfind("# rate base ", 0) == 0) {
            const std::string base = trim(t.substr(12));
            if (base != "M" && base != "N")
                throw std::invalid_argument("unknown rate base '" + base + "'");
            report.rate_base = base[0];
            continue;
        }
        if (!saw_header) {
            if (t != "alpha,r,M,error,rate")
                throw std::invalid_argument("unexpected table header '" + t + "'");
            saw_header = true;
            continue;
        }
        const auto fields = split_list(t);
        if (fields.size() != 5)
            throw std::invalid_argument("table row needs 5 fields: '" + t + "'");
        ErrorRow row;
        row.alpha = parse_double(fields[0], "alpha");
        row.r = parse_double(fields[1], "r");
        row.M = parse_int(fields[2], "M");
        row.value = parse_double(fields[3], "error");
        row.rate = fields[4].empty() ? kNaN : parse_double(fields[4], "rate");
        report.rows.push_back(row);
    }
    if (!saw_header)
        throw std::invalid_argument("missing table header");
    return report;
}

std::vector<PointwiseRow> pointwise_rows(const TemporalMesh& mesh,
                                         const std::vector<double>& errors,
                                         const EnvelopeProfile& envelope)
{
    const size_t count = static_cast<size_t>(mesh.intervals()) + 1;
    if (errors.size() != count || envelope.values.size() != count)
        throw std::invalid_argument("per-level errors and envelope must match the mesh");
    std::vector<PointwiseRow> rows;
    rows.reserve(count - 1);
    for (int m = 1; m <= mesh.intervals(); ++m) {
        PointwiseRow row;
        row.m = m;
        row.t = mesh.node(m);
        row.error = errors[static_cast<size_t>(m)];
        row.envelope = envelope.values[static_cast<size_t>(m)];
        row.ratio = row.envelope > 0.0 ? row.error / row.envelope : 0.0;
        rows.push_back(row);
    }
    return rows;
}

void write_pointwise_rows(const std::vector<PointwiseRow>& rows, std::ostream& os)
{
    os << "m,t,error,envelope,ratio\n";
    char buf[160];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%d,%.9e,%.9e,%.9e,%.9e\n", row.m, row.t,
                      row.error, row.envelope, row.ratio);
        os << buf;
    }
}

void emit_pointwise_plot_data(const TemporalMesh& mesh,
                              const std::vector<double>& errors,
                              const EnvelopeProfile& envelope, std::ostream& os)
{
    write_pointwise_rows(pointwise_rows(mesh, errors, envelope), os);
}

void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value)
{
    const std::string k = trim(key);
    if (k == "experiment") {
        const std::string v = trim(value);
        if (v == "ivp")
            config.kind = ExperimentKind::Ivp;
        else if (v == "pde")
            config.kind = ExperimentKind::Pde;
        else if (v == "stability")
            config.kind = ExperimentKind::Stability;
        else if (v == "barrier")
            config.kind = ExperimentKind::Barrier;
        else if (v == "truncation")
            config.kind = ExperimentKind::Truncation;
        else
            throw ConfigError("unknown experiment '" + v + "'");
    } else if (k == "scheme") {
        const std::string v = trim(value);
        if (v == "l1")
            config.scheme = SchemeKind::L1;
        else if (v == "alikhanov")
            config.scheme = SchemeKind::Alikhanov;
        else
            throw ConfigError("unknown scheme '" + v + "'");
    } else if (k == "alpha") {
        config.alphas = parse_double_list(value, "alpha");
    } else if (k == "r") {
        config.rs = parse_double_list(value, "r");
    } else if (k == "M") {
        config.Ms = parse_int_list(value, "M");
    } else if (k == "N") {
        config.Ns = parse_int_list(value, "N");
    } else if (k == "gamma") {
        config.gamma = parse_double(value, "gamma");
    } else if (k == "p") {
        config.anchor = parse_int(value, "p");
    } else if (k == "norm") {
        const std::string v = trim(value);
        if (v == "final-time" || v == "final")
            config.norm = NormKind::FinalTime;
        else if (v == "max-over-time" || v == "max")
            config.norm = NormKind::MaxOverTime;
        else if (v == "spatial-l2" || v == "l2")
            config.norm = NormKind::SpatialL2;
        else
            throw ConfigError("unknown norm '" + v + "'");
    } else if (k == "horizon") {
        config.horizon = parse_double(value, "horizon");
    } else if (k == "problem") {
        config.problem = trim(value);
    } else if (k == "coupling") {
        const std::string v = trim(value);
        if (v == "fixed")
            config.coupling = PdeCoupling::FixedSpace;
        else if (v == "diagonal")
            config.coupling = PdeCoupling::Diagonal;
        else if (v == "squared")
            config.coupling = PdeCoupling::SquaredTime;
        else
            throw ConfigError("unknown coupling '" + v + "'");
    } else if (k == "two_mesh") {
        config.two_mesh = parse_bool(value, "two_mesh");
    } else if (k == "pointwise") {
        config.envelope_overlay = parse_bool(value, "pointwise");
    } else if (k == "out") {
        config.out = trim(value);
    } else if (k == "format") {
        const std::string v = trim(value);
        if (v == "csv")
            config.format = TableFormat::Csv;
        else if (v == "markdown" || v == "md")
            config.format = TableFormat::Markdown;
        else
            throw ConfigError("unknown format '" + v + "'");
    } else if (k == "threads") {
        config.threads = parse_int(value, "threads");
    } else {
        throw ConfigError("unknown config key '" + k + "'");
    }
}

void load_config_stream(std::istream& is, ExperimentConfig& config)
{
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        const std::string t = trim(line);
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "config line %d has no '='", lineno);
            throw ConfigError(buf);
        }
        apply_config_entry(config, t.substr(0, eq), t.substr(eq + 1));
    }
}

void load_config_file(const std::string& path, ExperimentConfig& config)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    load_config_stream(in, config);
}

const std::vector<GoldenTable>& golden_tables()
{
    static const std::vector<GoldenTable> tables = [] {
        std::vector<GoldenTable> t;
        const double a3 = 0.3, a5 = 0.5, a7 = 0.7;

        // errors at t=1 for the linear-history scheme, u = t^alpha
        GoldenTable l1_final{"l1-ivp-final",
                             ExperimentKind::Ivp,
                             SchemeKind::L1,
                             NormKind::FinalTime,
                             PdeCoupling::FixedSpace,
                             "power",
                             0,
                             3,
                             5e-3,
                             'M',
                             {}};
        const auto add = [](GoldenTable& table, double alpha, double r,
                            std::initializer_list<std::pair<int, double>> cells,
                            std::initializer_list<double> rates) {
            size_t i = 0;
            auto rate = rates.begin();
            for (const auto& [m, value] : cells) {
                table.cells.push_back(
                    {alpha, r, m, value,
                     i == 0 ? kNaN : (rate == rates.end() ? kNaN : *rate++)});
                ++i;
            }
        };
        add(l1_final, a3, 1.0, {{128, 1.182e-3}, {512, 2.939e-4}, {2048, 7.333e-5}},
            {1.004, 1.001});
        add(l1_final, a5, 1.0, {{128, 1.953e-3}, {512, 4.883e-4}, {2048, 1.221e-4}},
            {1.000, 1.000});
        add(l1_final, a7, 1.0, {{128, 2.489e-3}, {512, 6.433e-4}, {2048, 1.642e-4}},
            {0.976, 0.985});
        add(l1_final, a3, 2.0 - a3,
            {{128, 1.201e-4}, {512, 1.310e-5}, {2048, 1.401e-6}}, {1.598, 1.612});
        add(l1_final, a5, 2.0 - a5,
            {{128, 5.039e-4}, {512, 7.407e-5}, {2048, 1.063e-5}}, {1.383, 1.400});
        add(l1_final, a7, 2.0 - a7,
            {{128, 1.267e-3}, {512, 2.495e-4}, {2048, 4.782e-5}}, {1.172, 1.192});
        add(l1_final, a3, (2.0 - a3) / 0.95,
            {{128, 1.035e-4}, {512, 1.074e-5}, {2048, 1.094e-6}}, {1.634, 1.648});
        add(l1_final, a5, (2.0 - a5) / 0.95,
            {{128, 4.469e-4}, {512, 6.276e-5}, {2048, 8.609e-6}}, {1.416, 1.433});
        add(l1_final, a7, (2.0 - a7) / 0.95,
            {{128, 1.143e-3}, {512, 2.164e-4}, {2048, 3.984e-5}}, {1.201, 1.221});
        t.push_back(std::move(l1_final));

        GoldenTable ali_final{"alikhanov-ivp-final",
                              ExperimentKind::Ivp,
                              SchemeKind::Alikhanov,
                              NormKind::FinalTime,
                              PdeCoupling::FixedSpace,
                              "power",
                              0,
                              3,
                              5e-3,
                              'M',
                              {}};
        add(ali_final, a3, 1.0, {{64, 1.325e-3}, {256, 3.306e-4}, {1024, 8.260e-5}},
            {1.002, 1.000});
        add(ali_final, a5, 1.0, {{64, 1.530e-3}, {256, 3.819e-4}, {1024, 9.543e-5}},
            {1.001, 1.000});
        add(ali_final, a7, 1.0, {{64, 1.236e-3}, {256, 3.087e-4}, {1024, 7.715e-5}},
            {1.001, 1.000});
        add(ali_final, a3, 2.0, {{64, 3.891e-5}, {256, 2.446e-6}, {1024, 1.530e-7}},
            {1.996, 1.999});
        add(ali_final, a5, 2.0, {{64, 6.079e-5}, {256, 3.940e-6}, {1024, 2.502e-7}},
            {1.974, 1.988});
        add(ali_final, a7, 2.0, {{64, 6.450e-5}, {256, 4.436e-6}, {1024, 2.936e-7}},
            {1.931, 1.959});
        add(ali_final, a3, (3.0 - a3) / 0.95,
            {{64, 1.085e-5}, {256, 3.241e-7}, {1024, 8.953e-9}}, {2.532, 2.589});
        add(ali_final, a5, (3.0 - a5) / 0.95,
            {{64, 2.710e-5}, {256, 1.057e-6}, {1024, 3.839e-8}}, {2.340, 2.392});
        add(ali_final, a7, (3.0 - a7) / 0.95,
            {{64, 3.962e-5}, {256, 2.017e-6}, {1024, 9.638e-8}}, {2.148, 2.194});
        t.push_back(std::move(ali_final));

        GoldenTable ali_max{"alikhanov-ivp-max",
                            ExperimentKind::Ivp,
                            SchemeKind::Alikhanov,
                            NormKind::MaxOverTime,
                            PdeCoupling::FixedSpace,
                            "power",
                            0,
                            3,
                            5e-3,
                            'M',
                            {}};
        add(ali_max, a3, 1.0, {{64, 2.477e-2}, {256, 1.634e-2}}, {0.300});
        add(ali_max, a5, 1.0, {{64, 1.164e-2}, {256, 5.819e-3}}, {0.500});
        add(ali_max, a7, 1.0, {{64, 3.919e-3}, {256, 1.485e-3}}, {0.700});
        add(ali_max, a3, 2.0 / a3, {{64, 5.865e-5}, {256, 3.665e-6}}, {2.000});
        add(ali_max, a5, 2.0 / a5, {{64, 5.250e-5}, {256, 3.281e-6}}, {2.000});
        add(ali_max, a7, 2.0 / a7, {{64, 4.232e-5}, {256, 2.645e-6}}, {2.000});
        add(ali_max, a3, (3.0 - a3) / a3, {{64, 5.505e-5}, {256, 1.659e-6}}, {2.526});
        add(ali_max, a5, (3.0 - a5) / a5, {{64, 3.976e-5}, {256, 1.379e-6}}, {2.425});
        add(ali_max, a7, (3.0 - a7) / a7, {{64, 3.425e-5}, {256, 1.498e-6}}, {2.257});
        t.push_back(std::move(ali_max));

        GoldenTable fd_temporal{"fd-parabolic-temporal",
                                ExperimentKind::Pde,
                                SchemeKind::L1,
                                NormKind::FinalTime,
                                PdeCoupling::Diagonal,
                                "layer",
                                0,
                                2,
                                3e-2,
                                'M',
                                {}};
        add(fd_temporal, a3, (2.0 - a3) / 0.9, {{32, 6.99e-4}, {64, 2.30e-4}}, {1.60});
        add(fd_temporal, a5, (2.0 - a5) / 0.9, {{32, 1.54e-3}, {64, 5.75e-4}}, {1.43});
        add(fd_temporal, a7, (2.0 - a7) / 0.9, {{32, 3.05e-3}, {64, 1.28e-3}}, {1.25});
        t.push_back(std::move(fd_temporal));

        GoldenTable fd_spatial{"fd-parabolic-spatial",
                               ExperimentKind::Pde,
                               SchemeKind::L1,
                               NormKind::FinalTime,
                               PdeCoupling::SquaredTime,
                               "layer",
                               0,
                               2,
                               4e-2,
                               'N',
                               {}};
        add(fd_spatial, a3, (2.0 - a3) / 0.9,
            {{8, 2.81e-3}, {16, 7.36e-4}, {32, 1.87e-4}}, {1.93, 1.97});
        add(fd_spatial, a5, (2.0 - a5) / 0.9,
            {{8, 2.87e-3}, {16, 7.34e-4}, {32, 1.84e-4}}, {1.97, 1.99});
        add(fd_spatial, a7, (2.0 - a7) / 0.9,
            {{8, 3.15e-3}, {16, 7.84e-4}, {32, 1.91e-4}}, {2.01, 2.04});
        t.push_back(std::move(fd_spatial));
        return t;
    }();
    return tables;
}

bool matches_to_digits(double value, double reference, int digits)
{
    if (digits < 1 || !(std::abs(reference) > 0.0) || !std::isfinite(reference))
        throw std::invalid_argument("digit comparison needs a nonzero finite reference");
    const double mag = std::floor(std::log10(std::abs(reference)));
    const double tol = 0.6 * std::pow(10.0, mag - (digits - 1));
    return std::abs(value - reference) <= tol;
}

double evaluate_golden_cell(const GoldenTable& table, const GoldenCell& cell)
{
    const auto config = golden_config(table, cell);
    return run_experiment(config).rows.front().value;
}

int check_golden_table(const GoldenTable& table, std::ostream& log)
{
    int misses = 0;
    char buf[192];
    log << table.name << "\n";
    size_t i = 0;
    while (i < table.cells.size()) {
        // one (alpha, r) group at a time so rates can be recomputed
        const size_t start = i;
        while (i < table.cells.size() && table.cells[i].alpha == table.cells[start].alpha
               && table.cells[i].r == table.cells[start].r)
            ++i;
        double previous = 0.0;
        for (size_t j = start; j < i; ++j) {
            const auto& cell = table.cells[j];
            const double got = evaluate_golden_cell(table, cell);
            const bool value_ok = matches_to_digits(got, cell.value, table.sig_digits);
            std::snprintf(buf, sizeof buf,
                          "  alpha=%.2f r=%.6g %c=%-5d value %.6e want %.3e %s\n",
                          cell.alpha, cell.r, table.rate_base, cell.M, got,
                          cell.value, value_ok ? "ok" : "MISMATCH");
            log << buf;
            misses += value_ok ? 0 : 1;

            if (j > start && !std::isnan(cell.rate)) {
                const double q = std::log(previous / got)
                                 / std::log(static_cast<double>(cell.M)
                                            / table.cells[j - 1].M);
                const bool rate_ok = std::abs(q - cell.rate) <= table.rate_tol;
                std::snprintf(buf, sizeof buf,
                              "  alpha=%.2f r=%.6g %c=%-5d rate  %.3f want %.3f %s\n",
                              cell.alpha, cell.r, table.rate_base, cell.M, q,
                              cell.rate, rate_ok ? "ok" : "MISMATCH");
                log << buf;
                misses += rate_ok ? 0 : 1;
            }
            previous = got;
        }
    }
    return misses;
}

int run_golden_check(bool quick, std::ostream& log)
{
    int misses = 0;
    for (const auto& table : golden_tables()) {
        if (quick && table.kind == ExperimentKind::Pde)
            continue;
        misses += check_golden_table(table, log);
    }
    return misses;
}

} // namespace subdiff
