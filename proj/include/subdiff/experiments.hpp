#pragma once

#include "subdiff/barriers.hpp"
#include "subdiff/caputo_operators.hpp"
#include "subdiff/ivp.hpp"
#include "subdiff/pde.hpp"
#include "subdiff/temporal_mesh.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace subdiff {

// Configuration-driven sweep harness: runs error studies over (alpha, r, M[, N])
// tuples, computes observed convergence rates, and serializes tables and
// pointwise plot data. All output is deterministic: rerunning a configuration
// reproduces files byte for byte.

enum class ExperimentKind { Ivp, Pde, Stability, Barrier, Truncation };
enum class NormKind { FinalTime, MaxOverTime, SpatialL2 };
enum class TableFormat { Csv, Markdown };

// How the spatial resolution of a parabolic run is tied to the temporal one:
//   FixedSpace   N constant across the sweep (temporal ladders; the companion
//                solve doubles M only, so the spatial component cancels)
//   Diagonal     N = M, companion doubles both
//   SquaredTime  M = N^2, sweep runs over N, companion doubles both
enum class PdeCoupling { FixedSpace, Diagonal, SquaredTime };

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Ivp;
    SchemeKind scheme = SchemeKind::L1;
    std::vector<double> alphas;
    std::vector<double> rs;
    std::vector<int> Ms;
    std::vector<int> Ns;                // pde only
    std::optional<double> gamma;        // stability experiments
    std::optional<int> anchor;          // barrier experiments
    NormKind norm = NormKind::FinalTime;
    double horizon = 1.0;
    bool envelope_overlay = false;      // per-level plot data (ivp only)
    bool two_mesh = true;               // pde: difference against a refined run
    PdeCoupling coupling = PdeCoupling::FixedSpace;
    std::string problem = "power";      // ivp: power; pde: layer | manufactured
    std::string out;                    // empty = stdout
    TableFormat format = TableFormat::Csv;
    int threads = 1;
};

struct ErrorRow {
    double alpha = 0;
    double r = 0;
    int M = 0;     // sweep variable (equals N under SquaredTime coupling)
    int N = 0;     // spatial intervals, 0 when not applicable
    double value = 0;
    double rate = 0; // NaN = no rate (first row of its group)
};

struct PointwiseRow {
    int m = 0;
    double t = 0;
    double error = 0;
    double envelope = 0;
    double ratio = 0;
};

struct PointwiseBlock {
    double alpha = 0;
    double r = 0;
    int M = 0;
    std::vector<PointwiseRow> rows;
};

struct ErrorReport {
    std::vector<ErrorRow> rows;
    char rate_base = 'M'; // 'M' or 'N'; labels the base of the rate column
    std::vector<PointwiseBlock> pointwise;
};

// Throws ConfigError when the configuration cannot be run as given.
void validate_config(const ExperimentConfig& config);

// Runs every (alpha, r, M[, N]) tuple of the sweep, in config order, using a
// worker pool of config.threads. Module errors propagate with the tuple
// coordinates prepended. Output is independent of the thread count.
ErrorReport run_experiment(const ExperimentConfig& config);

// q_i = ln(e_i / e_{i+1}) / ln(M_{i+1} / M_i) for consecutive pairs.
// Requires strictly increasing M and strictly positive errors.
std::vector<double> compute_rates(const std::vector<std::pair<int, double>>& errors);

// CSV columns alpha,r,M,error,rate (rate blank when absent), preceded by a
// "# rate base X" comment naming the variable the rates are measured against.
// Markdown mirrors the usual table layout: one error row per alpha followed by
// its rate row, grouped by grading exponent.
void emit_table(const ErrorReport& report, TableFormat format, std::ostream& os);

// Inverse of the CSV emitter; emit(parse(emit(report))) == emit(report).
ErrorReport parse_table_csv(std::istream& is);

// CSV m,t,error,envelope,ratio for m = 1..M. errors must hold one entry per
// mesh node (index = level) and the envelope must come from the same mesh.
void emit_pointwise_plot_data(const TemporalMesh& mesh,
                              const std::vector<double>& errors,
                              const EnvelopeProfile& envelope, std::ostream& os);
std::vector<PointwiseRow> pointwise_rows(const TemporalMesh& mesh,
                                         const std::vector<double>& errors,
                                         const EnvelopeProfile& envelope);
void write_pointwise_rows(const std::vector<PointwiseRow>& rows, std::ostream& os);

// Flat key=value config format; '#' starts a comment, lists are
// comma-separated. Unknown keys and malformed values raise ConfigError.
void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value);
void load_config_stream(std::istream& is, ExperimentConfig& config);
void load_config_file(const std::string& path, ExperimentConfig& config);

// Reference results bundled for the `check` mode: each table pins a family of
// sweep cells together with the published convergence rates.
struct GoldenCell {
    double alpha = 0;
    double r = 0;
    int M = 0;      // sweep variable (N for spatially driven tables)
    double value = 0;
    double rate = 0; // NaN = rate not checked for this cell
};

struct GoldenTable {
    const char* name;
    ExperimentKind kind;
    SchemeKind scheme;
    NormKind norm;
    PdeCoupling coupling;   // pde tables only
    const char* problem;
    int fixed_n;            // pde FixedSpace tables only, else 0
    int sig_digits;         // value agreement requirement
    double rate_tol;        // |observed - published| bound for rates
    char rate_base;
    std::vector<GoldenCell> cells;
};

const std::vector<GoldenTable>& golden_tables();

// True when value agrees with reference to the required count of significant
// digits: |value - reference| <= 0.6 * 10^(floor(log10 |reference|) - digits + 1).
bool matches_to_digits(double value, double reference, int digits);

// Computes the sweep value a golden cell pins (solving whatever it needs).
double evaluate_golden_cell(const GoldenTable& table, const GoldenCell& cell);

// Recomputes one table, logging one line per comparison; returns the number
// of value or rate mismatches.
int check_golden_table(const GoldenTable& table, std::ostream& log);

// Recomputes every golden table (quick = skip the parabolic ones), logging one
// line per comparison; returns the number of mismatches.
int run_golden_check(bool quick, std::ostream& log);

} // namespace subdiff
