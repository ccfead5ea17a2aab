// Command-line harness around the experiment sweeps: runs error studies,
// prints rate tables (CSV or Markdown), dumps pointwise error/envelope data,
// and re-checks the embedded reference results.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 reference mismatch in check mode.

#include "subdiff/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

namespace {

struct RawOptions {
    std::string config_path;
    std::string alpha, r, M, N;
    std::string scheme, norm, problem, coupling, two_mesh;
    std::string gamma, p;
    std::string horizon, threads;
    std::string out, format;
    bool pointwise = false;
};

void attach_common(CLI::App* cmd, RawOptions& raw)
{
    cmd->add_option("--config", raw.config_path,
                    "key=value configuration file; command-line flags override it");
    cmd->add_option("--alpha", raw.alpha, "comma list of fractional orders in (0,1)");
    cmd->add_option("--r", raw.r, "comma list of mesh grading exponents (>= 1)");
    cmd->add_option("--M", raw.M, "comma list of temporal interval counts");
    cmd->add_option("--N", raw.N, "comma list of spatial interval counts (pde)");
    cmd->add_option("--scheme", raw.scheme, "l1 | alikhanov");
    cmd->add_option("--norm", raw.norm, "final-time | max-over-time | spatial-l2");
    cmd->add_option("--gamma", raw.gamma, "stability data growth exponent");
    cmd->add_option("--p", raw.p, "barrier anchor index");
    cmd->add_option("--problem", raw.problem,
                    "ivp: power; pde: layer | manufactured");
    cmd->add_option("--coupling", raw.coupling,
                    "pde space/time tie: fixed | diagonal | squared");
    cmd->add_option("--two-mesh", raw.two_mesh,
                    "pde: difference against a refined companion run (0/1)");
    cmd->add_option("--horizon", raw.horizon, "final time T");
    cmd->add_option("--threads", raw.threads, "worker count for the sweep");
    cmd->add_option("--out", raw.out, "output path (default: stdout)");
    cmd->add_option("--format", raw.format, "csv | markdown");
    cmd->add_flag("--pointwise", raw.pointwise,
                  "also emit per-level error/envelope/ratio data (ivp)");
}

subdiff::ExperimentConfig build_config(const RawOptions& raw,
                                       subdiff::ExperimentKind kind)
{
    subdiff::ExperimentConfig config;
    if (!raw.config_path.empty())
        subdiff::load_config_file(raw.config_path, config);
    config.kind = kind; // the subcommand names the experiment

    const std::pair<const char*, const std::string*> overrides[] = {
        {"alpha", &raw.alpha},       {"r", &raw.r},
        {"M", &raw.M},               {"N", &raw.N},
        {"scheme", &raw.scheme},     {"norm", &raw.norm},
        {"gamma", &raw.gamma},       {"p", &raw.p},
        {"problem", &raw.problem},   {"coupling", &raw.coupling},
        {"two_mesh", &raw.two_mesh}, {"horizon", &raw.horizon},
        {"threads", &raw.threads},   {"out", &raw.out},
        {"format", &raw.format},
    };
    for (const auto& [key, value] : overrides)
        if (!value->empty())
            subdiff::apply_config_entry(config, key, *value);
    if (raw.pointwise)
        subdiff::apply_config_entry(config, "pointwise", "1");
    return config;
}

std::string pointwise_path(const std::string& out, const subdiff::PointwiseBlock& block)
{
    char suffix[64];
    std::snprintf(suffix, sizeof suffix, "_alpha%g_r%g_M%d", block.alpha, block.r,
                  block.M);
    const auto dot = out.rfind('.');
    const auto slash = out.rfind('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return out + suffix;
    return out.substr(0, dot) + suffix + out.substr(dot);
}

void write_outputs(const subdiff::ExperimentConfig& config,
                   const subdiff::ErrorReport& report)
{
    if (config.out.empty()) {
        subdiff::emit_table(report, config.format, std::cout);
    } else {
        std::ofstream file(config.out);
        if (!file)
            throw subdiff::ConfigError("cannot open output file '" + config.out + "'");
        subdiff::emit_table(report, config.format, file);
    }

    for (const auto& block : report.pointwise) {
        if (config.out.empty()) {
            char header[96];
            std::snprintf(header, sizeof header, "# pointwise alpha=%g r=%g M=%d\n",
                          block.alpha, block.r, block.M);
            std::cout << header;
            subdiff::write_pointwise_rows(block.rows, std::cout);
            continue;
        }
        const std::string path = pointwise_path(config.out, block);
        std::ofstream file(path);
        if (!file)
            throw subdiff::ConfigError("cannot open output file '" + path + "'");
        subdiff::write_pointwise_rows(block.rows, file);
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"graded-mesh experiment harness for fractional-order problems"};
    app.require_subcommand(1);

    const std::pair<const char*, subdiff::ExperimentKind> kinds[] = {
        {"ivp", subdiff::ExperimentKind::Ivp},
        {"pde", subdiff::ExperimentKind::Pde},
        {"stability", subdiff::ExperimentKind::Stability},
        {"barrier", subdiff::ExperimentKind::Barrier},
        {"truncation", subdiff::ExperimentKind::Truncation},
    };
    RawOptions raw[5];
    CLI::App* commands[5];
    const char* descriptions[] = {
        "initial-value error sweep (exact solution u = t^alpha)",
        "two-dimensional parabolic error sweep",
        "empirical stability ratios against the discrete barrier",
        "barrier bound verification sweep",
        "truncation-error bound ratios",
    };
    for (int i = 0; i < 5; ++i) {
        commands[i] = app.add_subcommand(kinds[i].first, descriptions[i]);
        attach_common(commands[i], raw[i]);
    }

    bool quick = false;
    CLI::App* check = app.add_subcommand(
        "check", "recompute the embedded reference tables and compare");
    check->add_flag("--quick", quick, "skip the parabolic tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (check->parsed()) {
            const int misses = subdiff::run_golden_check(quick, std::cout);
            if (misses > 0) {
                std::cout << misses << " reference mismatches\n";
                return 4;
            }
            std::cout << "all reference values reproduced\n";
            return 0;
        }
        for (int i = 0; i < 5; ++i) {
            if (!commands[i]->parsed())
                continue;
            const auto config = build_config(raw[i], kinds[i].second);
            write_outputs(config, subdiff::run_experiment(config));
            return 0;
        }
        std::cerr << "no subcommand selected\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}
