#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "subdiff/experiments.hpp"

#include <cmath>
#include <sstream>
#include <string>

using namespace subdiff;

namespace {

ExperimentConfig ivp_smoke_config()
{
    ExperimentConfig config;
    config.kind = ExperimentKind::Ivp;
    config.scheme = SchemeKind::L1;
    config.alphas = {0.5};
    config.rs = {1.0};
    config.Ms = {128, 512};
    return config;
}

std::string emitted(const ErrorReport& report, TableFormat format)
{
    std::ostringstream os;
    emit_table(report, format, os);
    return os.str();
}

} // namespace

TEST_CASE("observed rates follow the two-point logarithm formula")
{
    CHECK(compute_rates({{128, 1.953e-3}, {512, 4.883e-4}})[0]
          == doctest::Approx(1.000).epsilon(1e-4));
    CHECK(compute_rates({{64, 6.079e-5}, {256, 3.940e-6}})[0]
          == doctest::Approx(1.974).epsilon(3e-4));

    const double e = 3.7e-4;
    CHECK(compute_rates({{32, e}, {64, e / 2.0}})[0] == 1.0);

    const auto base = compute_rates({{32, 1e-2}, {64, 4e-3}, {128, 1.5e-3}});
    const auto scaled
        = compute_rates({{32, 7.3e-2}, {64, 7.3 * 4e-3}, {128, 7.3 * 1.5e-3}});
    REQUIRE(base.size() == 2);
    for (size_t i = 0; i < base.size(); ++i)
        CHECK(scaled[i] == doctest::Approx(base[i]).epsilon(1e-12));

    CHECK_THROWS_AS(compute_rates({{64, 1e-3}, {64, 5e-4}}), std::invalid_argument);
    CHECK_THROWS_AS(compute_rates({{128, 1e-3}, {64, 5e-4}}), std::invalid_argument);
    CHECK_THROWS_AS(compute_rates({{64, 0.0}, {128, 5e-4}}), std::invalid_argument);
    CHECK_THROWS_AS(compute_rates({{64, 1e-3}, {128, -5e-4}}), std::invalid_argument);
}

TEST_CASE("config files populate every field and reject junk")
{
    ExperimentConfig config;
    std::istringstream in("# sweep description\n"
                          "experiment = pde\n"
                          "scheme=alikhanov\n"
                          "alpha = 0.3, 0.5\n"
                          "M = 32,64\n"
                          "norm = max-over-time\n"
                          "coupling = diagonal\n"
                          "problem = layer\n"
                          "two_mesh = true\n"
                          "pointwise = 0\n"
                          "format = markdown\n"
                          "threads = 2\n"
                          "horizon = 2.0\n"
                          "gamma = -0.25\n"
                          "p = 8\n"
                          "out = sweep.md   # trailing comment\n");
    load_config_stream(in, config);
    CHECK(config.kind == ExperimentKind::Pde);
    CHECK(config.scheme == SchemeKind::Alikhanov);
    CHECK(config.alphas == std::vector<double>{0.3, 0.5});
    CHECK(config.Ms == std::vector<int>{32, 64});
    CHECK(config.norm == NormKind::MaxOverTime);
    CHECK(config.coupling == PdeCoupling::Diagonal);
    CHECK(config.problem == "layer");
    CHECK(config.two_mesh);
    CHECK_FALSE(config.envelope_overlay);
    CHECK(config.format == TableFormat::Markdown);
    CHECK(config.threads == 2);
    CHECK(config.horizon == 2.0);
    CHECK(config.gamma == -0.25);
    CHECK(config.anchor == 8);
    CHECK(config.out == "sweep.md");

    ExperimentConfig junk;
    CHECK_THROWS_AS(apply_config_entry(junk, "granularity", "4"), ConfigError);
    CHECK_THROWS_AS(apply_config_entry(junk, "alpha", "0.3;0.5"), ConfigError);
    CHECK_THROWS_AS(apply_config_entry(junk, "M", "sixty-four"), ConfigError);
    CHECK_THROWS_AS(apply_config_entry(junk, "scheme", "l7"), ConfigError);
    std::istringstream bad("alpha 0.5\n");
    CHECK_THROWS_AS(load_config_stream(bad, junk), ConfigError);
    CHECK_THROWS_AS(load_config_file("/nonexistent/sweep.conf", junk), ConfigError);
}

TEST_CASE("validation rejects inconsistent sweeps")
{
    auto config = ivp_smoke_config();
    validate_config(config); // baseline passes

    auto broken = config;
    broken.alphas.clear();
    CHECK_THROWS_AS(validate_config(broken), ConfigError);
    broken = config;
    broken.alphas = {1.2};
    CHECK_THROWS_AS(validate_config(broken), ConfigError);
    broken = config;
    broken.rs = {0.5};
    CHECK_THROWS_AS(validate_config(broken), ConfigError);
    broken = config;
    broken.Ms = {48, 96}; // rates requested but not powers of two
    CHECK_THROWS_AS(validate_config(broken), ConfigError);
    broken.Ms = {48}; // single value: no rates, arbitrary M fine
    validate_config(broken);
    broken = config;
    broken.threads = 0;
    CHECK_THROWS_AS(validate_config(broken), ConfigError);
    broken = config;
    broken.norm = NormKind::SpatialL2;
    CHECK_THROWS_AS(validate_config(broken), ConfigError);
    broken = config;
    broken.envelope_overlay = true;
    validate_config(broken); // overlay fine for ivp

    ExperimentConfig pde = config;
    pde.kind = ExperimentKind::Pde;
    pde.problem = "layer";
    pde.coupling = PdeCoupling::FixedSpace;
    pde.Ns = {16, 32};
    CHECK_THROWS_AS(validate_config(pde), ConfigError);
    pde.Ns = {16};
    validate_config(pde);
    pde.envelope_overlay = true;
    CHECK_THROWS_AS(validate_config(pde), ConfigError);
    pde.envelope_overlay = false;
    pde.coupling = PdeCoupling::Diagonal;
    CHECK_THROWS_AS(validate_config(pde), ConfigError); // leftover N list
    pde.Ns.clear();
    validate_config(pde);
    pde.coupling = PdeCoupling::SquaredTime;
    CHECK_THROWS_AS(validate_config(pde), ConfigError); // leftover M list
    pde.Ms.clear();
    pde.Ns = {8, 16};
    validate_config(pde);
    pde.two_mesh = false; // layer problem has no exact solution
    CHECK_THROWS_AS(validate_config(pde), ConfigError);
    pde.problem = "manufactured";
    pde.norm = NormKind::SpatialL2;
    validate_config(pde);
    pde.two_mesh = true;
    CHECK_THROWS_AS(validate_config(pde), ConfigError);

    ExperimentConfig stab = config;
    stab.kind = ExperimentKind::Stability;
    CHECK_THROWS_AS(validate_config(stab), ConfigError);
    stab.gamma = 0.25;
    validate_config(stab);

    ExperimentConfig barrier = config;
    barrier.kind = ExperimentKind::Barrier;
    CHECK_THROWS_AS(validate_config(barrier), ConfigError);
    barrier.anchor = 8;
    validate_config(barrier);
}

TEST_CASE("initial-value sweeps reproduce the pinned reference cells")
{
    const auto report = run_experiment(ivp_smoke_config());
    REQUIRE(report.rows.size() == 2);
    CHECK(matches_to_digits(report.rows[0].value, 1.953e-3, 3));
    CHECK(matches_to_digits(report.rows[1].value, 4.883e-4, 3));
    CHECK(std::isnan(report.rows[0].rate));
    CHECK(report.rows[1].rate == doctest::Approx(1.000).epsilon(5e-3));
    CHECK(report.rate_base == 'M');

    // reruns and extra workers change nothing
    const auto again = run_experiment(ivp_smoke_config());
    auto threaded_config = ivp_smoke_config();
    threaded_config.threads = 2;
    const auto threaded = run_experiment(threaded_config);
    for (size_t i = 0; i < report.rows.size(); ++i) {
        CHECK(again.rows[i].value == report.rows[i].value);
        CHECK(threaded.rows[i].value == report.rows[i].value);
    }
    CHECK(emitted(again, TableFormat::Csv) == emitted(report, TableFormat::Csv));
}

TEST_CASE("rate column restarts at every (alpha, r) group boundary")
{
    auto config = ivp_smoke_config();
    config.alphas = {0.3, 0.5};
    config.Ms = {64, 128};
    const auto report = run_experiment(config);
    REQUIRE(report.rows.size() == 4);
    CHECK(std::isnan(report.rows[0].rate));
    CHECK_FALSE(std::isnan(report.rows[1].rate));
    CHECK(std::isnan(report.rows[2].rate));
    CHECK_FALSE(std::isnan(report.rows[3].rate));
}

TEST_CASE("module failures carry the sweep coordinates")
{
    ExperimentConfig config = ivp_smoke_config();
    config.kind = ExperimentKind::Barrier;
    config.anchor = 2000; // beyond every M in the sweep
    config.Ms = {16};
    try {
        run_experiment(config);
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).rfind("alpha=0.5 r=1 M=16: ", 0) == 0);
    }
}

TEST_CASE("csv output is byte-stable and parses back")
{
    ErrorReport report;
    report.rows.push_back({0.5, 1.0, 128, 0, 1.25e-3,
                           std::numeric_limits<double>::quiet_NaN()});
    report.rows.push_back({0.5, 1.0, 256, 0, 6.25e-4, 1.0});

    const std::string csv = emitted(report, TableFormat::Csv);
    CHECK(csv
          == "# rate base M\n"
             "alpha,r,M,error,rate\n"
             "5.000000000e-01,1.000000000e+00,128,1.250000000e-03,\n"
             "5.000000000e-01,1.000000000e+00,256,6.250000000e-04,1.000\n");

    std::istringstream in(csv);
    const auto parsed = parse_table_csv(in);
    REQUIRE(parsed.rows.size() == 2);
    CHECK(parsed.rate_base == 'M');
    CHECK(parsed.rows[0].alpha == 0.5);
    CHECK(parsed.rows[0].M == 128);
    CHECK(std::isnan(parsed.rows[0].rate));
    CHECK(parsed.rows[1].rate == 1.0);
    CHECK(emitted(parsed, TableFormat::Csv) == csv);

    std::istringstream bad_header("alpha,r,M,err\n");
    CHECK_THROWS_AS(parse_table_csv(bad_header), std::invalid_argument);
    std::istringstream short_row("alpha,r,M,error,rate\n0.5,1,128\n");
    CHECK_THROWS_AS(parse_table_csv(short_row), std::invalid_argument);
}

TEST_CASE("markdown output interleaves error and rate rows")
{
    ErrorReport report;
    report.rows.push_back({0.5, 1.0, 128, 0, 1.25e-3,
                           std::numeric_limits<double>::quiet_NaN()});
    report.rows.push_back({0.5, 1.0, 256, 0, 6.25e-4, 1.0});
    CHECK(emitted(report, TableFormat::Markdown)
          == "rates computed in M^-q\n"
             "\n## r = 1\n\n"
             "| M | 128 | 256 |\n"
             "|---|---|---|\n"
             "| alpha=0.5 | 1.250e-03 | 6.250e-04 |\n"
             "| rate q |  | 1.000 |\n");
}

TEST_CASE("pointwise plot rows divide errors by the envelope")
{
    const auto mesh = build_graded_mesh(1.0, 4, 1.0);
    const std::vector<double> errors{0.0, 1e-3, 2e-3, 1.5e-3, 1e-3};
    EnvelopeProfile flat{EnvelopeKind::L1Error, 0.5, 1.5,
                         {0.0, 1.0, 1.0, 1.0, 1.0}};
    const auto rows = pointwise_rows(mesh, errors, flat);
    REQUIRE(rows.size() == 4);
    for (const auto& row : rows) {
        CHECK(row.ratio == row.error);
        CHECK(row.t == mesh.node(row.m));
    }
    std::ostringstream os;
    emit_pointwise_plot_data(mesh, errors, flat, os);
    CHECK(os.str().rfind("m,t,error,envelope,ratio\n", 0) == 0);
    CHECK(os.str().find("1,2.500000000e-01,1.000000000e-03,1.000000000e+00,"
                        "1.000000000e-03\n")
          != std::string::npos);

    const std::vector<double> wrong_size{0.0, 1e-3};
    CHECK_THROWS_AS(pointwise_rows(mesh, wrong_size, flat), std::invalid_argument);
}

TEST_CASE("reference tables carry the expected shape")
{
    const auto& tables = golden_tables();
    REQUIRE(tables.size() == 5);
    CHECK(tables[0].cells.size() == 27);
    CHECK(tables[1].cells.size() == 27);
    CHECK(tables[2].cells.size() == 18);
    CHECK(tables[3].cells.size() == 6);
    CHECK(tables[4].cells.size() == 9);

    bool found = false;
    for (const auto& cell : tables[0].cells)
        if (cell.alpha == 0.5 && cell.r == 1.0 && cell.M == 512) {
            CHECK(cell.value == 4.883e-4);
            CHECK(cell.rate == 1.000);
            found = true;
        }
    CHECK(found);
}

TEST_CASE("significant-digit agreement uses the leading-digit scale")
{
    CHECK(matches_to_digits(4.8828e-4, 4.883e-4, 3));
    CHECK_FALSE(matches_to_digits(4.95e-4, 4.883e-4, 3));
    CHECK(matches_to_digits(1.5417e-3, 1.54e-3, 2));
    CHECK_FALSE(matches_to_digits(1.47e-3, 1.54e-3, 2));
    CHECK(matches_to_digits(-2.5e-2, -2.51e-2, 2));
    CHECK_THROWS_AS(matches_to_digits(1.0, 0.0, 3), std::invalid_argument);
}

TEST_CASE("every embedded initial-value reference value recomputes cleanly")
{
    std::ostringstream log;
    CHECK(run_golden_check(true, log) == 0);
    CHECK(log.str().find("MISMATCH") == std::string::npos);
    CHECK(log.str().find("l1-ivp-final") != std::string::npos);
}
