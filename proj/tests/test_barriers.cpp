#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "subdiff/barriers.hpp"
#include "subdiff/temporal_mesh.hpp"

#include <cmath>
#include <sstream>
#include <vector>

using namespace subdiff;

TEST_CASE("ramp barrier takes the linear branch before the anchor and the power branch after")
{
    const double alpha = 0.5;
    const double beta = 1.0 - alpha;
    const int p = 4;
    const auto mesh = build_graded_mesh(1.0, 64, 2.0);
    const auto barrier = build_barrier(mesh, alpha, p);

    CHECK(barrier.values[0] == 0.0);
    CHECK(barrier.anchor == p);
    CHECK(barrier.beta == beta);
    CHECK_FALSE(barrier.gamma.has_value());

    const double tp = mesh.node(p);
    for (int j = 1; j <= 64; ++j) {
        const double t = mesh.node(j);
        const double expected = (j <= p) ? (t / tp) * std::pow(tp, -beta)
                                         : std::pow(t, -beta);
        CHECK(barrier.values[j] == doctest::Approx(expected).epsilon(1e-14));
    }
    // both branches agree at the anchor itself
    CHECK(tp / tp * std::pow(tp, -beta)
          == doctest::Approx(std::pow(tp, -beta)).epsilon(1e-15));
}

TEST_CASE("barrier construction rejects out-of-range anchors and alpha")
{
    const auto mesh = build_graded_mesh(1.0, 16, 2.0);
    CHECK_THROWS_AS(build_barrier(mesh, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_barrier(mesh, 0.5, 17), std::invalid_argument);
    CHECK_THROWS_AS(build_barrier(mesh, 0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(build_barrier(mesh, 1.0, 4), std::invalid_argument);
}

TEST_CASE("barrier bound values are positive and stable under mesh doubling")
{
    // pinned values act as regressions; they are insensitive to M because the
    // minimizing level sits at a fixed relative position in the graded mesh
    const auto m256_r1 = build_graded_mesh(1.0, 256, 1.0);
    const auto m512_r1 = build_graded_mesh(1.0, 512, 1.0);
    const double b256 = verify_barrier_bound(m256_r1, 0.5, 8, SchemeKind::L1);
    const double b512 = verify_barrier_bound(m512_r1, 0.5, 8, SchemeKind::L1);
    CHECK(b256 == doctest::Approx(4.986779e-02).epsilon(2e-3));
    CHECK(std::abs(b512 - b256) <= 0.02 * b256);

    const double r_steep = (2.0 - 0.3) / 0.3;
    const auto steep = build_graded_mesh(1.0, 1024, r_steep);
    const double b_steep = verify_barrier_bound(steep, 0.3, 8, SchemeKind::L1);
    CHECK(b_steep > 0.0);
    CHECK(b_steep == doctest::Approx(2.197060e-09).epsilon(2e-2));

    const auto quad = build_graded_mesh(1.0, 256, 2.0);
    const double b_alik = verify_barrier_bound(quad, 0.5, 8, SchemeKind::Alikhanov);
    CHECK(b_alik == doctest::Approx(1.908604e-03).epsilon(2e-3));
}

TEST_CASE("barrier bound stays positive across the parameter lattice with anchor 8")
{
    for (double alpha : {0.3, 0.7}) {
        for (double r : {1.0, (2.0 - alpha) / alpha}) {
            for (SchemeKind scheme : {SchemeKind::L1, SchemeKind::Alikhanov}) {
                const auto mesh = build_graded_mesh(1.0, 128, r);
                CAPTURE(alpha);
                CAPTURE(r);
                CHECK(verify_barrier_bound(mesh, alpha, 8, scheme) > 0.0);
            }
        }
    }
}

TEST_CASE("stacked barrier with positive gamma stays below its geometric ceiling")
{
    const double alpha = 0.5;
    const double r = 2.0;
    const auto mesh = build_graded_mesh(1.0, 256, r);

    for (double gamma : {0.25, 0.05}) {
        const auto stack = build_stacked_barrier(mesh, alpha, gamma, 8, 256);
        REQUIRE(stack.gamma.has_value());
        CHECK(*stack.gamma == gamma);
        CHECK(stack.stack_levels > 50); // truncated by the 1e-16 scale rule
        const double ceiling = 1.0 / (1.0 - std::exp2(-gamma * r));
        double worst = 0.0;
        for (int j = 1; j <= 256; ++j)
            worst = std::max(worst, stack.values[j]
                                        / std::pow(mesh.node(j), alpha - 1.0));
        CAPTURE(gamma);
        CHECK(worst <= ceiling);
        if (gamma == 0.25)
            CHECK(worst > 0.5 * ceiling); // for moderate gamma the ceiling is the
                                          // right order, not slack; for tiny gamma
                                          // anchors overshoot the horizon first
    }
}

TEST_CASE("stacked barrier with zero gamma uses the doubling level count")
{
    const double alpha = 0.5;
    const int M = 256;
    const int p = 8;
    const auto mesh = build_graded_mesh(1.0, M, 2.0);
    const auto stack = build_stacked_barrier(mesh, alpha, 0.0, p, M);

    // levels = ceil(log2(M/p) - 1) = 4 and every level contributes exactly
    // its power branch value 1 at t = T = 1
    CHECK(stack.stack_levels == 4);
    CHECK(stack.values[M] == doctest::Approx(5.0).epsilon(1e-12));
    const double cap = std::pow(mesh.horizon(), alpha - 1.0)
                       * (1.0 + std::log2(static_cast<double>(M) / p));
    CHECK(stack.values[M] <= cap);
}

TEST_CASE("stacked barrier at the lowest admissible gamma is bounded by its envelope")
{
    const double alpha = 0.5;
    const double gamma = alpha - 1.0;
    const int M = 256;
    const auto mesh = build_graded_mesh(1.0, M, 2.0);
    const auto stack = build_stacked_barrier(mesh, alpha, gamma, 8, M);

    const double tau = mesh.first_step();
    const double constant = 1.0 / (std::exp2(-gamma * 2.0) - 1.0);
    for (int j = 1; j <= M; ++j) {
        const double env = std::pow(mesh.node(j), alpha - 1.0)
                           * std::pow(tau / mesh.node(j), gamma);
        CHECK(stack.values[j] <= constant * env * (1.0 + 1e-12));
    }
}

TEST_CASE("stacked barrier reports a stack that would overrun the mesh")
{
    const auto mesh = build_graded_mesh(1.0, 64, 2.0);
    CHECK_THROWS_AS(build_stacked_barrier(mesh, 0.5, 0.0, 8, 64 * 64),
                    std::runtime_error);
    CHECK_THROWS_AS(build_stacked_barrier(mesh, 0.5, 0.5, 8, 64),
                    std::invalid_argument); // gamma must stay below alpha
    CHECK_THROWS_AS(build_stacked_barrier(mesh, 0.5, -0.51, 8, 64),
                    std::invalid_argument); // and no lower than alpha - 1
}

TEST_CASE("stability envelope closed forms")
{
    const double alpha = 0.5;

    SUBCASE("positive gamma drops the shape factor entirely")
    {
        const auto mesh = build_graded_mesh(1.0, 32, 2.0);
        const auto env = stability_envelope(mesh, alpha, alpha);
        const double tau = mesh.first_step();
        for (int j = 1; j <= 32; ++j)
            CHECK(env.values[j]
                  == doctest::Approx(tau * std::pow(mesh.node(j), alpha - 1.0)));
    }
    SUBCASE("zero gamma contributes a logarithmic factor, trivial at the first level")
    {
        const auto mesh = build_graded_mesh(1.0, 32, 2.0);
        const auto env = stability_envelope(mesh, alpha, 0.0);
        const double tau = mesh.first_step();
        CHECK(env.values[1] == doctest::Approx(std::pow(tau, alpha)));
        CHECK(env.values[32]
              == doctest::Approx(tau * (1.0 + std::log(1.0 / tau))));
    }
    SUBCASE("negative gamma on a uniform mesh")
    {
        const auto mesh = build_graded_mesh(1.0, 16, 1.0);
        const auto env = stability_envelope(mesh, alpha, -0.5);
        // tau * t^{alpha-1} * (tau/t)^gamma at t = 1: (1/16) * 4 = 0.25
        CHECK(env.values[16] == doctest::Approx(0.25));
    }
}

TEST_CASE("empirical stability ratios are uniform in the level count")
{
    SUBCASE("positive gamma, quadratic grading")
    {
        double previous = 0.0;
        for (int M : {64, 128, 256, 512}) {
            const auto mesh = build_graded_mesh(1.0, M, 2.0);
            const double ratio
                = empirical_stability_check(SchemeKind::L1, mesh, 0.5, 0.5);
            CHECK(ratio == doctest::Approx(1.614690).epsilon(1e-3));
            if (previous > 0.0)
                CHECK(std::abs(ratio - previous) <= 0.01 * previous);
            previous = ratio;
        }
    }
    SUBCASE("gamma at the lower admissible edge grows by at most two percent per doubling")
    {
        double previous = 0.0;
        for (int M : {64, 128, 256, 512}) {
            const auto mesh = build_graded_mesh(1.0, M, 2.0);
            const double ratio
                = empirical_stability_check(SchemeKind::L1, mesh, 0.5, -0.5);
            CHECK(ratio < 2.0);
            if (previous > 0.0)
                CHECK(ratio <= 1.02 * previous);
            previous = ratio;
        }
    }
    SUBCASE("three-point scheme at its steepest covered grading")
    {
        const double alpha = 0.5;
        for (int M : {128, 256, 512}) {
            const auto mesh = build_graded_mesh(1.0, M, (3.0 - alpha) / alpha);
            const double ratio = empirical_stability_check(SchemeKind::Alikhanov,
                                                           mesh, alpha, alpha);
            CHECK(ratio == doctest::Approx(3.156).epsilon(2e-3));
        }
    }
}

TEST_CASE("error envelope branch formulas")
{
    const double alpha = 0.5;
    const int M = 64;

    SUBCASE("grading below the scheme order keeps the reduced rate")
    {
        const auto mesh = build_graded_mesh(1.0, M, 1.0);
        const auto env = error_envelope(mesh, alpha, 1.0, EnvelopeKind::L1Error);
        CHECK(env.values[M] == doctest::Approx(1.0 / M));
        CHECK(env.values[M / 2]
              == doctest::Approx((1.0 / M) * std::pow(0.5, alpha - 1.0)));
    }
    SUBCASE("grading exactly at the scheme order carries the logarithm")
    {
        const double r = 2.0 - alpha;
        const auto mesh = build_graded_mesh(1.0, M, r);
        const auto env = error_envelope(mesh, alpha, r, EnvelopeKind::L1Error);
        const double t1 = mesh.first_step();
        CHECK(env.values[M]
              == doctest::Approx(std::pow(M, alpha - 2.0)
                                 * (1.0 + std::log(1.0 / t1))));
    }
    SUBCASE("grading above the scheme order reaches the full rate")
    {
        const double r = 4.0;
        const auto mesh = build_graded_mesh(1.0, M, r);
        const auto env = error_envelope(mesh, alpha, r, EnvelopeKind::AlikhanovError);
        const double p = 3.0 - alpha;
        CHECK(env.values[M] == doctest::Approx(std::pow(M, -p)));
        CHECK(env.values[M / 4]
              == doctest::Approx(std::pow(M, -p)
                                 * std::pow(mesh.node(M / 4), alpha - p / r)));
    }
    SUBCASE("parabolic variant adds the spatial-coupling tail when admissible")
    {
        const auto mesh = build_graded_mesh(1.0, M, 2.0);
        const auto env = error_envelope(mesh, alpha, 2.0,
                                        EnvelopeKind::AlikhanovParabolicError);
        // r = 2 < p = 2.5, and 2/r = 1 < alpha + 1, so both terms are live
        const double expected = std::pow(M, -2.0) * std::pow(1.0, alpha - 1.0)
                                + std::pow(M, -2.0) * std::pow(1.0, 2.0 * alpha - 1.0);
        CHECK(env.values[M] == doctest::Approx(expected));
    }
    SUBCASE("stability kind is rejected")
    {
        const auto mesh = build_graded_mesh(1.0, M, 2.0);
        CHECK_THROWS_AS(error_envelope(mesh, alpha, 2.0, EnvelopeKind::Stability),
                        std::invalid_argument);
        CHECK_THROWS_AS(error_envelope(mesh, alpha, 0.5, EnvelopeKind::L1Error),
                        std::invalid_argument);
    }
}

TEST_CASE("profile csv dump emits one row per level")
{
    const auto mesh = build_graded_mesh(1.0, 8, 2.0);
    const auto barrier = build_barrier(mesh, 0.5, 4);
    std::ostringstream os;
    dump_levels_csv(mesh, barrier.values, os);

    const std::string text = os.str();
    CHECK(text.rfind("j,t,value\n", 0) == 0);
    size_t rows = 0;
    for (char c : text)
        rows += (c == '\n') ? 1 : 0;
    CHECK(rows == 10); // header plus levels 0..8

    std::vector<double> wrong(4, 0.0);
    CHECK_THROWS_AS(dump_levels_csv(mesh, wrong, os), std::invalid_argument);
}
