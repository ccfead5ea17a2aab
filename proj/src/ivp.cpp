#include "subdiff/ivp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace subdiff {

namespace {

double grading_exponent(const TemporalMesh& mesh)
{
    if (auto r = mesh.grading())
        return *r;
    return diagnose_mesh(mesh, 1.0).r_estimate;
}

/// max of f over [a, b] sampled at 33 equispaced points; a zero left endpoint
/// is nudged inward so integrands singular at the origin stay finite.
template <typename F>
double sampled_sup(F&& f, double a, double b)
{
    constexpr int kPoints = 33;
    double best = 0.0;
    for (int k = 0; k < kPoints; ++k) {
        double s = a + (b - a) * k / (kPoints - 1.0);
        if (s == 0.0)
            s = (b - a) / 2048.0;
        best = std::max(best, f(s));
    }
    return best;
}

void check_consistency(const TemporalMesh& mesh, const IvpProblem& problem)
{
    if (!problem.exact)
        return;
    const PowerSum& u = *problem.exact;
    if (std::abs(u.value(0.0) - problem.initial_value) > 1e-12)
        throw std::invalid_argument("exact solution does not match the initial value");
    const int stride = std::max(1, mesh.intervals() / 16);
    for (int m = 1; m <= mesh.intervals(); m += stride) {
        const double t = mesh.node(m);
        const double f = problem.forcing(t);
        if (std::abs(u.caputo(problem.alpha, t) - f) > 1e-10 * std::max(1.0, std::abs(f)))
            throw std::invalid_argument(
                "exact solution is inconsistent with the forcing term");
    }
}

} // namespace

PowerSum::PowerSum(std::vector<MonomialTerm> terms) : terms_(std::move(terms))
{
    for (const auto& term : terms_)
        if (term.exponent < 0.0)
            throw std::invalid_argument("power sum exponents must be nonnegative");
}

double PowerSum::value(double t) const
{
    double sum = 0.0;
    for (const auto& term : terms_)
        sum += term.coefficient * (term.exponent == 0.0 ? 1.0 : std::pow(t, term.exponent));
    return sum;
}

double PowerSum::derivative(int order, double t) const
{
    if (order < 0)
        throw std::invalid_argument("derivative order must be nonnegative");
    double sum = 0.0;
    for (const auto& term : terms_) {
        double factor = term.coefficient;
        for (int k = 0; k < order; ++k)
            factor *= term.exponent - k;
        if (factor == 0.0)
            continue;
        sum += factor * std::pow(t, term.exponent - order);
    }
    return sum;
}

double PowerSum::caputo(double alpha, double t) const
{
    double sum = 0.0;
    for (const auto& term : terms_) {
        if (term.exponent == 0.0)
            continue; // constants are annihilated
        sum += term.coefficient * analytic_caputo_monomial(term.exponent, alpha, t);
    }
    return sum;
}

std::vector<double> solve_ivp(SchemeKind scheme, const TemporalMesh& mesh,
                              const IvpProblem& problem)
{
    if (!problem.forcing)
        throw std::invalid_argument("problem has no forcing term");
    check_consistency(mesh, problem);

    const ConvolutionWeights weights(scheme, mesh, problem.alpha);
    const int M = mesh.intervals();
    std::vector<double> u(static_cast<size_t>(M) + 1);
    u[0] = problem.initial_value;
    for (int m = 1; m <= M; ++m) {
        const auto row = weights.row(m);
        const double diagonal = row[static_cast<size_t>(m)];
        if (!(diagonal > 0.0)) {
            char msg[96];
            std::snprintf(msg, sizeof msg,
                          "nonpositive diagonal weight %.3e at level %d", diagonal, m);
            throw std::runtime_error(msg);
        }
        double history = 0.0;
        for (int j = 0; j < m; ++j)
            history += row[static_cast<size_t>(j)] * u[static_cast<size_t>(j)];
        u[static_cast<size_t>(m)]
            = (problem.forcing(weights.eval_time(m)) - history) / diagonal;
    }
    return u;
}

TruncationReport truncation_report(SchemeKind scheme, const TemporalMesh& mesh,
                                   const IvpProblem& problem)
{
    if (!problem.exact)
        throw std::invalid_argument("truncation report requires an exact solution");
    check_consistency(mesh, problem);
    const PowerSum& u = *problem.exact;
    const double alpha = problem.alpha;
    const int M = mesh.intervals();
    if (scheme == SchemeKind::Alikhanov && M < 2)
        throw std::invalid_argument("three-point scheme needs at least two intervals");

    const ConvolutionWeights weights(scheme, mesh, alpha);
    std::vector<double> nodal(static_cast<size_t>(M) + 1);
    for (int j = 0; j <= M; ++j)
        nodal[static_cast<size_t>(j)] = u.value(mesh.node(j));

    TruncationReport report;
    report.residuals.assign(static_cast<size_t>(M) + 1, 0.0);
    report.regularity_weights.assign(static_cast<size_t>(M) + 1, 0.0);

    for (int m = 1; m <= M; ++m) {
        const double discrete = apply_operator(
            weights, std::span<const double>(nodal).first(static_cast<size_t>(m) + 1), m);
        report.residuals[static_cast<size_t>(m)]
            = discrete - u.caputo(alpha, weights.eval_time(m));
    }

    if (scheme == SchemeKind::L1) {
        const double t1 = mesh.node(1);
        const double slope = (nodal[1] - nodal[0]) / t1;
        report.regularity_weights[1] = sampled_sup(
            [&](double s) {
                return std::pow(s, 1.0 - alpha) * std::abs(slope - u.derivative(1, s));
            },
            0.0, t1);
        for (int j = 2; j <= M; ++j)
            report.regularity_weights[static_cast<size_t>(j)]
                = std::pow(mesh.node(j), 2.0 - alpha)
                  * sampled_sup([&](double s) { return std::abs(u.derivative(2, s)); },
                                mesh.node(j - 1), mesh.node(j));
    } else {
        const double t2 = mesh.node(2);
        const double sup_weighted_slope = sampled_sup(
            [&](double s) {
                return std::pow(s, 1.0 - alpha) * std::abs(u.derivative(1, s));
            },
            0.0, t2);
        double lo = nodal[0];
        double hi = nodal[0];
        for (int k = 1; k <= 66; ++k) {
            const double v = u.value(t2 * k / 66.0);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        report.regularity_weights[1]
            = sup_weighted_slope + std::pow(t2, -alpha) * (hi - lo);
        for (int j = 2; j <= M - 1; ++j)
            report.regularity_weights[static_cast<size_t>(j)]
                = std::pow(mesh.node(j), 3.0 - alpha)
                  * sampled_sup([&](double s) { return std::abs(u.derivative(3, s)); },
                                mesh.node(j - 1), mesh.node(j + 1));
        report.regularity_weights[static_cast<size_t>(M)]
            = report.regularity_weights[static_cast<size_t>(M) - 1];
    }

    const double order = (scheme == SchemeKind::L1) ? 2.0 : 3.0;
    const double r = grading_exponent(mesh);
    const double exponent = std::min(alpha + 1.0, (order - alpha) / r);
    const double tau = mesh.first_step();
    double running_psi = 0.0;
    double worst = 0.0;
    for (int m = 1; m <= M; ++m) {
        running_psi = std::max(running_psi,
                               report.regularity_weights[static_cast<size_t>(m)]);
        const double shape = std::pow(tau / mesh.node(m), exponent) * running_psi;
        if (shape > 0.0)
            worst = std::max(worst,
                             std::abs(report.residuals[static_cast<size_t>(m)]) / shape);
    }
    report.bound_ratio = worst;
    return report;
}

void dump_solution_csv(const TemporalMesh& mesh, std::span<const double> u,
                       const IvpProblem& problem, std::ostream& os)
{
    if (u.size() != static_cast<size_t>(mesh.intervals()) + 1)
        throw std::invalid_argument("solution length does not match mesh");
    os << "m,t,U,exact,error\n";
    char line[160];
    for (size_t m = 0; m < u.size(); ++m) {
        const double t = mesh.node(static_cast<int>(m));
        if (problem.exact) {
            const double exact = problem.exact->value(t);
            std::snprintf(line, sizeof line, "%zu,%.9e,%.9e,%.9e,%.9e\n", m, t, u[m],
                          exact, u[m] - exact);
        } else {
            std::snprintf(line, sizeof line, "%zu,%.9e,%.9e,,\n", m, t, u[m]);
        }
        os << line;
    }
}

} // namespace subdiff
