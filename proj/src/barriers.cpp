#include "subdiff/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace subdiff {

namespace {

void require_alpha(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("alpha must lie in (0, 1)");
}

void require_anchor(const TemporalMesh& mesh, int p)
{
    if (p < 2 || p > mesh.intervals())
        throw std::invalid_argument("barrier anchor p must satisfy 2 <= p <= M");
}

double grading_exponent(const TemporalMesh& mesh)
{
    if (auto r = mesh.grading())
        return *r;
    return diagnose_mesh(mesh, 1.0).r_estimate;
}

} // namespace

BarrierProfile build_barrier(const TemporalMesh& mesh, double alpha, int p)
{
    require_alpha(alpha);
    require_anchor(mesh, p);

    const double beta = 1.0 - alpha;
    const double tp = mesh.node(p);
    const double ramp = std::pow(tp, -beta) / tp;

    BarrierProfile profile;
    profile.alpha = alpha;
    profile.beta = beta;
    profile.anchor = p;
    profile.values.assign(static_cast<size_t>(mesh.intervals()) + 1, 0.0);
    for (int j = 1; j <= mesh.intervals(); ++j) {
        const double t = mesh.node(j);
        profile.values[static_cast<size_t>(j)] = std::min(t * ramp, std::pow(t, -beta));
    }
    return profile;
}

double verify_barrier_bound(const TemporalMesh& mesh, double alpha, int p,
                            SchemeKind scheme)
{
    const BarrierProfile barrier = build_barrier(mesh, alpha, p);
    const ConvolutionWeights weights(scheme, mesh, alpha);
    const double tau_pow = std::pow(mesh.first_step(), alpha);

    double worst = std::numeric_limits<double>::infinity();
    for (int m = 1; m <= mesh.intervals(); ++m) {
        const double applied = apply_operator(
            weights, std::span<const double>(barrier.values).first(static_cast<size_t>(m) + 1), m);
        const double denom = tau_pow * std::pow(mesh.node(m), -alpha - 1.0);
        worst = std::min(worst, applied / denom);
    }
    return worst;
}

BarrierProfile build_stacked_barrier(const TemporalMesh& mesh, double alpha,
                                     double gamma, int p, int n_stop)
{
    require_alpha(alpha);
    require_anchor(mesh, p);
    if (!(gamma < alpha && gamma >= alpha - 1.0))
        throw std::invalid_argument("stacked barrier requires alpha-1 <= gamma < alpha");
    if (n_stop < 1)
        throw std::invalid_argument("n_stop must be positive");

    const double r = grading_exponent(mesh);
    const double beta = 1.0 - alpha;
    const int M = mesh.intervals();
    const double T = mesh.horizon();
    constexpr double kTruncation = 1e-16;
    constexpr int kMaxLevels = 8192;

    int levels = 0;
    if (gamma > 0.0) {
        double scale = 1.0;
        while (scale >= kTruncation && levels < kMaxLevels) {
            ++levels;
            scale = std::exp2(-static_cast<double>(levels) * gamma * r);
        }
    } else {
        if (n_stop > p)
            levels = static_cast<int>(
                std::ceil(std::log2(static_cast<double>(n_stop) / p) - 1.0));
        if (levels < 0)
            levels = 0;
        const double top_anchor = std::ldexp(static_cast<double>(p), levels);
        if (top_anchor > static_cast<double>(M))
            throw std::runtime_error("barrier stack exceeds mesh: top anchor index above M");
    }

    // Anchor times past the last node follow the graded extension of the
    // node formula, in log space so huge anchor indices cannot overflow.
    const auto log_anchor_time = [&](int m) {
        const double index = static_cast<double>(m) * std::numbers::ln2
                             + std::log(static_cast<double>(p));
        return std::log(T) + r * (index - std::log(static_cast<double>(M)));
    };

    BarrierProfile profile;
    profile.alpha = alpha;
    profile.beta = beta;
    profile.anchor = p;
    profile.gamma = gamma;
    profile.stack_levels = levels;
    profile.values.assign(static_cast<size_t>(M) + 1, 0.0);

    for (int m = 0; m <= levels; ++m) {
        const double scale = std::exp2(-static_cast<double>(m) * gamma * r);
        double log_tp;
        const long long pm_exact = (m < 62) ? (static_cast<long long>(p) << m) : -1;
        if (pm_exact > 0 && pm_exact <= M)
            log_tp = std::log(mesh.node(static_cast<int>(pm_exact)));
        else
            log_tp = log_anchor_time(m);
        const double ramp = std::exp(-(beta + 1.0) * log_tp);
        for (int j = 1; j <= M; ++j) {
            const double t = mesh.node(j);
            profile.values[static_cast<size_t>(j)] +=
                scale * std::min(t * ramp, std::pow(t, -beta));
        }
    }
    return profile;
}

EnvelopeProfile stability_envelope(const TemporalMesh& mesh, double alpha, double gamma)
{
    require_alpha(alpha);
    const double tau = mesh.first_step();

    EnvelopeProfile env;
    env.kind = EnvelopeKind::Stability;
    env.alpha = alpha;
    env.parameter = gamma;
    env.values.assign(static_cast<size_t>(mesh.intervals()) + 1, 0.0);
    for (int j = 1; j <= mesh.intervals(); ++j) {
        const double t = mesh.node(j);
        double shape;
        if (gamma > 0.0)
            shape = 1.0;
        else if (gamma == 0.0)
            shape = 1.0 + std::log(t / tau);
        else
            shape = std::pow(tau / t, gamma);
        env.values[static_cast<size_t>(j)] = tau * std::pow(t, alpha - 1.0) * shape;
    }
    return env;
}

double empirical_stability_check(SchemeKind scheme, const TemporalMesh& mesh,
                                 double alpha, double gamma)
{
    const ConvolutionWeights weights(scheme, mesh, alpha);
    const EnvelopeProfile env = stability_envelope(mesh, alpha, gamma);
    const double tau = mesh.first_step();
    const int M = mesh.intervals();

    std::vector<double> v(static_cast<size_t>(M) + 1, 0.0);
    double worst = 0.0;
    for (int m = 1; m <= M; ++m) {
        const auto row = weights.row(m);
        double history = 0.0;
        for (int j = 0; j < m; ++j)
            history += row[static_cast<size_t>(j)] * v[static_cast<size_t>(j)];
        const double rhs = std::pow(tau / mesh.node(m), gamma + 1.0);
        v[static_cast<size_t>(m)] = (rhs - history) / row[static_cast<size_t>(m)];
        worst = std::max(worst, std::abs(v[static_cast<size_t>(m)])
                                    / env.values[static_cast<size_t>(m)]);
    }
    return worst;
}

EnvelopeProfile error_envelope(const TemporalMesh& mesh, double alpha, double r,
                               EnvelopeKind kind)
{
    require_alpha(alpha);
    if (kind == EnvelopeKind::Stability)
        throw std::invalid_argument("error_envelope: use stability_envelope for that kind");
    if (!(r >= 1.0))
        throw std::invalid_argument("grading exponent must be at least 1");

    const double p = (kind == EnvelopeKind::L1Error) ? 2.0 - alpha : 3.0 - alpha;
    const double M = static_cast<double>(mesh.intervals());
    const double order_r = std::pow(M, -r);
    const double order_p = std::pow(M, -p);
    const double t1 = mesh.first_step();
    const bool parabolic = kind == EnvelopeKind::AlikhanovParabolicError;
    const bool spatial_tail = parabolic && (2.0 / r < alpha + 1.0);

    EnvelopeProfile env;
    env.kind = kind;
    env.alpha = alpha;
    env.parameter = r;
    env.values.assign(static_cast<size_t>(mesh.intervals()) + 1, 0.0);
    for (int m = 1; m <= mesh.intervals(); ++m) {
        const double t = mesh.node(m);
        double value;
        if (r < p)
            value = order_r * std::pow(t, alpha - 1.0);
        else if (r == p)
            value = order_p * std::pow(t, alpha - 1.0) * (1.0 + std::log(t / t1));
        else
            value = order_p * std::pow(t, alpha - p / r);
        if (spatial_tail)
            value += std::pow(M, -2.0) * std::pow(t, 2.0 * alpha - 2.0 / r);
        env.values[static_cast<size_t>(m)] = value;
    }
    return env;
}

void dump_levels_csv(const TemporalMesh& mesh, std::span<const double> values,
                     std::ostream& os)
{
    if (values.size() != static_cast<size_t>(mesh.intervals()) + 1)
        throw std::invalid_argument("profile length does not match mesh");
    os << "j,t,value\n";
    char line[96];
    for (size_t j = 0; j < values.size(); ++j) {
        std::snprintf(line, sizeof line, "%zu,%.9e,%.9e\n", j,
                      mesh.node(static_cast<int>(j)), values[j]);
        os << line;
    }
}

} // namespace subdiff
