#include "subdiff/caputo_operators.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace subdiff {

namespace detail {

double pow_diff(double w, double d, double q)
{
    if (d >= w)
        return std::pow(w, q);
    // w^q (1 - (1 - d/w)^q) with the bracket via expm1/log1p: exact to
    // rounding even when d/w underflows the direct difference.
    return -std::pow(w, q) * std::expm1(q * std::log1p(-d / w));
}

double kernel_first_moment(double w, double d, double alpha)
{
    const double x = d / w;
    if (x > 0.5) {
        const double head = pow_diff(w, d, 2.0 - alpha) / (2.0 - alpha);
        const double tail = d * std::pow(w - d, 1.0 - alpha);
        return (head - tail) / (1.0 - alpha);
    }
    // (w-v)^{-alpha} = w^{-alpha} sum_k c_k (v/w)^k termwise-integrated against v.
    double sum = 0.0;
    double c = 1.0;
    double xp = 1.0;
    for (int k = 0; k < 400; ++k) {
        const double term = c * xp / (k + 2);
        sum += term;
        if (term < 1e-17 * sum)
            break;
        c *= (alpha + k) / (k + 1);
        xp *= x;
    }
    return sum * d * d * std::pow(w, -alpha);
}

} // namespace detail

ConvolutionWeights::ConvolutionWeights(SchemeKind scheme, TemporalMesh mesh, double alpha)
    : mesh_(std::move(mesh)), alpha_(alpha), scheme_(scheme)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("fractional order must lie in (0,1)");
}

double ConvolutionWeights::eval_time(int m) const
{
    if (scheme_ == SchemeKind::L1)
        return mesh_.node(m);
    return mesh_.node(m) - 0.5 * alpha_ * mesh_.step(m);
}

std::vector<double> ConvolutionWeights::row(int m) const
{
    if (m < 1 || m > mesh_.intervals())
        throw std::out_of_range("weight row index outside 1..M");
    return scheme_ == SchemeKind::L1 ? l1_row(m) : alikhanov_row(m);
}

std::vector<double> ConvolutionWeights::l1_row(int m) const
{
    // b_j = integral mean of (t_m - s)^{-alpha} over (t_{j-1}, t_j), scaled by
    // 1/Gamma(1-alpha); regrouping the piecewise-linear history by U^j gives
    // kappa_{m,j} as consecutive differences of b.
    const double tm = mesh_.node(m);
    const double scale = std::tgamma(2.0 - alpha_); // (1-alpha) Gamma(1-alpha)
    std::vector<double> b(static_cast<size_t>(m) + 1);
    for (int j = 1; j <= m; ++j) {
        const double tau = mesh_.step(j);
        b[static_cast<size_t>(j)] =
            detail::pow_diff(tm - mesh_.node(j - 1), tau, 1.0 - alpha_) / (scale * tau);
    }
    std::vector<double> kappa(static_cast<size_t>(m) + 1);
    kappa[0] = -b[1];
    for (int j = 1; j < m; ++j)
        kappa[static_cast<size_t>(j)] = b[static_cast<size_t>(j)] - b[static_cast<size_t>(j) + 1];
    kappa[static_cast<size_t>(m)] = b[static_cast<size_t>(m)];
    return kappa;
}

std::vector<double> ConvolutionWeights::alikhanov_row(int m) const
{
    const double g1 = std::tgamma(1.0 - alpha_);
    const double theta = eval_time(m);
    std::vector<double> kappa(static_cast<size_t>(m) + 1, 0.0);

    // Linear piece on (t_{m-1}, t*_m).
    {
        const double span = theta - mesh_.node(m - 1); // (1 - alpha/2) tau_m
        const double d = std::pow(span, 1.0 - alpha_) /
                         ((1.0 - alpha_) * g1 * mesh_.step(m));
        kappa[static_cast<size_t>(m)] += d;
        kappa[static_cast<size_t>(m) - 1] -= d;
    }

    // Quadratic pieces through (t_{i-1}, t_i, t_{i+1}) on (t_{i-1}, t_i).
    // With u = s - t_{i-1} the derivative of the Lagrange basis at node y is
    // (2u + e)/D where e = 2 t_{i-1} - (other two nodes) and D is the usual
    // denominator; both are exact combinations of tau_i and tau_{i+1}.
    for (int i = 1; i < m; ++i) {
        const double tau_i = mesh_.step(i);
        const double tau_n = mesh_.step(i + 1);
        const double w1 = theta - mesh_.node(i - 1);
        const double j0 = detail::pow_diff(w1, tau_i, 1.0 - alpha_) / (1.0 - alpha_);
        const double k1 = detail::kernel_first_moment(w1, tau_i, alpha_);

        const double d0 = tau_i * (tau_i + tau_n);
        const double d1 = -tau_i * tau_n;
        const double d2 = (tau_i + tau_n) * tau_n;
        const double e0 = -(2.0 * tau_i + tau_n);
        const double e1 = -(tau_i + tau_n);
        const double e2 = -tau_i;

        kappa[static_cast<size_t>(i) - 1] += (2.0 * k1 + e0 * j0) / (d0 * g1);
        kappa[static_cast<size_t>(i)] += (2.0 * k1 + e1 * j0) / (d1 * g1);
        kappa[static_cast<size_t>(i) + 1] += (2.0 * k1 + e2 * j0) / (d2 * g1);
    }
    return kappa;
}

void ConvolutionWeights::dump_csv(std::ostream& os) const
{
    char line[64];
    os << "m,j,kappa\n";
    for (int m = 1; m <= mesh_.intervals(); ++m) {
        const auto kappa = row(m);
        for (int j = 0; j <= m; ++j) {
            std::snprintf(line, sizeof line, "%d,%d,%.9e\n", m, j,
                          kappa[static_cast<size_t>(j)]);
            os << line;
        }
    }
}

ConvolutionWeights l1_weights(const TemporalMesh& mesh, double alpha)
{
    return ConvolutionWeights(SchemeKind::L1, mesh, alpha);
}

ConvolutionWeights alikhanov_weights(const TemporalMesh& mesh, double alpha)
{
    return ConvolutionWeights(SchemeKind::Alikhanov, mesh, alpha);
}

double apply_operator(const ConvolutionWeights& weights,
                      std::span<const double> history, int m)
{
    if (history.size() != static_cast<size_t>(m) + 1)
        throw std::invalid_argument("history length must be m + 1");
    const auto kappa = weights.row(m);
    double sum = 0.0;
    for (size_t j = 0; j < kappa.size(); ++j)
        sum += kappa[j] * history[j];
    return sum;
}

double analytic_caputo_monomial(double gamma, double alpha, double t)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("fractional order must lie in (0,1)");
    if (gamma <= 0.0)
        throw std::invalid_argument("monomial exponent must be positive");
    return std::tgamma(gamma + 1.0) / std::tgamma(gamma + 1.0 - alpha) *
           std::pow(t, gamma - alpha);
}

MMatrixReport mmatrix_check(const ConvolutionWeights& weights)
{
    MMatrixReport report;
    for (int m = 1; m <= weights.mesh().intervals(); ++m) {
        const auto kappa = weights.row(m);
        double magnitude = 0.0;
        for (double k : kappa)
            magnitude = std::max(magnitude, std::abs(k));
        const double tol = 1e-13 * magnitude;
        for (int j = 0; j < m; ++j) {
            if (kappa[static_cast<size_t>(j)] > tol) {
                report.pass = false;
                report.row = m;
                report.col = j;
                report.violation = kappa[static_cast<size_t>(j)];
                return report;
            }
        }
        if (!(kappa[static_cast<size_t>(m)] > 0.0)) {
            report.pass = false;
            report.row = m;
            report.col = m;
            report.violation = kappa[static_cast<size_t>(m)];
            return report;
        }
    }
    return report;
}

} // namespace subdiff
