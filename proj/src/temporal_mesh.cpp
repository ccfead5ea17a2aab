#include "subdiff/temporal_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace subdiff {

namespace {

constexpr double kBandLow = 0.125; // quasi-graded comparison band [1/8, 8]
constexpr double kBandHigh = 8.0;
constexpr double kConditionAFloor = 0.4656;

bool in_band(double x)
{
    return x >= kBandLow && x <= kBandHigh;
}

} // namespace

TemporalMesh::TemporalMesh(std::vector<double> nodes, std::optional<double> grading)
    : nodes_(std::move(nodes)), grading_(grading)
{
    if (nodes_.size() < 2)
        throw std::invalid_argument("temporal mesh needs at least one interval");
    if (nodes_.front() != 0.0)
        throw std::invalid_argument("temporal mesh must start at t = 0");
    for (size_t j = 1; j < nodes_.size(); ++j) {
        if (!std::isfinite(nodes_[j]) || nodes_[j] <= nodes_[j - 1])
            throw std::invalid_argument("temporal mesh nodes must increase strictly");
    }
}

void TemporalMesh::dump_csv(std::ostream& os) const
{
    char line[96];
    os << "j,t,tau\n";
    for (size_t j = 0; j < nodes_.size(); ++j) {
        if (j == 0) {
            std::snprintf(line, sizeof line, "0,%.9e,\n", nodes_[0]);
        } else {
            std::snprintf(line, sizeof line, "%zu,%.9e,%.9e\n", j, nodes_[j],
                          nodes_[j] - nodes_[j - 1]);
        }
        os << line;
    }
}

TemporalMesh build_graded_mesh(double T, int M, double r)
{
    if (T <= 0.0)
        throw std::invalid_argument("graded mesh: horizon must be positive");
    if (M < 1)
        throw std::invalid_argument("graded mesh: need at least one interval");
    if (r < 1.0)
        throw std::invalid_argument("graded mesh: grading exponent must be >= 1");
    std::vector<double> nodes(static_cast<size_t>(M) + 1);
    for (int j = 0; j <= M; ++j)
        nodes[static_cast<size_t>(j)] = T * std::pow(static_cast<double>(j) / M, r);
    return TemporalMesh(std::move(nodes), r);
}

MeshDiagnostics diagnose_mesh(const TemporalMesh& mesh, double r)
{
    if (r < 1.0)
        throw std::invalid_argument("diagnose_mesh: grading exponent must be >= 1");
    const int M = mesh.intervals();
    const double T = mesh.horizon();
    const double tau = mesh.first_step();

    MeshDiagnostics d;
    d.r_estimate = M >= 2 ? std::log(T / tau) / std::log(static_cast<double>(M)) : 1.0;

    d.ratio_sequence.reserve(static_cast<size_t>(std::max(M - 1, 0)));
    for (int j = 1; j < M; ++j)
        d.ratio_sequence.push_back(mesh.step(j + 1) / mesh.step(j));

    // Tightest constants in tau_j ~ tau^{1/r} t_j^{1-1/r}.
    d.c_lower = d.c_upper = 1.0; // j = 1 gives exactly 1
    bool growth_ok = true;
    const double tau_root = std::pow(tau, 1.0 / r);
    for (int j = 1; j <= M; ++j) {
        const double tj = mesh.node(j);
        const double density = mesh.step(j) / (tau_root * std::pow(tj, 1.0 - 1.0 / r));
        d.c_lower = std::min(d.c_lower, density);
        d.c_upper = std::max(d.c_upper, density);
        growth_ok = growth_ok && in_band(tj / (tau * std::pow(static_cast<double>(j), r)));
    }
    const bool first_step_ok = in_band(tau * std::pow(static_cast<double>(M), r) / T);
    d.satisfies_quasi_graded =
        first_step_ok && growth_ok && in_band(d.c_lower) && in_band(d.c_upper);

    d.satisfies_alikhanov_condition_a = true;
    d.satisfies_alikhanov_condition_b = true;
    for (size_t i = 1; i < d.ratio_sequence.size(); ++i) {
        const double rho = d.ratio_sequence[i];
        if (rho < kConditionAFloor || rho > d.ratio_sequence[i - 1])
            d.satisfies_alikhanov_condition_a = false;
        if (rho < 4.0 / 7.0)
            d.satisfies_alikhanov_condition_b = false;
    }
    return d;
}

TemporalMesh refine_mesh(const TemporalMesh& mesh, std::span<const double> extra_nodes)
{
    std::vector<double> extra(extra_nodes.begin(), extra_nodes.end());
    std::sort(extra.begin(), extra.end());
    for (size_t i = 0; i < extra.size(); ++i) {
        if (extra[i] <= mesh.first_step() || extra[i] >= mesh.horizon())
            throw std::invalid_argument(
                "refine_mesh: extra nodes must lie strictly inside (t_1, T)");
        if (i > 0 && extra[i] == extra[i - 1])
            throw std::invalid_argument("refine_mesh: duplicate extra node");
    }
    std::vector<double> merged;
    merged.reserve(mesh.nodes().size() + extra.size());
    std::merge(mesh.nodes().begin(), mesh.nodes().end(), extra.begin(), extra.end(),
               std::back_inserter(merged));
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    return TemporalMesh(std::move(merged));
}

TemporalMesh extract_quasi_graded_submesh(const TemporalMesh& mesh, double r, double C)
{
    if (C <= 0.0)
        throw std::invalid_argument("submesh extraction: C must be positive");
    const int M = mesh.intervals();
    const double T = mesh.horizon();
    const auto nodes = mesh.nodes();

    std::vector<double> picked{0.0, mesh.first_step()};
    for (int k = 2;; ++k) {
        if (C * k >= static_cast<double>(M))
            break;
        const double target = T * std::pow(C * k / M, r);
        auto it = std::lower_bound(nodes.begin(), nodes.end(), target);
        if (it == nodes.end() || *it >= T)
            break;
        if (*it > picked.back())
            picked.push_back(*it);
    }
    if (picked.back() < T)
        picked.push_back(T);
    return TemporalMesh(std::move(picked));
}

TemporalMesh extract_quasi_graded_submesh(const TemporalMesh& mesh, double r)
{
    // The input must satisfy the weaker grading condition for r: first step
    // comparable to T*M^{-r} and step density bounded above. Otherwise no
    // extraction can help (t_1 is always kept).
    const double tau_scaled =
        mesh.first_step() * std::pow(static_cast<double>(mesh.intervals()), r) /
        mesh.horizon();
    if (!in_band(tau_scaled) || diagnose_mesh(mesh, r).c_upper > kBandHigh)
        throw std::runtime_error(
            "submesh extraction: input violates the weaker grading condition");
    for (double C = 1.0; C <= 64.0; C *= 1.25) {
        TemporalMesh candidate = extract_quasi_graded_submesh(mesh, r, C);
        if (diagnose_mesh(candidate, r).satisfies_quasi_graded)
            return candidate;
    }
    throw std::runtime_error(
        "submesh extraction: no C in [1, 64] yields a quasi-graded submesh");
}

} // namespace subdiff
