#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace subdiff {

/// Strictly increasing time grid 0 = t_0 < t_1 < ... < t_M = T.
///
/// When built by build_graded_mesh the grading exponent is recorded and the
/// nodes are exactly the floating-point evaluations of T*(j/M)^r, so nodes of
/// an M-interval grid coincide bitwise with the even nodes of the 2M-interval
/// grid with the same T and r.
class TemporalMesh {
public:
    /// Takes ownership of a node sequence; validates t_0 = 0 and strict growth.
    explicit TemporalMesh(std::vector<double> nodes,
                          std::optional<double> grading = std::nullopt);

    int intervals() const { return static_cast<int>(nodes_.size()) - 1; }
    double horizon() const { return nodes_.back(); }
    double node(int j) const { return nodes_[static_cast<size_t>(j)]; }
    /// tau_j = t_j - t_{j-1} for 1 <= j <= M.
    double step(int j) const
    {
        return nodes_[static_cast<size_t>(j)] - nodes_[static_cast<size_t>(j) - 1];
    }
    /// tau = t_1, the first (smallest, for graded meshes) step.
    double first_step() const { return nodes_[1]; }
    std::span<const double> nodes() const { return nodes_; }
    /// Grading exponent if the mesh was built graded; cleared by refinement.
    std::optional<double> grading() const { return grading_; }

    /// CSV rows `j,t,tau` (tau empty for j = 0).
    void dump_csv(std::ostream& os) const;

private:
    std::vector<double> nodes_;
    std::optional<double> grading_;
};

/// Mesh-quality report relative to a target grading exponent r.
struct MeshDiagnostics {
    /// Exponent inferred from the first step: log(T/tau)/log(M).
    double r_estimate = 1.0;
    /// Tightest constants with c_lower <= tau_j / (tau^{1/r} t_j^{1-1/r}) <= c_upper.
    double c_lower = 0.0;
    double c_upper = 0.0;
    /// rho_j = tau_{j+1}/tau_j for j = 1..M-1 (element [j-1]).
    std::vector<double> ratio_sequence;
    /// First step, node growth, and step density all within the [1/8, 8] band.
    bool satisfies_quasi_graded = false;
    /// 0.4656 <= rho_j <= rho_{j-1} for all j >= 2.
    bool satisfies_alikhanov_condition_a = false;
    /// rho_j >= 4/7 for all j >= 2.
    bool satisfies_alikhanov_condition_b = false;
};

/// Nodes t_j = T*(j/M)^r concentrating intervals near t = 0.
TemporalMesh build_graded_mesh(double T, int M, double r);

MeshDiagnostics diagnose_mesh(const TemporalMesh& mesh, double r);

/// New mesh with extra nodes inserted; every extra node must lie strictly
/// inside (t_1, T) so the first interval is preserved. Grading record cleared.
TemporalMesh refine_mesh(const TemporalMesh& mesh, std::span<const double> extra_nodes);

/// Deterministic extraction for a fixed constant C: keeps t_1, then for
/// k = 2, 3, ... the first node >= T*(Ck/M)^r, and finally T itself.
TemporalMesh extract_quasi_graded_submesh(const TemporalMesh& mesh, double r, double C);

/// Scans C over the geometric grid {1, 1.25, 1.5625, ...} up to 64 and returns
/// the first extraction that passes diagnose_mesh; throws if none does.
TemporalMesh extract_quasi_graded_submesh(const TemporalMesh& mesh, double r);

} // namespace subdiff
