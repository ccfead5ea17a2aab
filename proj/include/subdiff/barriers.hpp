#pragma once

#include "subdiff/caputo_operators.hpp"
#include "subdiff/temporal_mesh.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace subdiff {

/// Discrete comparison function B^j = min{(t_j/t_p) t_p^{-beta}, t_j^{-beta}},
/// beta = 1 - alpha: linear ramp up to the anchor index p, then the pure
/// power decay. Stacked variants sum scaled copies with anchors p_m = 2^m p.
struct BarrierProfile {
    double alpha = 0.0;
    double beta = 0.0;
    int anchor = 0;
    std::optional<double> gamma;    ///< only set for stacked barriers
    int stack_levels = 0;           ///< highest retained stack index N
    std::vector<double> values;     ///< B^j for j = 0..M
};

enum class EnvelopeKind { Stability, L1Error, AlikhanovError, AlikhanovParabolicError };

/// Per-level theoretical bound profile; parameter is gamma for the stability
/// kind and the grading exponent r for the error kinds.
struct EnvelopeProfile {
    EnvelopeKind kind = EnvelopeKind::Stability;
    double alpha = 0.0;
    double parameter = 0.0;
    std::vector<double> values;     ///< index 0 unused (0)
};

BarrierProfile build_barrier(const TemporalMesh& mesh, double alpha, int p);

/// min over j >= 1 of [discrete operator applied to the barrier at level j]
/// divided by tau^alpha t_j^{-alpha-1}. Positive return certifies that the
/// barrier dominates the worst-case local truncation shape.
double verify_barrier_bound(const TemporalMesh& mesh, double alpha, int p,
                            SchemeKind scheme);

/// Stack B-bar^j = sum_m c_m B_m^j with p_m = 2^m p and c_m = 2^{-m gamma r}.
/// gamma in (0, alpha): the stack is truncated once c_m < 1e-16 (anchors
/// beyond the mesh use the graded extension of the node formula).
/// gamma in [alpha-1, 0]: N = ceil(log2(n_stop/p) - 1) levels; fails if the
/// top anchor p_N exceeds M.
BarrierProfile build_stacked_barrier(const TemporalMesh& mesh, double alpha,
                                     double gamma, int p, int n_stop);

EnvelopeProfile stability_envelope(const TemporalMesh& mesh, double alpha, double gamma);

/// Solves the discrete problem with right-hand side (tau/t_j)^{gamma+1} and
/// zero initial value by forward substitution, then reports the worst ratio
/// |V^j| / envelope over j >= 1.
double empirical_stability_check(SchemeKind scheme, const TemporalMesh& mesh,
                                 double alpha, double gamma);

EnvelopeProfile error_envelope(const TemporalMesh& mesh, double alpha, double r,
                               EnvelopeKind kind);

/// CSV rows `j,t,value` for any per-level profile.
void dump_levels_csv(const TemporalMesh& mesh, std::span<const double> values,
                     std::ostream& os);

} // namespace subdiff
