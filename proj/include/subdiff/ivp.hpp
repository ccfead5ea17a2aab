#pragma once

#include "subdiff/caputo_operators.hpp"
#include "subdiff/temporal_mesh.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace subdiff {

/// One term c * t^e of a power sum.
struct MonomialTerm {
    double coefficient = 0.0;
    double exponent = 0.0;
};

/// Finite sum of real-power monomials. Covers every test solution used here
/// (t^alpha, polynomials, mixtures) with exact derivatives and an exact
/// fractional derivative assembled term by term.
class PowerSum {
public:
    explicit PowerSum(std::vector<MonomialTerm> terms);

    double value(double t) const;
    /// d^order/dt^order via falling factorials; integer exponents annihilate
    /// cleanly once the order exceeds them.
    double derivative(int order, double t) const;
    /// Exact fractional derivative of order alpha in (0,1); constant terms
    /// contribute zero, negative exponents are rejected.
    double caputo(double alpha, double t) const;

    const std::vector<MonomialTerm>& terms() const { return terms_; }

private:
    std::vector<MonomialTerm> terms_;
};

/// Scalar problem: fractional derivative of u equals f(t), u(0) given.
struct IvpProblem {
    double alpha = 0.5;
    double initial_value = 0.0;
    std::function<double(double)> forcing;
    /// When set, solvers validate that the exact fractional derivative matches
    /// the forcing at sampled nodes (and the initial value at t = 0).
    std::optional<PowerSum> exact;
};

/// Forward substitution through the triangular convolution system; returns
/// U^0..U^M. Cost O(M^2).
std::vector<double> solve_ivp(SchemeKind scheme, const TemporalMesh& mesh,
                              const IvpProblem& problem);

/// Per-level truncation residuals of the discrete operator applied to the
/// exact solution, together with the regularity weights and the worst ratio
/// against the predicted decay shape.
struct TruncationReport {
    std::vector<double> residuals;           ///< r^m, index 0 unused
    std::vector<double> regularity_weights;  ///< psi^j, index 0 unused
    double bound_ratio = 0.0;
};

TruncationReport truncation_report(SchemeKind scheme, const TemporalMesh& mesh,
                                   const IvpProblem& problem);

/// CSV rows `m,t,U,exact,error`; the last two columns are empty when the
/// problem has no exact solution attached.
void dump_solution_csv(const TemporalMesh& mesh, std::span<const double> u,
                       const IvpProblem& problem, std::ostream& os);

} // namespace subdiff
