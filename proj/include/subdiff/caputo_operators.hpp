#pragma once

#include "subdiff/temporal_mesh.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace subdiff {

enum class SchemeKind { L1, Alikhanov };

/// Lower-triangular convolution weights kappa_{m,j} such that the discrete
/// Caputo derivative of order alpha at level m is sum_j kappa_{m,j} U^j.
///
/// L1 interpolates the history piecewise linearly and evaluates at t_m;
/// the Alikhanov variant interpolates with three-point quadratics (linearly
/// on the last piece) and evaluates at t*_m = t_m - (alpha/2) tau_m.
/// Rows are materialized on demand in O(m); nothing is cached, so row
/// requests from different threads are safe.
class ConvolutionWeights {
public:
    ConvolutionWeights(SchemeKind scheme, TemporalMesh mesh, double alpha);

    SchemeKind scheme() const { return scheme_; }
    double alpha() const { return alpha_; }
    const TemporalMesh& mesh() const { return mesh_; }

    /// Evaluation time of row m: t_m for L1, t*_m for Alikhanov.
    double eval_time(int m) const;

    /// Weights kappa_{m,0..m} for 1 <= m <= M.
    std::vector<double> row(int m) const;

    /// CSV rows `m,j,kappa` for all rows (debug dump).
    void dump_csv(std::ostream& os) const;

private:
    std::vector<double> l1_row(int m) const;
    std::vector<double> alikhanov_row(int m) const;

    TemporalMesh mesh_;
    double alpha_;
    SchemeKind scheme_;
};

ConvolutionWeights l1_weights(const TemporalMesh& mesh, double alpha);
ConvolutionWeights alikhanov_weights(const TemporalMesh& mesh, double alpha);

/// sum_j kappa_{m,j} history[j], summed left to right for reproducibility.
double apply_operator(const ConvolutionWeights& weights,
                      std::span<const double> history, int m);

/// Caputo derivative of t^gamma: Gamma(gamma+1)/Gamma(gamma+1-alpha) * t^{gamma-alpha}.
double analytic_caputo_monomial(double gamma, double alpha, double t);

/// Outcome of scanning all rows for the M-matrix sign pattern
/// (kappa_{m,m} > 0, kappa_{m,j} <= 0 for j < m, within a relative tolerance).
struct MMatrixReport {
    bool pass = true;
    int row = -1;                ///< first violating row, -1 if none
    int col = -1;                ///< first violating column, -1 if none
    double violation = 0.0;      ///< offending weight value
};

MMatrixReport mmatrix_check(const ConvolutionWeights& weights);

namespace detail {

/// w^q - (w-d)^q for 0 < d <= w, evaluated without subtractive cancellation.
double pow_diff(double w, double d, double q);

/// First moment of the kernel over a step: integral_0^d v (w-v)^{-alpha} dv,
/// 0 < d <= w. Series evaluation when d << w, closed form otherwise.
double kernel_first_moment(double w, double d, double alpha);

} // namespace detail

} // namespace subdiff
