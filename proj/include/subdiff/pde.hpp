#pragma once

#include "subdiff/caputo_operators.hpp"
#include "subdiff/temporal_mesh.hpp"

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace subdiff {

using SpaceTimeFn = std::function<double(double x, double y, double t)>;
using SpaceFn = std::function<double(double x, double y)>;

/// Uniform tensor-product grid on the square (0, edge)^2 with N intervals per
/// direction; node (i, k) sits at (i*h, k*h). Unknowns live at the (N-1)^2
/// interior nodes, flattened row by row.
class SpatialGrid2D {
public:
    SpatialGrid2D(double edge, int intervals);

    double edge() const { return edge_; }
    int intervals() const { return n_; }
    double spacing() const { return h_; }
    int interior_count() const { return (n_ - 1) * (n_ - 1); }
    int index(int i, int k) const { return (i - 1) + (k - 1) * (n_ - 1); }

private:
    double edge_;
    int n_;
    double h_;
};

/// Coefficient functions of the elliptic part: two diffusion coefficients
/// (positive on the closed domain), optional convection and reaction, and
/// Dirichlet boundary data. Missing functions mean identically zero.
/// The theory additionally wants c >= 0 (or the convection-adjusted variant);
/// that is the caller's responsibility and is not checked here.
struct SpatialOperatorSpec {
    SpaceTimeFn diffusion_x;
    SpaceTimeFn diffusion_y;
    SpaceTimeFn convection_x;
    SpaceTimeFn convection_y;
    SpaceTimeFn reaction;
    SpaceTimeFn boundary;
};

/// Five-point stencil frozen at one time: conservative second differences with
/// midpoint diffusion samples, central convection, reaction on the diagonal.
/// Dirichlet rows are eliminated; their contribution enters through
/// add_boundary_terms. apply() is allocation-free so Krylov loops stay cheap.
class SpatialOperator {
public:
    SpatialOperator(const SpatialGrid2D& grid, const SpatialOperatorSpec& spec,
                    double t);

    /// out = L_h * in for interior vectors, boundary taken as zero.
    void apply(std::span<const double> in, std::span<double> out) const;

    /// Adds scale times the stencil's reach onto boundary nodes, with the
    /// Dirichlet data evaluated at time t_boundary. Pass a negative scale to
    /// move the terms to a right-hand side.
    void add_boundary_terms(std::span<double> out, double t_boundary,
                            double scale) const;

    /// True when every sampled convection value was exactly zero, making the
    /// stencil symmetric.
    bool convection_free() const { return convection_free_; }
    /// False when some off-diagonal entry came out positive, i.e. the step
    /// size is too coarse for the discrete maximum principle.
    bool dmp_ok() const { return dmp_ok_; }

    const SpatialGrid2D& grid() const { return grid_; }

private:
    SpatialGrid2D grid_;
    SpaceTimeFn boundary_;
    std::vector<double> diag_, west_, east_, south_, north_;
    bool convection_free_ = true;
    bool dmp_ok_ = true;
};

SpatialOperator assemble_spatial_operator(const SpatialGrid2D& grid,
                                          const SpatialOperatorSpec& spec, double t);

struct LevelStats {
    int iterations = 0;
    double residual = 0.0; ///< achieved relative residual
    bool used_cg = false;
};

struct PdeSolution {
    SpatialGrid2D grid;
    TemporalMesh mesh;
    std::vector<std::vector<double>> interior; ///< per level, (N-1)^2 values
    std::vector<LevelStats> stats;             ///< per level, [0] unused
    SpaceTimeFn boundary;                      ///< Dirichlet data for dumps
    bool dmp_warning = false;
};

/// Marches the fractional-parabolic problem through the triangular time
/// recurrence, solving one elliptic system per level: conjugate gradients
/// when the stencil is symmetric, a stabilized bi-conjugate method otherwise,
/// to 1e-10 relative residual with the previous level as the initial guess.
PdeSolution solve_parabolic(SchemeKind scheme, double alpha,
                            const TemporalMesh& mesh, const SpatialGrid2D& grid,
                            const SpatialOperatorSpec& spec,
                            const SpaceTimeFn& forcing, const SpaceFn& initial);

/// Max nodal difference between a run and one with doubled temporal (and
/// optionally doubled spatial) resolution at the given coarse time levels
/// (default: final time only). Meshes must nest exactly.
double two_mesh_error(const PdeSolution& coarse, const PdeSolution& fine,
                      std::span<const int> levels = {});

/// Max interior nodal deviation from a reference field at one time level.
double max_nodal_error(const PdeSolution& solution, int level,
                       const SpaceFn& reference);

/// CSV rows `i,k,x,y,U` over the full grid including boundary nodes.
void dump_field_csv(const PdeSolution& solution, int level, std::ostream& os);

} // namespace subdiff
