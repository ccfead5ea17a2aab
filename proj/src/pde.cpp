#include "subdiff/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace subdiff {

namespace {

double dot(std::span<const double> a, std::span<const double> b)
{
    double sum = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        sum += a[i] * b[i];
    return sum;
}

double norm(std::span<const double> a)
{
    return std::sqrt(dot(a, a));
}

[[noreturn]] void solver_failure(const char* method, int level, int iterations,
                                 double relative_residual)
{
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "%s stalled at time level %d: relative residual %.3e after %d iterations",
                  method, level, relative_residual, iterations);
    throw std::runtime_error(msg);
}

template <typename ApplyFn>
LevelStats cg_solve(ApplyFn&& apply_matrix, std::span<const double> b,
                    std::vector<double>& x, double rel_tol, int cap, int level)
{
    const size_t n = b.size();
    LevelStats stats;
    stats.used_cg = true;

    const double b_norm = norm(b);
    if (b_norm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return stats;
    }

    std::vector<double> r(n), p(n), ap(n);
    apply_matrix(x, r);
    for (size_t i = 0; i < n; ++i)
        r[i] = b[i] - r[i];
    double rr = dot(r, r);
    if (std::sqrt(rr) <= rel_tol * b_norm) {
        stats.residual = std::sqrt(rr) / b_norm;
        return stats;
    }
    p = r;

    for (int iter = 1; iter <= cap; ++iter) {
        apply_matrix(p, ap);
        const double step = rr / dot(p, ap);
        for (size_t i = 0; i < n; ++i) {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        const double rr_next = dot(r, r);
        if (std::sqrt(rr_next) <= rel_tol * b_norm) {
            stats.iterations = iter;
            stats.residual = std::sqrt(rr_next) / b_norm;
            return stats;
        }
        const double mix = rr_next / rr;
        for (size_t i = 0; i < n; ++i)
            p[i] = r[i] + mix * p[i];
        rr = rr_next;
    }
    solver_failure("conjugate gradients", level, cap, std::sqrt(rr) / b_norm);
}

template <typename ApplyFn>
LevelStats bicgstab_solve(ApplyFn&& apply_matrix, std::span<const double> b,
                          std::vector<double>& x, double rel_tol, int cap, int level)
{
    const size_t n = b.size();
    LevelStats stats;

    const double b_norm = norm(b);
    if (b_norm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return stats;
    }

    std::vector<double> r(n), r_shadow(n), p(n, 0.0), v(n, 0.0), s(n), t(n);
    apply_matrix(x, r);
    for (size_t i = 0; i < n; ++i)
        r[i] = b[i] - r[i];
    r_shadow = r;

    double rho = 1.0, alpha = 1.0, omega = 1.0;
    double res = norm(r);
    if (res <= rel_tol * b_norm) {
        stats.residual = res / b_norm;
        return stats;
    }

    for (int iter = 1; iter <= cap; ++iter) {
        const double rho_next = dot(r_shadow, r);
        if (rho_next == 0.0)
            solver_failure("bicgstab (rho breakdown)", level, iter, res / b_norm);
        const double beta = (rho_next / rho) * (alpha / omega);
        for (size_t i = 0; i < n; ++i)
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        apply_matrix(p, v);
        alpha = rho_next / dot(r_shadow, v);
        for (size_t i = 0; i < n; ++i)
            s[i] = r[i] - alpha * v[i];
        if (norm(s) <= rel_tol * b_norm) {
            for (size_t i = 0; i < n; ++i)
                x[i] += alpha * p[i];
            stats.iterations = iter;
            stats.residual = norm(s) / b_norm;
            return stats;
        }
        apply_matrix(s, t);
        const double tt = dot(t, t);
        if (tt == 0.0)
            solver_failure("bicgstab (t breakdown)", level, iter, res / b_norm);
        omega = dot(t, s) / tt;
        if (omega == 0.0)
            solver_failure("bicgstab (omega breakdown)", level, iter, res / b_norm);
        for (size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(r);
        if (res <= rel_tol * b_norm) {
            stats.iterations = iter;
            stats.residual = res / b_norm;
            return stats;
        }
        rho = rho_next;
    }
    solver_failure("bicgstab", level, cap, res / b_norm);
}

double eval_or_zero(const SpaceTimeFn& f, double x, double y, double t)
{
    return f ? f(x, y, t) : 0.0;
}

} // namespace

SpatialGrid2D::SpatialGrid2D(double edge, int intervals) : edge_(edge), n_(intervals)
{
    if (!(edge > 0.0))
        throw std::invalid_argument("grid edge length must be positive");
    if (intervals < 2)
        throw std::invalid_argument("grid needs at least two intervals per direction");
    h_ = edge_ / n_;
}

SpatialOperator::SpatialOperator(const SpatialGrid2D& grid,
                                 const SpatialOperatorSpec& spec, double t)
    : grid_(grid), boundary_(spec.boundary)
{
    if (!spec.diffusion_x || !spec.diffusion_y)
        throw std::invalid_argument("both diffusion coefficients are required");

    const int n = grid_.intervals();
    const double h = grid_.spacing();
    const size_t count = static_cast<size_t>(grid_.interior_count());
    diag_.resize(count);
    west_.resize(count);
    east_.resize(count);
    south_.resize(count);
    north_.resize(count);

    const double inv_h2 = 1.0 / (h * h);
    const double inv_2h = 1.0 / (2.0 * h);
    for (int k = 1; k < n; ++k) {
        const double y = k * h;
        for (int i = 1; i < n; ++i) {
            const double x = i * h;
            const double aw = spec.diffusion_x(x - 0.5 * h, y, t);
            const double ae = spec.diffusion_x(x + 0.5 * h, y, t);
            const double as = spec.diffusion_y(x, y - 0.5 * h, t);
            const double an = spec.diffusion_y(x, y + 0.5 * h, t);
            if (!(aw > 0.0 && ae > 0.0 && as > 0.0 && an > 0.0))
                throw std::invalid_argument("diffusion coefficient not positive");
            const double bx = eval_or_zero(spec.convection_x, x, y, t);
            const double by = eval_or_zero(spec.convection_y, x, y, t);
            if (bx != 0.0 || by != 0.0)
                convection_free_ = false;

            const size_t idx = static_cast<size_t>(grid_.index(i, k));
            west_[idx] = -aw * inv_h2 - bx * inv_2h;
            east_[idx] = -ae * inv_h2 + bx * inv_2h;
            south_[idx] = -as * inv_h2 - by * inv_2h;
            north_[idx] = -an * inv_h2 + by * inv_2h;
            diag_[idx] = (aw + ae + as + an) * inv_h2
                         + eval_or_zero(spec.reaction, x, y, t);
            if (west_[idx] > 0.0 || east_[idx] > 0.0 || south_[idx] > 0.0
                || north_[idx] > 0.0)
                dmp_ok_ = false;
        }
    }
}

void SpatialOperator::apply(std::span<const double> in, std::span<double> out) const
{
    const int n = grid_.intervals();
    const int row = n - 1;
    for (int k = 1; k < n; ++k) {
        for (int i = 1; i < n; ++i) {
            const size_t idx = static_cast<size_t>(grid_.index(i, k));
            double sum = diag_[idx] * in[idx];
            if (i > 1)
                sum += west_[idx] * in[idx - 1];
            if (i < n - 1)
                sum += east_[idx] * in[idx + 1];
            if (k > 1)
                sum += south_[idx] * in[idx - static_cast<size_t>(row)];
            if (k < n - 1)
                sum += north_[idx] * in[idx + static_cast<size_t>(row)];
            out[idx] = sum;
        }
    }
}

void SpatialOperator::add_boundary_terms(std::span<double> out, double t_boundary,
                                         double scale) const
{
    if (!boundary_)
        return;
    const int n = grid_.intervals();
    const double h = grid_.spacing();
    const double edge = grid_.edge();
    for (int k = 1; k < n; ++k) {
        const double y = k * h;
        const size_t w = static_cast<size_t>(grid_.index(1, k));
        const size_t e = static_cast<size_t>(grid_.index(n - 1, k));
        out[w] += scale * west_[w] * boundary_(0.0, y, t_boundary);
        out[e] += scale * east_[e] * boundary_(edge, y, t_boundary);
    }
    for (int i = 1; i < n; ++i) {
        const double x = i * h;
        const size_t s = static_cast<size_t>(grid_.index(i, 1));
        const size_t t = static_cast<size_t>(grid_.index(i, n - 1));
        out[s] += scale * south_[s] * boundary_(x, 0.0, t_boundary);
        out[t] += scale * north_[t] * boundary_(x, edge, t_boundary);
    }
}

SpatialOperator assemble_spatial_operator(const SpatialGrid2D& grid,
                                          const SpatialOperatorSpec& spec, double t)
{
    return SpatialOperator(grid, spec, t);
}

PdeSolution solve_parabolic(SchemeKind scheme, double alpha,
                            const TemporalMesh& mesh, const SpatialGrid2D& grid,
                            const SpatialOperatorSpec& spec,
                            const SpaceTimeFn& forcing, const SpaceFn& initial)
{
    if (!forcing)
        throw std::invalid_argument("forcing term is required");
    if (!initial)
        throw std::invalid_argument("initial condition is required");

    const ConvolutionWeights weights(scheme, mesh, alpha);
    const int M = mesh.intervals();
    const int n = grid.intervals();
    const double h = grid.spacing();
    const size_t count = static_cast<size_t>(grid.interior_count());
    const double theta = (scheme == SchemeKind::L1) ? 1.0 : 1.0 - 0.5 * alpha;
    const double rel_tol = 1e-10;
    const int cap = 10 * n * n;

    PdeSolution solution{grid, mesh, {}, {}, spec.boundary, false};
    solution.interior.assign(static_cast<size_t>(M) + 1,
                             std::vector<double>(count, 0.0));
    solution.stats.assign(static_cast<size_t>(M) + 1, LevelStats{});

    for (int k = 1; k < n; ++k)
        for (int i = 1; i < n; ++i)
            solution.interior[0][static_cast<size_t>(grid.index(i, k))]
                = initial(i * h, k * h);

    std::vector<double> rhs(count), scratch(count);
    for (int m = 1; m <= M; ++m) {
        const double t_eval = weights.eval_time(m);
        const SpatialOperator op(grid, spec, t_eval);
        if (!op.dmp_ok())
            solution.dmp_warning = true;

        const auto row = weights.row(m);
        for (int k = 1; k < n; ++k)
            for (int i = 1; i < n; ++i)
                rhs[static_cast<size_t>(grid.index(i, k))]
                    = forcing(i * h, k * h, t_eval);
        for (int j = 0; j < m; ++j) {
            const double w = row[static_cast<size_t>(j)];
            const auto& level = solution.interior[static_cast<size_t>(j)];
            for (size_t idx = 0; idx < count; ++idx)
                rhs[idx] -= w * level[idx];
        }
        op.add_boundary_terms(rhs, mesh.node(m), -theta);
        if (scheme == SchemeKind::Alikhanov) {
            const double blend = 0.5 * alpha;
            op.apply(solution.interior[static_cast<size_t>(m) - 1], scratch);
            for (size_t idx = 0; idx < count; ++idx)
                rhs[idx] -= blend * scratch[idx];
            op.add_boundary_terms(rhs, mesh.node(m - 1), -blend);
        }

        const double kappa = row[static_cast<size_t>(m)];
        const auto apply_matrix = [&](std::span<const double> in,
                                      std::span<double> out) {
            op.apply(in, out);
            for (size_t idx = 0; idx < count; ++idx)
                out[idx] = kappa * in[idx] + theta * out[idx];
        };

        std::vector<double>& u = solution.interior[static_cast<size_t>(m)];
        u = solution.interior[static_cast<size_t>(m) - 1];
        solution.stats[static_cast<size_t>(m)]
            = op.convection_free()
                  ? cg_solve(apply_matrix, rhs, u, rel_tol, cap, m)
                  : bicgstab_solve(apply_matrix, rhs, u, rel_tol, cap, m);
    }
    return solution;
}

double two_mesh_error(const PdeSolution& coarse, const PdeSolution& fine,
                      std::span<const int> levels)
{
    const int mc = coarse.mesh.intervals();
    if (fine.mesh.intervals() != 2 * mc)
        throw std::invalid_argument("fine run must double the temporal intervals");
    for (int j = 0; j <= mc; ++j)
        if (coarse.mesh.node(j) != fine.mesh.node(2 * j))
            throw std::invalid_argument("temporal meshes do not nest");

    if (coarse.grid.edge() != fine.grid.edge())
        throw std::invalid_argument("spatial domains differ");
    const int nc = coarse.grid.intervals();
    const int nf = fine.grid.intervals();
    int stride;
    if (nf == nc)
        stride = 1;
    else if (nf == 2 * nc)
        stride = 2;
    else
        throw std::invalid_argument("spatial grids must match or double");
    for (int i = 1; i < nc; ++i)
        if (i * coarse.grid.spacing() != (stride * i) * fine.grid.spacing())
            throw std::invalid_argument("spatial grids do not nest");

    std::vector<int> fallback;
    if (levels.empty()) {
        fallback.push_back(mc);
        levels = fallback;
    }

    double worst = 0.0;
    for (int level : levels) {
        if (level < 0 || level > mc)
            throw std::invalid_argument("requested level outside the coarse mesh");
        const auto& c = coarse.interior[static_cast<size_t>(level)];
        const auto& f = fine.interior[static_cast<size_t>(2 * level)];
        for (int k = 1; k < nc; ++k)
            for (int i = 1; i < nc; ++i)
                worst = std::max(
                    worst,
                    std::abs(c[static_cast<size_t>(coarse.grid.index(i, k))]
                             - f[static_cast<size_t>(
                                 fine.grid.index(stride * i, stride * k))]));
    }
    return worst;
}

double max_nodal_error(const PdeSolution& solution, int level, const SpaceFn& reference)
{
    if (level < 0 || level > solution.mesh.intervals())
        throw std::invalid_argument("level outside the temporal mesh");
    const int n = solution.grid.intervals();
    const double h = solution.grid.spacing();
    const auto& u = solution.interior[static_cast<size_t>(level)];
    double worst = 0.0;
    for (int k = 1; k < n; ++k)
        for (int i = 1; i < n; ++i)
            worst = std::max(
                worst, std::abs(u[static_cast<size_t>(solution.grid.index(i, k))]
                                - reference(i * h, k * h)));
    return worst;
}

void dump_field_csv(const PdeSolution& solution, int level, std::ostream& os)
{
    if (level < 0 || level > solution.mesh.intervals())
        throw std::invalid_argument("level outside the temporal mesh");
    const int n = solution.grid.intervals();
    const double h = solution.grid.spacing();
    const double t = solution.mesh.node(level);
    const auto& u = solution.interior[static_cast<size_t>(level)];

    os << "i,k,x,y,U\n";
    char line[128];
    for (int k = 0; k <= n; ++k) {
        for (int i = 0; i <= n; ++i) {
            double value;
            if (i == 0 || i == n || k == 0 || k == n)
                value = solution.boundary ? solution.boundary(i * h, k * h, t) : 0.0;
            else
                value = u[static_cast<size_t>(solution.grid.index(i, k))];
            std::snprintf(line, sizeof line, "%d,%d,%.9e,%.9e,%.9e\n", i, k, i * h,
                          k * h, value);
            os << line;
        }
    }
}

} // namespace subdiff
