// Backward-in-time solver for the HJB equation and the QVI.
//
// HJB step (explicit local Lax-Friedrichs, backward in time):
//
//   W_i = U_i + dt * [ H(t_{k+1}, x_i, D0 U_i) + sum_d sigma_d (U_{i+e_d} - 2U_i + U_{i-e_d}) / (2 dx_d) ]
//
// where U is slice k+1, D0 the central gradient and out-of-box neighbours
// take the edge value. The scheme is monotone when sigma_d >= |dH/dp_d| and
// dt * sum_d sigma_d / dx_d <= 1.
//
// QVI slice: W^0 = HJB step, W^{m+1} = min(W^0, N[W^m]) until the largest
// change is at most fp_tol.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "obstacle.hpp"

namespace qvi {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SchemeParams {
    Vec dissipation{0.0, 0.0};  ///< sigma_d
    Vec speed{0.0, 0.0};        ///< sampled max |dH/dp_d|
    double cfl_safety = 1.0;
    double fp_tol = 1e-8;
    int fp_max_iter = 500;

    double cfl_number(const Grid& g) const {
        double s = 0.0;
        for (int d = 0; d < g.dim(); ++d) s += dissipation[d] / g.dx(d);
        return g.dt() * s;
    }
};

/// Largest |dH/dp_d| over sampled (t, x, p), by central differences. The p
/// range covers twice the largest slope of h on the grid, and at least [-1,1].
inline Vec sample_speed(const ImpulseProblem& problem, const Grid& grid) {
    const int n = grid.dim();
    std::vector<double> h = sample_terminal(problem, grid);
    double slope = 0.0;
    for (std::size_t i = 0; i < grid.space_size(); ++i) {
        auto idx = grid.unflatten(i);
        for (int d = 0; d < n; ++d)
            if (idx[d] + 1 < grid.x_nodes(d))
                slope = std::max(slope, std::fabs(h[i + grid.stride(d)] - h[i]) / grid.dx(d));
    }
    const double P = std::max(1.0, 2.0 * slope);
    const double eta = 1e-4 * (1.0 + P);
    constexpr int p_samples = 21;
    Vec speed{0.0, 0.0};
    const int t_samples = std::min(grid.t_nodes(), 5);
    std::array<int, max_dim> step{1, 1};
    for (int d = 0; d < n; ++d) step[d] = std::max(1, grid.x_nodes(d) / 64);
    for (int kt = 0; kt < t_samples; ++kt) {
        double t = grid.horizon() * kt / std::max(1, t_samples - 1);
        for (int a = 0; a < grid.x_nodes(0); a += step[0]) {
            for (int b = 0; b < (n > 1 ? grid.x_nodes(1) : 1); b += step[1]) {
                Vec x = grid.point(grid.flatten({a, b}));
                for (int ja = 0; ja < p_samples; ++ja) {
                    for (int jb = 0; jb < (n > 1 ? p_samples : 1); ++jb) {
                        Vec p{-P + 2.0 * P * ja / (p_samples - 1), n > 1 ? -P + 2.0 * P * jb / (p_samples - 1) : 0.0};
                        for (int d = 0; d < n; ++d) {
                            Vec hi = p, lo = p;
                            hi[d] += eta;
                            lo[d] -= eta;
                            double der = (problem.H(t, x, hi) - problem.H(t, x, lo)) / (2.0 * eta);
                            speed[d] = std::max(speed[d], std::fabs(der));
                        }
                    }
                }
            }
        }
    }
    return speed;
}

inline SchemeParams estimate_scheme(const ImpulseProblem& problem, const Grid& grid, double factor = 1.2) {
    SchemeParams s;
    s.speed = sample_speed(problem, grid);
    for (int d = 0; d < grid.dim(); ++d) s.dissipation[d] = factor * s.speed[d];
    return s;
}

/// Smallest time-node count meeting the CFL condition for `scheme`.
inline int cfl_time_nodes(const Grid& grid, const SchemeParams& scheme) {
    double s = 0.0;
    for (int d = 0; d < grid.dim(); ++d) s += scheme.dissipation[d] / grid.dx(d);
    return static_cast<int>(std::ceil(grid.horizon() * s / scheme.cfl_safety - 1e-12)) + 1;
}

struct SolveResult {
    GridFunction value;
    GridFunction residual;           ///< min{discrete HJB residual, N[V]-V}; 0 on the last slice
    std::optional<GridFunction> gap; ///< N[V]-V, QVI mode only
    std::vector<bool> intervention;  ///< per node, N[V]-V <= intervention_tol
    std::vector<Vec> jump;           ///< argmin xi of N[V] per node, QVI mode only
    std::vector<int> obstacle_iterations;
    std::vector<bool> truncated;     ///< per node, the impulse search hit its cap
    bool hypotheses_audited = true;
    double residual_max = 0.0;
    double intervention_tol = 1e-6;
    SchemeParams scheme;
    double search_radius_max = 0.0;
};

struct SolveOptions {
    double intervention_tol = 1e-6;
    /// Skip the sampled check ell >= ell0 before a QVI solve.
    bool override_cost_check = false;
};

namespace detail {

inline void check_cfl(const Grid& grid, const SchemeParams& scheme) {
    for (int d = 0; d < grid.dim(); ++d)
        if (!(scheme.dissipation[d] >= 0.0)) throw ConfigError("dissipation must be nonnegative", "scheme");
    if (!(scheme.cfl_safety > 0.0 && scheme.cfl_safety <= 1.0))
        throw ConfigError("CFL safety factor must lie in (0,1]", "scheme.cfl");
    double c = scheme.cfl_number(grid);
    if (c > scheme.cfl_safety * (1 + 1e-12)) {
        char buf[200];
        std::snprintf(buf, sizeof buf, "CFL violated: dt*sum(sigma/dx) = %.6g > %.6g; need at least %d time nodes", c,
                      scheme.cfl_safety, cfl_time_nodes(grid, scheme));
        throw SolverError(buf);
    }
}

inline std::string where(const Grid& g, int k, std::size_t i) {
    Vec x = g.point(i);
    std::string s = "t=" + format_real(g.t(k));
    for (int d = 0; d < g.dim(); ++d) s += ", x" + std::to_string(d + 1) + "=" + format_real(x[d]);
    return s;
}

/// One explicit step: slice k from slice k+1.
inline void hjb_step(const ImpulseProblem& problem, const Grid& g, const SchemeParams& scheme, int k,
                     std::span<const double> next, std::span<double> out) {
    const int n = g.dim();
    const double t = g.t(k + 1), dt = g.dt();
    for (std::size_t i = 0; i < g.space_size(); ++i) {
        auto idx = g.unflatten(i);
        Vec x = g.point(i);
        Vec p{0.0, 0.0};
        double diffusion = 0.0;
        for (int d = 0; d < n; ++d) {
            const std::size_t s = g.stride(d);
            const double up = idx[d] + 1 < g.x_nodes(d) ? next[i + s] : next[i];
            const double down = idx[d] > 0 ? next[i - s] : next[i];
            p[d] = (up - down) / (2.0 * g.dx(d));
            diffusion += scheme.dissipation[d] * (up - 2.0 * next[i] + down) / (2.0 * g.dx(d));
        }
        double v;
        try {
            v = next[i] + dt * (problem.H(t, x, p) + diffusion);
        } catch (const DomainError& e) {
            throw DomainError(e, "at " + where(g, k, i));
        }
        if (!std::isfinite(v)) throw SolverError("non-finite value at " + where(g, k, i));
        out[i] = v;
    }
}

inline bool terminal_respects_bound(const std::vector<double>& h, const AssumptionConstants* c) {
    if (!c) return true;
    for (double v : h)
        if (v < -c->h0) return false;
    return true;
}

} // namespace detail

/// Pure HJB mode (no obstacle).
inline SolveResult solve_hjb(const ImpulseProblem& problem, const Grid& grid, const SchemeParams& scheme,
                             const AssumptionConstants* constants = nullptr) {
    if (problem.n != grid.dim()) throw ConfigError("problem and grid dimensions differ");
    detail::check_cfl(grid, scheme);
    SolveResult r;
    r.scheme = scheme;
    r.value = GridFunction(grid);
    r.residual = GridFunction(grid);
    const int last = grid.t_nodes() - 1;
    std::vector<double> h = sample_terminal(problem, grid);
    r.hypotheses_audited = detail::terminal_respects_bound(h, constants);
    std::copy(h.begin(), h.end(), r.value.slice(last).begin());
    for (int k = last - 1; k >= 0; --k) detail::hjb_step(problem, grid, scheme, k, r.value.slice(k + 1), r.value.slice(k));
    r.obstacle_iterations.assign(static_cast<std::size_t>(grid.t_nodes()), 0);
    r.intervention.assign(grid.size(), false);
    return r;
}

/// Checks ell >= ell0 on sampled (t, x, xi) with xi on the cone rays.
inline void require_cost_floor(const ImpulseProblem& problem, const Grid& grid, const AssumptionConstants& c) {
    for (int k = 0; k < grid.t_nodes(); k += std::max(1, grid.t_nodes() / 8))
        for (std::size_t i = 0; i < grid.space_size(); i += std::max<std::size_t>(1, grid.space_size() / 32))
            for (const Vec& ray : problem.cone.rays())
                for (double r : {0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, grid.diagonal()}) {
                    Vec xi{ray[0] * r, ray[1] * r};
                    double v = problem.ell(grid.t(k), grid.point(i), xi);
                    if (v < c.ell0 - 1e-12)
                        throw ConfigError("impulse cost falls below ell0 at a sampled point (override to proceed)",
                                          "problem.ell");
                }
}

inline SolveResult solve_qvi(const ImpulseProblem& problem, const AssumptionConstants& constants, const Grid& grid,
                             const SchemeParams& scheme, const SearchParams& search = {},
                             const SolveOptions& options = {}) {
    if (problem.n != grid.dim()) throw ConfigError("problem and grid dimensions differ");
    detail::check_cfl(grid, scheme);
    if (!options.override_cost_check) require_cost_floor(problem, grid, constants);

    const std::size_t m = grid.space_size();
    const int last = grid.t_nodes() - 1;
    SolveResult r;
    r.scheme = scheme;
    r.intervention_tol = options.intervention_tol;
    r.value = GridFunction(grid);
    r.residual = GridFunction(grid);
    r.gap = GridFunction(grid);
    r.intervention.assign(grid.size(), false);
    r.jump.assign(grid.size(), Vec{0.0, 0.0});
    r.truncated.assign(grid.size(), false);
    r.obstacle_iterations.assign(static_cast<std::size_t>(grid.t_nodes()), 0);

    std::vector<double> h = sample_terminal(problem, grid);
    r.hypotheses_audited = detail::terminal_respects_bound(h, &constants);
    std::copy(h.begin(), h.end(), r.value.slice(last).begin());

    ObstacleOperator op(grid, problem, search);
    std::vector<double> w0(m), w(m), next(m), obstacle(m);
    std::vector<Vec> argmin;

    auto store_obstacle = [&](int k, std::span<const double> v, double radius) {
        for (std::size_t i = 0; i < m; ++i) {
            ObstacleResult o = op.at_node(v, grid.t(k), i, radius);
            obstacle[i] = o.value;
            const std::size_t flat = static_cast<std::size_t>(k) * m + i;
            r.jump[flat] = o.xi;
            r.truncated[flat] = o.truncated;
        }
    };

    {
        double radius = op.radius_for(r.value.slice(last), constants);
        r.search_radius_max = radius;
        store_obstacle(last, r.value.slice(last), radius);
        for (std::size_t i = 0; i < m; ++i) {
            double g = obstacle[i] - h[i];
            (*r.gap)(last, i) = g;
            r.intervention[static_cast<std::size_t>(last) * m + i] = g <= options.intervention_tol;
        }
    }

    for (int k = last - 1; k >= 0; --k) {
        detail::hjb_step(problem, grid, scheme, k, r.value.slice(k + 1), w0);
        const double radius = op.radius_for(w0, constants);
        r.search_radius_max = std::max(r.search_radius_max, radius);
        w = w0;
        int it = 0;
        for (;;) {
            ++it;
            store_obstacle(k, w, radius);
            double change = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                next[i] = std::min(w0[i], obstacle[i]);
                change = std::max(change, std::fabs(next[i] - w[i]));
            }
            if (change <= scheme.fp_tol) break;
            if (it >= scheme.fp_max_iter) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "obstacle fixed point did not converge at t=%s after %d iterations (change %.3g)",
                              format_real(grid.t(k)).c_str(), it, change);
                throw SolverError(buf);
            }
            std::swap(w, next);
        }
        r.obstacle_iterations[static_cast<std::size_t>(k)] = it;
        // keep the iterate whose obstacle was evaluated, so the gap is exact
        auto slice = r.value.slice(k);
        for (std::size_t i = 0; i < m; ++i) {
            slice[i] = w[i];
            const double gap = obstacle[i] - w[i];
            const double hjb = (w0[i] - w[i]) / grid.dt();
            (*r.gap)(k, i) = gap;
            r.residual(k, i) = std::min(hjb, gap);
            r.intervention[static_cast<std::size_t>(k) * m + i] = gap <= options.intervention_tol;
        }
    }
    for (double v : r.residual.values()) r.residual_max = std::max(r.residual_max, std::fabs(v));
    return r;
}

/// Nodes away from the truncation boundary: each side of the box is shrunk
/// by max(5 dx, 0.2) and, at time t_k, by speed * (T - t_k), the distance
/// boundary information travels by then.
inline std::vector<bool> interior_mask(const Grid& g, const SchemeParams& scheme) {
    std::vector<bool> mask(g.size(), false);
    for (int k = 0; k < g.t_nodes(); ++k) {
        const double elapsed = g.horizon() - g.t(k);
        for (std::size_t i = 0; i < g.space_size(); ++i) {
            Vec x = g.point(i);
            bool inside = true;
            for (int d = 0; d < g.dim(); ++d) {
                double shrink = std::max(5.0 * g.dx(d), 0.2) + scheme.speed[d] * elapsed;
                inside = inside && x[d] >= g.x_min(d) + shrink - 1e-12 && x[d] <= g.x_max(d) - shrink + 1e-12;
            }
            mask[static_cast<std::size_t>(k) * g.space_size() + i] = inside;
        }
    }
    return mask;
}

enum class Region : unsigned char { continuation, intervention };

struct RegionMap {
    std::vector<Region> region;  ///< per node
    std::vector<Vec> jump;       ///< argmin xi, meaningful on intervention nodes
    std::size_t intervention_count = 0;
};

/// CONTINUATION where N[V]-V > tol, INTERVENTION elsewhere. Without a gap
/// field (pure HJB run) every node is continuation.
inline RegionMap extract_regions(const SolveResult& r, double tol) {
    RegionMap map;
    const std::size_t size = r.value.grid().size();
    map.region.assign(size, Region::continuation);
    map.jump.assign(size, Vec{0.0, 0.0});
    if (!r.gap) return map;
    auto gap = r.gap->values();
    for (std::size_t j = 0; j < size; ++j) {
        if (gap[j] > tol) continue;
        map.region[j] = Region::intervention;
        map.jump[j] = r.jump[j];
        ++map.intervention_count;
    }
    return map;
}

} // namespace qvi
