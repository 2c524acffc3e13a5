// The nonlocal obstacle operator
//
//   N[V](t,x) = inf over xi in K of  V(t, x + xi) + ell(t, x, xi).
//
// The infimum is taken over a documented finite search set: xi = 0, a
// uniform lattice over K intersected with the ball |xi| <= R, every grid
// node reachable from x inside that set (for grid functions), and a local
// refinement around the best point found. Values of V outside the box use
// the nearest box point.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "core.hpp"

namespace qvi {

struct SearchParams {
    double radius = 0.0;   ///< <= 0: derive R from the coercivity bound
    int coarse = 32;       ///< lattice steps per unit direction across [0, R]
    int refine = 40;       ///< golden-section / pattern-search iterations
    bool node_aligned = true;
};

struct ObstacleResult {
    double value = 0.0;
    Vec xi{0.0, 0.0};
    bool truncated = false;
};

/// Largest impulse that can still pay for itself: beyond R the cost alone
/// exceeds any possible gain, ell0 + alpha R^beta >= max V - min V.
inline double coercive_radius(double v_min, double v_max, const AssumptionConstants& c, double cap) {
    double excess = v_max - v_min - c.ell0;
    if (!(excess > 0.0)) return 0.0;
    return std::min(cap, std::pow(excess / c.alpha, 1.0 / c.beta));
}

namespace detail {

inline bool lex_less(const Vec& a, const Vec& b, int n) {
    for (int d = 0; d < n; ++d)
        if (a[d] != b[d]) return a[d] < b[d];
    return false;
}

/// Running minimum with the documented tie-break: smaller |xi| first, then
/// lexicographic order. The result is independent of visiting order.
struct Best {
    int n;
    ObstacleResult r;
    double xi_norm = 0.0;
    bool empty = true;

    void consider(const Vec& xi, double value) {
        double len = norm(xi, n);
        if (empty || value < r.value ||
            (value == r.value && (len < xi_norm || (len == xi_norm && lex_less(xi, r.xi, n))))) {
            r.value = value;
            r.xi = xi;
            xi_norm = len;
            empty = false;
        }
    }
};

inline std::vector<Vec> lattice(int n, const Cone& cone, double radius, int coarse) {
    std::vector<Vec> pts;
    if (!(radius > 0.0) || coarse <= 0) return pts;
    const double h = radius / coarse;
    if (n == 1) {
        for (int j = 1; j <= coarse; ++j) {
            if (cone.allows_positive()) pts.push_back({j * h, 0.0});
            if (cone.allows_negative()) pts.push_back({-j * h, 0.0});
        }
    } else {
        for (int a = -coarse; a <= coarse; ++a)
            for (int b = -coarse; b <= coarse; ++b) {
                if (a == 0 && b == 0) continue;
                Vec xi{a * h, b * h};
                if (norm(xi, 2) <= radius * (1 + 1e-12) && cone.contains(xi)) pts.push_back(xi);
            }
    }
    return pts;
}

/// Local refinement around `best`: golden section along the ray in 1-d,
/// compass search with halving steps in 2-d.
template <class Objective>
void refine(Best& best, int n, const Cone& cone, double radius, double step, int iterations, Objective&& f) {
    if (iterations <= 0 || !(radius > 0.0) || !(step > 0.0)) return;
    if (n == 1) {
        std::vector<double> dirs;
        if (best.xi_norm > 0.0) dirs.push_back(best.r.xi[0] > 0 ? 1.0 : -1.0);
        else {
            if (cone.allows_positive()) dirs.push_back(1.0);
            if (cone.allows_negative()) dirs.push_back(-1.0);
        }
        const double center = best.xi_norm;
        for (double s : dirs) {
            double lo = std::max(0.0, center - step), hi = std::min(radius, center + step);
            constexpr double g = 0.6180339887498949;
            double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
            auto eval = [&](double u) {
                Vec xi{s * u, 0.0};
                double v = f(xi);
                best.consider(xi, v);
                return v;
            };
            double fa = eval(a), fb = eval(b);
            for (int it = 0; it < iterations; ++it) {
                if (fa <= fb) {
                    hi = b;
                    b = a;
                    fb = fa;
                    a = hi - g * (hi - lo);
                    fa = eval(a);
                } else {
                    lo = a;
                    a = b;
                    fa = fb;
                    b = lo + g * (hi - lo);
                    fb = eval(b);
                }
            }
        }
        return;
    }
    static constexpr double dirs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    for (int it = 0; it < iterations; ++it) {
        const Vec center = best.r.xi;
        const double before = best.r.value;
        for (auto& d : dirs) {
            Vec xi{center[0] + step * d[0], center[1] + step * d[1]};
            if (norm(xi, 2) > radius || !cone.contains(xi)) continue;
            best.consider(xi, f(xi));
        }
        if (!(best.r.value < before)) step *= 0.5;
    }
}

} // namespace detail

/// Minimises objective(xi) over the search set for a general (e.g. closed
/// form) value function. `objective` returns V(x + xi) + ell(xi).
template <class Objective>
ObstacleResult minimize_impulse(int n, const Cone& cone, double radius, const SearchParams& search,
                                Objective&& objective) {
    detail::Best best{n, {}};
    best.consider({0.0, 0.0}, objective(Vec{0.0, 0.0}));
    for (const Vec& xi : detail::lattice(n, cone, radius, search.coarse)) best.consider(xi, objective(xi));
    if (radius > 0.0 && search.coarse > 0)
        detail::refine(best, n, cone, radius, radius / search.coarse, search.refine, objective);
    best.r.truncated = radius > 0.0 && best.xi_norm >= radius * (1 - 1e-9);
    return best.r;
}

/// N[V] on grid functions. Holds the search set and, when the cost depends
/// on xi only, a cache of its values on that set.
class ObstacleOperator {
public:
    ObstacleOperator(const Grid& grid, const ImpulseProblem& problem, SearchParams search = {})
        : grid_(grid), problem_(problem), search_(search),
          cached_cost_(problem.cost_is_translation_invariant()) {
        if (problem.n != grid.dim()) throw ConfigError("problem and grid dimensions differ");
    }

    const SearchParams& search() const noexcept { return search_; }

    /// Search radius for a slice: the configured one, else the coercivity bound.
    double radius_for(std::span<const double> slice, const AssumptionConstants& c) const {
        if (search_.radius > 0.0) return std::min(search_.radius, grid_.diagonal());
        auto [lo, hi] = std::minmax_element(slice.begin(), slice.end());
        return coercive_radius(*lo, *hi, c, grid_.diagonal());
    }

    /// N[V](t, x_i) for grid node i of the slice.
    ObstacleResult at_node(std::span<const double> slice, double t, std::size_t node, double radius) const {
        prepare(radius);
        const int n = grid_.dim();
        const Vec x = grid_.point(node);
        const auto idx = grid_.unflatten(node);
        detail::Best best{n, {}};
        best.consider({0.0, 0.0}, slice[node] + cost(t, x, Vec{0.0, 0.0}, zero_cost_));
        for (const Offset& o : offsets_) {
            int j0 = idx[0] + o.steps[0], j1 = n > 1 ? idx[1] + o.steps[1] : 0;
            if (j0 < 0 || j0 >= grid_.x_nodes(0)) continue;
            if (n > 1 && (j1 < 0 || j1 >= grid_.x_nodes(1))) continue;
            std::size_t land = grid_.flatten({j0, j1});
            best.consider(o.xi, slice[land] + cost(t, x, o.xi, o.ell));
        }
        for (const Offset& o : lattice_) {
            Vec y{x[0] + o.xi[0], x[1] + o.xi[1]};
            best.consider(o.xi, GridFunction::interpolate(grid_, slice, y) + cost(t, x, o.xi, o.ell));
        }
        finish(best, slice, t, x, radius);
        return best.r;
    }

    /// N[V](t, x) at an arbitrary point inside the box.
    ObstacleResult at_point(std::span<const double> slice, double t, const Vec& x, double radius) const {
        prepare(radius);
        const int n = grid_.dim();
        detail::Best best{n, {}};
        best.consider({0.0, 0.0}, GridFunction::interpolate(grid_, slice, x) + problem_.ell(t, x, Vec{0.0, 0.0}));
        if (search_.node_aligned && radius > 0.0) {
            for (std::size_t j = 0; j < grid_.space_size(); ++j) {
                Vec y = grid_.point(j);
                Vec xi{y[0] - x[0], n > 1 ? y[1] - x[1] : 0.0};
                if (norm(xi, n) > radius || norm(xi, n) == 0.0 || !problem_.cone.contains(xi)) continue;
                best.consider(xi, slice[j] + problem_.ell(t, x, xi));
            }
        }
        for (const Offset& o : lattice_) {
            Vec y{x[0] + o.xi[0], x[1] + o.xi[1]};
            best.consider(o.xi, GridFunction::interpolate(grid_, slice, y) + cost(t, x, o.xi, o.ell));
        }
        finish(best, slice, t, x, radius);
        return best.r;
    }

    /// Applies the operator at every node of a slice.
    void apply(std::span<const double> slice, double t, double radius, std::span<double> out,
               std::vector<Vec>* argmin = nullptr) const {
        if (argmin) argmin->resize(slice.size());
        for (std::size_t i = 0; i < slice.size(); ++i) {
            ObstacleResult r = at_node(slice, t, i, radius);
            out[i] = r.value;
            if (argmin) (*argmin)[i] = r.xi;
        }
    }

private:
    struct Offset {
        std::array<int, max_dim> steps{0, 0};
        Vec xi{0.0, 0.0};
        double ell = 0.0;
    };

    double cost(double t, const Vec& x, const Vec& xi, double cached) const {
        return cached_cost_ ? cached : problem_.ell(t, x, xi);
    }

    void prepare(double radius) const {
        if (prepared_ && radius == radius_) return;
        prepared_ = true;
        radius_ = radius;
        const int n = grid_.dim();
        const Vec origin{grid_.x_min(0), n > 1 ? grid_.x_min(1) : 0.0};
        auto cached = [&](const Vec& xi) { return cached_cost_ ? problem_.ell(0.0, origin, xi) : 0.0; };
        zero_cost_ = cached(Vec{0.0, 0.0});
        offsets_.clear();
        lattice_.clear();
        if (!(radius > 0.0)) return;
        if (search_.node_aligned) {
            const int m0 = std::min(grid_.x_nodes(0) - 1, static_cast<int>(radius / grid_.dx(0)) + 1);
            const int m1 = n > 1 ? std::min(grid_.x_nodes(1) - 1, static_cast<int>(radius / grid_.dx(1)) + 1) : 0;
            for (int a = -m0; a <= m0; ++a)
                for (int b = -m1; b <= m1; ++b) {
                    if (a == 0 && b == 0) continue;
                    Offset o;
                    o.steps = {a, b};
                    o.xi = {a * grid_.dx(0), n > 1 ? b * grid_.dx(1) : 0.0};
                    if (norm(o.xi, n) > radius * (1 + 1e-12) || !problem_.cone.contains(o.xi)) continue;
                    o.ell = cached(o.xi);
                    offsets_.push_back(o);
                }
        }
        for (const Vec& xi : detail::lattice(n, problem_.cone, radius, search_.coarse)) {
            Offset o;
            o.xi = xi;
            o.ell = cached(xi);
            lattice_.push_back(o);
        }
    }

    void finish(detail::Best& best, std::span<const double> slice, double t, const Vec& x, double radius) const {
        const int n = grid_.dim();
        if (radius > 0.0) {
            double step = search_.coarse > 0 ? radius / search_.coarse : 0.0;
            if (search_.node_aligned) step = std::max(step, grid_.max_dx());
            auto objective = [&](const Vec& xi) {
                Vec y{x[0] + xi[0], x[1] + xi[1]};
                return GridFunction::interpolate(grid_, slice, y) + problem_.ell(t, x, xi);
            };
            detail::refine(best, n, problem_.cone, radius, step, search_.refine, objective);
        }
        Vec landing{x[0] + best.r.xi[0], x[1] + best.r.xi[1]};
        best.r.truncated = (radius > 0.0 && best.xi_norm >= radius * (1 - 1e-9)) || !grid_.inside(landing);
    }

    const Grid& grid_;
    const ImpulseProblem& problem_;
    SearchParams search_;
    bool cached_cost_;
    mutable bool prepared_ = false;
    mutable double radius_ = 0.0;
    mutable double zero_cost_ = 0.0;
    mutable std::vector<Offset> offsets_;
    mutable std::vector<Offset> lattice_;
};

/// N[V](t_k, x) for a point of the box.
inline ObstacleResult evaluate(const GridFunction& V, int k, const Vec& x, const ImpulseProblem& problem,
                               const AssumptionConstants& constants, const SearchParams& search = {}) {
    ObstacleOperator op(V.grid(), problem, search);
    return op.at_point(V.slice(k), V.grid().t(k), x, op.radius_for(V.slice(k), constants));
}

/// N[V](t_k, .) on every spatial node.
inline std::vector<double> evaluate_slice(const GridFunction& V, int k, const ImpulseProblem& problem,
                                          const AssumptionConstants& constants, const SearchParams& search = {}) {
    ObstacleOperator op(V.grid(), problem, search);
    std::vector<double> out(V.grid().space_size());
    op.apply(V.slice(k), V.grid().t(k), op.radius_for(V.slice(k), constants), out);
    return out;
}

} // namespace qvi
