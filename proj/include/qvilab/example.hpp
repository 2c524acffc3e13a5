// The transport counterexample separating the classical and the modified
// super-solution definitions.
//
// Data: H = -p + g, h(x) = x e^{-x}, ell = ell0 (1 + xi) on K = [0, inf).
// V(t,x) = f(x - T + t) with f(y) = y e^{-y} solves V_t - V_x = 0, so
// V_t + H(V_x) = g >= 0. At x0 = T - t0 + 1 the obstacle reduces to
//
//   N[V](t0,x0) = inf_{xi >= 0} psi(xi),   psi(xi) = (1+xi) (e^{-(1+xi)} + ell0),
//
// whose critical points solve xi e^{-xi} = ell0 e. For small ell0 the local
// minimum psi(xi2) lies below V(t0,x0) = e^{-1}, so V > N[V] near (t0,x0):
// the constraint fails while the classical super-solution test passes.

#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "viscosity.hpp"

namespace qvi::example {

inline constexpr double xi_cap = 20.0;

inline double f(double y) { return y * std::exp(-y); }

inline double psi(double xi, double ell0) { return (1.0 + xi) * (std::exp(-(1.0 + xi)) + ell0); }

inline double psi_prime(double xi, double ell0) { return ell0 - xi * std::exp(-(1.0 + xi)); }

/// Root of xi e^{-xi} = target on [lo, hi] by bisection; the sign of the
/// residual must differ at the ends.
inline double bisect(double lo, double hi, double target) {
    auto r = [&](double xi) { return xi * std::exp(-xi) - target; };
    double rlo = r(lo);
    if (rlo * r(hi) > 0.0) throw ConfigError("root bracket failure", "ell0");
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        double rm = r(mid);
        if (rm == 0.0) return mid;
        if ((rm < 0.0) == (rlo < 0.0)) {
            lo = mid;
            rlo = rm;
        } else {
            hi = mid;
        }
    }
    return std::fabs(r(lo)) <= std::fabs(r(hi)) ? lo : hi;
}

struct ExampleOptions {
    double T = 1.0;
    bool auto_shrink = false;   ///< halve ell0 until the gap at (t0,x0) is negative
    double bump_margin = 0.5;   ///< height of g above the HJB defect of V
};

struct ExampleInstance {
    double T = 1.0;
    double t0 = 0.5;
    double ell0 = 0.05;
    double requested_ell0 = 0.05;
    int shrink_steps = 0;
    double x0 = 1.5;
    double xi1 = 0.0, xi2 = 0.0;
    double root_residual1 = 0.0, root_residual2 = 0.0;
    double obstacle_value = 0.0;  ///< N[V](t0,x0) = min psi
    double value = 0.0;           ///< V(t0,x0) = e^{-1}
    double gap = 0.0;             ///< N[V](t0,x0) - V(t0,x0)
    bool needs_shrink = false;    ///< gap >= 0: no separation at this ell0
    double delta = 0.0;           ///< N[V]-V < 0 on |t-t0|+|x-x0| < delta
    double g_height = 0.0;
    std::string g_source;
    std::string value_source;     ///< V as an expression in (t, x1)

    /// N[V](t,x) - V(t,x) in closed form (no box truncation).
    double gap_at(double t, double x) const {
        const double y = x - T + t;
        auto F = [&](double z) { return f(z) + ell0 * z; };
        const double zmin = 1.0 + xi2;
        if (y > zmin) return ell0;
        return ell0 + std::min(0.0, F(zmin) - F(y));
    }

    ImpulseProblem problem() const {
        return ImpulseProblem::from_sources(1, T, "-p1", "x1*exp(-x1)", "ell0+ell0*xi1", Cone::orthant(1), g_source,
                                            {{"ell0", ell0}});
    }

    AssumptionConstants constants() const {
        AssumptionConstants c;
        c.ell0 = ell0;
        c.delta0 = ell0;
        // with beta = 1/2 the coercivity margin ell0 xi - alpha sqrt(xi) bottoms out
        // at -alpha^2 / (4 ell0); small alpha keeps it below the scan tolerance
        c.alpha = 1e-4;
        return c;
    }
};

/// Distance from (t0,x0) to the boundary of {gap < 0}, measured in the
/// |dt| + |dx| norm, by an outward scan of the diamond perimeter.
inline double scan_delta(const ExampleInstance& e) {
    auto perimeter_negative = [&](double d) {
        constexpr int samples = 256;
        for (int j = 0; j <= samples; ++j) {
            double s = d * j / samples;
            for (double st : {-1.0, 1.0})
                for (double sx : {-1.0, 1.0}) {
                    double t = e.t0 + st * s;
                    if (t < 0.0 || t > e.T) continue;
                    if (!(e.gap_at(t, e.x0 + sx * (d - s)) < 0.0)) return false;
                }
        }
        return true;
    };
    if (!(e.gap_at(e.t0, e.x0) < 0.0)) return 0.0;
    double step = 1e-3, lo = 0.0;
    while (lo < 10.0 && perimeter_negative(lo + step)) lo += step;
    double hi = lo + step;
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (perimeter_negative(mid) ? lo : hi) = mid;
    }
    return lo;
}

inline ExampleInstance build_instance(double t0, double ell0, const ExampleOptions& options = {}) {
    const double threshold = std::exp(-2.0);
    if (!(ell0 > 0.0 && ell0 < threshold)) throw ConfigError("must satisfy 0 < ell0 < e^-2", "ell0");
    if (!(options.T > 0.0)) throw ConfigError("horizon must be positive", "T");
    if (!(t0 >= 0.0 && t0 < options.T)) throw ConfigError("must satisfy 0 <= t0 < T", "t0");

    ExampleInstance e;
    e.T = options.T;
    e.t0 = t0;
    e.requested_ell0 = ell0;
    e.x0 = e.T - t0 + 1.0;
    e.value = std::exp(-1.0);
    for (;;) {
        e.ell0 = ell0;
        const double target = ell0 * std::numbers::e;
        e.xi1 = bisect(0.0, 1.0, target);
        e.xi2 = bisect(1.0, xi_cap, target);
        e.root_residual1 = std::fabs(e.xi1 * std::exp(-e.xi1) - target);
        e.root_residual2 = std::fabs(e.xi2 * std::exp(-e.xi2) - target);
        e.obstacle_value = std::min(psi(0.0, ell0), psi(e.xi2, ell0));
        e.gap = e.obstacle_value - e.value;
        e.needs_shrink = !(e.gap < 0.0);
        if (!e.needs_shrink || !options.auto_shrink || e.shrink_steps >= 60) break;
        ell0 *= 0.5;
        ++e.shrink_steps;
    }
    e.delta = e.needs_shrink ? 0.0 : scan_delta(e);

    // V solves the transport equation, so the defect of V_t - V_x is zero up
    // to evaluation error; measure it on the support anyway.
    const std::string T = format_real(e.T);
    e.value_source = "(x1-" + T + "+t)*exp(-(x1-" + T + "+t))";
    double defect = 0.0;
    if (e.delta > 0.0) {
        const double r = 0.5 * e.delta, eps = 1e-6;
        for (int a = -20; a <= 20; ++a)
            for (int b = -20; b <= 20; ++b) {
                double t = e.t0 + r * a / 40.0, x = e.x0 + r * b / 40.0;
                auto V = [&](double tt, double xx) { return f(xx - e.T + tt); };
                double vt = (V(t + eps, x) - V(t - eps, x)) / (2 * eps);
                double vx = (V(t, x + eps) - V(t, x - eps)) / (2 * eps);
                defect = std::max(defect, -(vt - vx));
            }
    }
    e.g_height = std::max(0.0, defect) + options.bump_margin;
    if (e.delta > 0.0) {
        const std::string r = format_real(0.5 * e.delta), H = format_real(e.g_height);
        const std::string u = "((t-" + format_real(e.t0) + ")+(x1-" + format_real(e.x0) + "))";
        const std::string v = "((t-" + format_real(e.t0) + ")-(x1-" + format_real(e.x0) + "))";
        auto lobe = [&](const std::string& w) {
            return "cos(" + format_real(std::numbers::pi / 2.0) + "*" + w + "/" + r + ")^2*(sign(" + r + "-abs(" + w +
                   "))+1)/2";
        };
        e.g_source = H + "*" + lobe(u) + "*" + lobe(v);
    } else {
        e.g_source = "0";
    }
    return e;
}

/// Nodes of the connected component of {gap < 0} containing the node
/// nearest (t0,x0), by flood fill over the closed-form gap.
inline std::vector<bool> negative_gap_region(const ExampleInstance& e, const Grid& g) {
    std::vector<bool> in(g.size(), false);
    const std::size_t m = g.space_size();
    int k0 = static_cast<int>(std::lround(e.t0 / g.dt()));
    int i0 = static_cast<int>(std::lround((e.x0 - g.x_min(0)) / g.dx(0)));
    if (k0 < 0 || k0 >= g.t_nodes() || i0 < 0 || i0 >= g.x_nodes(0)) return in;
    auto negative = [&](int k, int i) { return e.gap_at(g.t(k), g.x(0, i)) < 0.0; };
    if (!negative(k0, i0)) return in;
    std::vector<std::pair<int, int>> stack{{k0, i0}};
    in[static_cast<std::size_t>(k0) * m + static_cast<std::size_t>(i0)] = true;
    while (!stack.empty()) {
        auto [k, i] = stack.back();
        stack.pop_back();
        const std::pair<int, int> nb[4] = {{k + 1, i}, {k - 1, i}, {k, i + 1}, {k, i - 1}};
        for (auto [kk, ii] : nb) {
            if (kk < 0 || kk >= g.t_nodes() || ii < 0 || ii >= g.x_nodes(0)) continue;
            std::size_t flat = static_cast<std::size_t>(kk) * m + static_cast<std::size_t>(ii);
            if (in[flat] || !negative(kk, ii)) continue;
            in[flat] = true;
            stack.emplace_back(kk, ii);
        }
    }
    return in;
}

/// N[V](t0,x0) by the obstacle search applied to the closed-form V.
inline ObstacleResult search_obstacle(const ExampleInstance& e, const SearchParams& search = {}) {
    auto objective = [&](const Vec& xi) { return f(e.x0 + xi[0] - e.T + e.t0) + e.ell0 * (1.0 + xi[0]); };
    return minimize_impulse(1, Cone::orthant(1), xi_cap, search, objective);
}

struct SeparationReport {
    ViscosityReport classical;
    ViscosityReport modified;
    ViscosityReport hjb_sub;
    bool classical_pass = false;
    bool modified_fail = false;
    bool hjb_sub_pass = false;
    std::size_t region_nodes = 0;
    std::size_t violations_outside_region = 0;
    std::size_t violations_outside_diamond = 0;  ///< |t-t0|+|x-x0| > delta; informational
    bool violations_in_region = false;
    bool separation_exhibited = false;
    double grid_gap_at_center = 0.0;  ///< N[V]-V at the node nearest (t0,x0), box-truncated search
    std::vector<double> slice_x, slice_grid_gap, slice_exact_gap;  ///< N[V]-V on the t0 slice
};

inline SeparationReport verify_separation(const ExampleInstance& e, const Grid& grid, const ProbeSpec& spec = {}) {
    if (grid.dim() != 1) throw ConfigError("the example is one-dimensional", "n");
    if (std::fabs(grid.horizon() - e.T) > 1e-12) throw ConfigError("grid horizon differs from T", "T");
    const ImpulseProblem problem = e.problem();
    const AssumptionConstants c = e.constants();
    const GridFunction V = sample(Expr::parse(e.value_source, time_space_vars(1)), grid);

    SeparationReport rep;
    ViscosityChecker checker(V, problem, c, spec);
    rep.classical = checker.check(Variant::qvi_super_classical);
    rep.modified = checker.check(Variant::qvi_super_modified);
    rep.hjb_sub = checker.check(Variant::hjb_sub);
    rep.classical_pass = rep.classical.pass();
    rep.modified_fail = !rep.modified.pass();
    rep.hjb_sub_pass = rep.hjb_sub.pass();

    const std::vector<bool> region = negative_gap_region(e, grid);
    const std::size_t m = grid.space_size();
    for (bool b : region) rep.region_nodes += b;
    for (const NodeViolation& v : rep.modified.constraint_violations) {
        if (!region[static_cast<std::size_t>(v.k) * m + v.node]) ++rep.violations_outside_region;
        double d = std::fabs(grid.t(v.k) - e.t0) + std::fabs(grid.x(0, static_cast<int>(v.node)) - e.x0);
        if (d > e.delta) ++rep.violations_outside_diamond;
    }
    rep.violations_in_region = !rep.modified.constraint_violations.empty() && rep.violations_outside_region == 0;
    rep.separation_exhibited = rep.classical_pass && rep.modified_fail && rep.violations_in_region && rep.hjb_sub_pass;

    const int k0 = static_cast<int>(std::lround(e.t0 / grid.dt()));
    const auto i0 = static_cast<std::size_t>(std::lround((e.x0 - grid.x_min(0)) / grid.dx(0)));
    if (k0 >= 0 && k0 < grid.t_nodes() && i0 < m) {
        rep.grid_gap_at_center = checker.gap(k0, i0);
        for (std::size_t i = 0; i < m; ++i) {
            rep.slice_x.push_back(grid.x(0, static_cast<int>(i)));
            rep.slice_grid_gap.push_back(checker.gap(k0, i));
            rep.slice_exact_gap.push_back(e.gap_at(grid.t(k0), grid.x(0, static_cast<int>(i))));
        }
    }
    return rep;
}

} // namespace qvi::example
