// Comparison of solutions for ordered data, and the doubling-of-variables
// functional
//
//   Phi(t,s,x,y) = (1 - theta G) V(t,x) - V^(s,y) - phi(t,s,x,y),
//   phi = theta (2 nu T - t - s)/(2 nu T) (<x> + <y>) - rho (t+s)
//         + |t-s|^2/(2 eps) + |x-y|^2/(2 delta),      <x> = sqrt(1 + |x|^2).

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "assumptions.hpp"
#include "solver.hpp"

namespace qvi {

/// The data ordering (h <= h^, H <= H^, ell <= ell^) failed on samples.
class HypothesisError : public std::runtime_error {
public:
    HypothesisError(const std::string& what, AuditReport report)
        : std::runtime_error(what), report_(std::move(report)) {}

    const AuditReport& report() const noexcept { return report_; }

private:
    AuditReport report_;
};

struct ProblemPair {
    ImpulseProblem problem;
    ImpulseProblem hat;
};

struct Offsets {
    std::string dh = "0";    ///< in x1..xn
    std::string dH = "0";    ///< in t, x1..xn, p1..pn
    std::string dell = "0";  ///< in t, x1..xn, xi1..xin
};

/// (base, base + offsets), after checking every offset is >= 0 on samples.
inline ProblemPair ordered_pair_generator(const ImpulseProblem& base, const Offsets& offsets,
                                          const SamplerSpec& spec) {
    const int n = base.n;
    Expr dh = Expr::parse(offsets.dh, terminal_vars(n));
    Expr dH = Expr::parse(offsets.dH, hamiltonian_vars(n));
    Expr dl = Expr::parse(offsets.dell, cost_vars(n));

    ImpulseProblem hat = base;
    hat.terminal = sum(base.terminal, dh, terminal_vars(n));
    hat.hamiltonian = sum(base.hamiltonian, dH, hamiltonian_vars(n));
    hat.cost = sum(base.cost, dl, cost_vars(n));

    AuditReport order = audit_comparison_hypotheses(base, hat, AssumptionConstants{}, nullptr, nullptr, spec);
    for (const AuditCheck& c : order.checks)
        if (c.worst_margin < 0.0)
            throw ConfigError("offset takes a negative value at a sample (" + c.name + ")", "offsets");
    return {base, hat};
}

struct ComparisonOptions {
    bool override_hypotheses = false;
    std::optional<SchemeParams> scheme;   ///< default: largest dissipation of the two problems
    double radius = 0.0;                  ///< impulse search radius; <= 0 uses the box diagonal
    int coarse = 32;
    /// No local refinement by default, so both solves use the same search set
    /// and the discrete scheme is exactly monotone.
    int refine = 0;
    std::optional<double> tolerance;      ///< default 10 (dt + dx)
};

struct ComparisonReport {
    double max_diff = 0.0;       ///< max over interior nodes of V - V^
    double max_positive = 0.0;   ///< max(0, max_diff)
    int k = 0;
    std::size_t node = 0;
    double tolerance = 0.0;
    bool pass = false;
    std::size_t nodes_compared = 0;
    AuditReport hypotheses;
    SchemeParams scheme;
    double radius = 0.0;
    SolveResult V, V_hat;
};

inline ComparisonReport compare_solutions(const ImpulseProblem& problem, const ImpulseProblem& hat,
                                          const AssumptionConstants& constants, const Grid& grid,
                                          const ComparisonOptions& options = {}) {
    ComparisonReport rep;
    SamplerSpec spec = SamplerSpec::over(grid);
    rep.hypotheses = audit_comparison_hypotheses(problem, hat, constants, nullptr, nullptr, spec);
    if (!rep.hypotheses.pass() && !options.override_hypotheses)
        throw HypothesisError("data are not ordered on samples (override to proceed)", rep.hypotheses);

    if (options.scheme) {
        rep.scheme = *options.scheme;
    } else {
        SchemeParams a = estimate_scheme(problem, grid), b = estimate_scheme(hat, grid);
        rep.scheme = a;
        for (int d = 0; d < grid.dim(); ++d) {
            rep.scheme.dissipation[d] = std::max(a.dissipation[d], b.dissipation[d]);
            rep.scheme.speed[d] = std::max(a.speed[d], b.speed[d]);
        }
    }
    SearchParams search;
    search.radius = options.radius > 0.0 ? options.radius : grid.diagonal();
    search.coarse = options.coarse;
    search.refine = options.refine;
    rep.radius = search.radius;

    rep.V = solve_qvi(problem, constants, grid, rep.scheme, search);
    rep.V_hat = solve_qvi(hat, constants, grid, rep.scheme, search);

    const std::vector<bool> mask = interior_mask(grid, rep.scheme);
    rep.max_diff = -std::numeric_limits<double>::infinity();
    const std::size_t m = grid.space_size();
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (!mask[j]) continue;
        ++rep.nodes_compared;
        double d = rep.V.value.values()[j] - rep.V_hat.value.values()[j];
        if (d > rep.max_diff) {
            rep.max_diff = d;
            rep.k = static_cast<int>(j / m);
            rep.node = j % m;
        }
    }
    rep.max_positive = std::max(0.0, rep.max_diff);
    rep.tolerance = options.tolerance ? *options.tolerance : 10.0 * grid.resolution();
    rep.pass = rep.nodes_compared > 0 && rep.max_diff <= rep.tolerance;
    return rep;
}

struct DoublingParams {
    double theta = 0.01;
    double nu = 2.0;
    double eps = 0.1;
    double delta = 0.1;
    double rho = 1e-3;
    double G = 10.0;

    void validate() const {
        auto require = [](bool ok, const char* key, const char* what) {
            if (!ok) throw ConfigError(what, key);
        };
        require(theta > 0, "theta", "theta must be positive");
        require(eps > 0, "eps", "eps must be positive");
        require(delta > 0, "delta", "delta must be positive");
        require(rho > 0, "rho", "rho must be positive");
        require(nu > 1, "nu", "nu must exceed 1");
        require(G > 1, "G", "G must exceed 1");
        require(theta * G < 1, "theta", "theta * G must be below 1");
    }
};

/// Upper bound on searched (t, s, x, y) tuples; the spatial stride grows
/// until the search fits.
inline constexpr std::size_t doubling_budget = 10'000'000;

struct DoublingDiagnostics {
    DoublingParams params;
    int k0 = 0, l0 = 0;              ///< time indices of t0, s0
    std::size_t i0 = 0, j0 = 0;      ///< spatial nodes of x0, y0
    double t0 = 0, s0 = 0;
    Vec x0{0, 0}, y0{0, 0};
    double phi_max = 0.0;            ///< Phi at the argmax
    double penalty = 0.0;            ///< phi at the argmax
    double residual_1e = 0.0;        ///< (1/eps)|t0-s0|^2 + (1/delta)|x0-y0|^2 - |dV| - |dV^|; <= 0
    double growth_lhs = 0.0;         ///< theta(<x0>+<y0>) + |t0-s0|^2/(2eps) + |x0-y0|^2/(2delta)
    double dt0 = 0.0, dx0 = 0.0;     ///< |t0-s0|, |x0-y0|
    int stride = 1;                  ///< spatial node stride of the searched set
    std::size_t tuples = 0;
};

namespace detail {

inline double bracket(const Vec& x, int n) { return std::sqrt(1.0 + norm(x, n) * norm(x, n)); }

inline std::vector<std::size_t> strided_nodes(const Grid& g, int stride) {
    std::vector<std::size_t> out;
    const int n = g.dim();
    for (int a = 0; a < g.x_nodes(0); a += stride)
        for (int b = 0; b < (n > 1 ? g.x_nodes(1) : 1); b += (n > 1 ? stride : 1)) out.push_back(g.flatten({a, b}));
    return out;
}

} // namespace detail

/// Penalty phi at grid tuple (k, l, i, j).
inline double doubling_penalty(const Grid& g, const DoublingParams& P, int k, int l, std::size_t i, std::size_t j) {
    const int n = g.dim();
    const double T = g.horizon(), t = g.t(k), s = g.t(l);
    const Vec x = g.point(i), y = g.point(j);
    Vec dxy{x[0] - y[0], x[1] - y[1]};
    const double dx2 = norm(dxy, n) * norm(dxy, n);
    // same operation order as the search loop
    const double w = P.theta * (2 * P.nu * T - t - s) / (2 * P.nu * T);
    const double time_part = -P.rho * (t + s) + (t - s) * (t - s) / (2 * P.eps);
    return w * (detail::bracket(x, n) + detail::bracket(y, n)) + time_part + dx2 / (2 * P.delta);
}

inline double doubling_phi(const GridFunction& V, const GridFunction& Vh, const DoublingParams& P, int k, int l,
                           std::size_t i, std::size_t j) {
    return (1 - P.theta * P.G) * V(k, i) - Vh(l, j) - doubling_penalty(V.grid(), P, k, l, i, j);
}

/// Exhaustive over all (t, s) node pairs and all pairs of a strided spatial
/// node set (the diagonal included, so (t0,t0,x0,x0) and (s0,s0,y0,y0) are
/// always searched). Ties keep the lexicographically first (k, l, i, j).
inline DoublingDiagnostics doubling_maximize(const GridFunction& V, const GridFunction& Vh, const DoublingParams& P) {
    P.validate();
    const Grid& g = V.grid();
    if (!(g == Vh.grid())) throw ConfigError("V and V^ live on different grids");
    const int n = g.dim();
    const std::size_t nt = static_cast<std::size_t>(g.t_nodes());

    int stride = 1;
    while (nt * nt * std::pow(detail::strided_nodes(g, stride).size(), 2.0) > static_cast<double>(doubling_budget))
        ++stride;
    const std::vector<std::size_t> S = detail::strided_nodes(g, stride);

    std::vector<double> br(S.size());
    for (std::size_t a = 0; a < S.size(); ++a) br[a] = detail::bracket(g.point(S[a]), n);
    std::vector<double> dist2(S.size() * S.size());
    for (std::size_t a = 0; a < S.size(); ++a)
        for (std::size_t b = 0; b < S.size(); ++b) {
            Vec x = g.point(S[a]), y = g.point(S[b]);
            Vec d{x[0] - y[0], x[1] - y[1]};
            dist2[a * S.size() + b] = norm(d, n) * norm(d, n);
        }

    DoublingDiagnostics out;
    out.params = P;
    out.stride = stride;
    double best = -std::numeric_limits<double>::infinity();
    const double T = g.horizon();
    for (int k = 0; k < g.t_nodes(); ++k) {
        for (int l = 0; l < g.t_nodes(); ++l) {
            const double t = g.t(k), s = g.t(l);
            const double w = P.theta * (2 * P.nu * T - t - s) / (2 * P.nu * T);
            const double time_part = -P.rho * (t + s) + (t - s) * (t - s) / (2 * P.eps);
            for (std::size_t a = 0; a < S.size(); ++a) {
                const double va = (1 - P.theta * P.G) * V(k, S[a]);
                for (std::size_t b = 0; b < S.size(); ++b) {
                    double penalty = w * (br[a] + br[b]) + time_part + dist2[a * S.size() + b] / (2 * P.delta);
                    double phi = va - Vh(l, S[b]) - penalty;
                    if (phi > best) {
                        best = phi;
                        out.k0 = k;
                        out.l0 = l;
                        out.i0 = S[a];
                        out.j0 = S[b];
                    }
                }
            }
        }
    }
    out.tuples = nt * nt * S.size() * S.size();
    // report Phi through the same formula used for certificates
    out.phi_max = doubling_phi(V, Vh, P, out.k0, out.l0, out.i0, out.j0);
    out.penalty = doubling_penalty(g, P, out.k0, out.l0, out.i0, out.j0);
    out.t0 = g.t(out.k0);
    out.s0 = g.t(out.l0);
    out.x0 = g.point(out.i0);
    out.y0 = g.point(out.j0);
    Vec d{out.x0[0] - out.y0[0], out.x0[1] - out.y0[1]};
    out.dt0 = std::fabs(out.t0 - out.s0);
    out.dx0 = norm(d, n);
    out.residual_1e = out.dt0 * out.dt0 / P.eps + out.dx0 * out.dx0 / P.delta -
                      std::fabs(V(out.k0, out.i0) - V(out.l0, out.j0)) -
                      std::fabs(Vh(out.k0, out.i0) - Vh(out.l0, out.j0));
    out.growth_lhs = P.theta * (detail::bracket(out.x0, n) + detail::bracket(out.y0, n)) +
                     out.dt0 * out.dt0 / (2 * P.eps) + out.dx0 * out.dx0 / (2 * P.delta);
    return out;
}

struct DoublingSweep {
    std::vector<DoublingDiagnostics> levels;
    double fitted_C = 0.0;          ///< smallest C with growth_lhs <= C / theta^{gamma/(1-gamma)} on every level
    bool residuals_nonpositive = true;
    bool trend_nonincreasing = true;
};

/// doubling_maximize with eps = delta over `scales` (default 0.1, 0.05, 0.025).
inline DoublingSweep doubling_sweep(const GridFunction& V, const GridFunction& Vh, DoublingParams base,
                                   double gamma = 0.0, std::vector<double> scales = {0.1, 0.05, 0.025}) {
    DoublingSweep sweep;
    for (double e : scales) {
        base.eps = base.delta = e;
        sweep.levels.push_back(doubling_maximize(V, Vh, base));
    }
    const double factor = std::pow(base.theta, gamma / (1.0 - gamma));
    for (std::size_t i = 0; i < sweep.levels.size(); ++i) {
        const DoublingDiagnostics& d = sweep.levels[i];
        sweep.fitted_C = std::max(sweep.fitted_C, d.growth_lhs * factor);
        sweep.residuals_nonpositive = sweep.residuals_nonpositive && d.residual_1e <= 0.0;
        if (i > 0) {
            const DoublingDiagnostics& p = sweep.levels[i - 1];
            sweep.trend_nonincreasing = sweep.trend_nonincreasing && d.dt0 <= p.dt0 && d.dx0 <= p.dx0;
        }
    }
    return sweep;
}

} // namespace qvi
