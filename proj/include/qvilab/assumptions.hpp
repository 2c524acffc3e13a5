// Sampled audits of the structural hypotheses: the growth and lower bounds
// on H and h, coercivity / regularity / subadditivity of the impulse cost,
// and the ordering and growth hypotheses of the comparison theorem.
//
// Every check reports min over samples of a margin that must be >= 0. A
// sample where an expression raises a domain error counts as margin -inf.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"

namespace qvi {

/// Radical-inverse (Halton) sequence; the first N points of a longer run are
/// the same N points, which makes audits monotone in the sample count.
class Halton {
public:
    explicit Halton(int dims, std::uint64_t skip = 0) : dims_(dims), index_(skip) {
        if (dims < 1 || dims > static_cast<int>(primes.size()))
            throw ConfigError("Halton dimension out of range");
    }

    /// Next point in [0,1)^dims.
    std::vector<double> next() {
        ++index_;
        std::vector<double> u(static_cast<std::size_t>(dims_));
        for (int d = 0; d < dims_; ++d) u[static_cast<std::size_t>(d)] = radical_inverse(index_, primes[d]);
        return u;
    }

    static double radical_inverse(std::uint64_t i, std::uint64_t base) {
        double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
        while (i > 0) {
            r += f * static_cast<double>(i % base);
            i /= base;
            f *= inv;
        }
        return r;
    }

private:
    static constexpr std::array<std::uint64_t, 24> primes{2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                                          41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
    int dims_;
    std::uint64_t index_;
};

/// Ranges and counts for sampled audits.
struct SamplerSpec {
    std::size_t points = 4096;
    std::uint64_t seed = 0;      ///< offset into the low-discrepancy sequence
    Vec x_min{-5.0, -5.0};
    Vec x_max{5.0, 5.0};
    double p_max = 10.0;         ///< |p_d| <= p_max
    double xi_max = 10.0;        ///< |xi| <= xi_max
    std::optional<Grid> grid;    ///< its nodes are added to x-only checks
    double exact_tol = 1e-9;
    double scan_tol = 1e-6;

    static SamplerSpec over(const Grid& g) {
        SamplerSpec s;
        for (int d = 0; d < g.dim(); ++d) {
            s.x_min[d] = g.x_min(d);
            s.x_max[d] = g.x_max(d);
        }
        s.grid = g;
        return s;
    }
};

struct AuditCheck {
    std::string name;
    std::size_t points_tested = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    std::vector<double> worst_point;
    double tolerance = 0.0;
    bool pass = true;
    std::size_t domain_errors = 0;
    std::string note;

    /// Lower margin wins; equal margins keep the lexicographically smaller point.
    void record(double margin, const std::vector<double>& point) {
        ++points_tested;
        if (margin < worst_margin || (margin == worst_margin && (worst_point.empty() || point < worst_point))) {
            worst_margin = margin;
            worst_point = point;
        }
    }

    void finish() { pass = points_tested > 0 && worst_margin >= -tolerance; }
};

struct AuditReport {
    std::vector<AuditCheck> checks;

    bool pass() const {
        for (auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    const AuditCheck& check(const std::string& name) const {
        for (auto& c : checks)
            if (c.name == name) return c;
        throw std::out_of_range("no audit check named " + name);
    }

    void append(const AuditReport& other) { checks.insert(checks.end(), other.checks.begin(), other.checks.end()); }
};

namespace detail {

inline double pow_abs(double r, double e) { return e == 0.0 ? 1.0 : std::pow(r, e); }

/// Runs `margin(point)` and records the outcome, mapping domain errors to -inf.
template <class F>
void probe(AuditCheck& check, const std::vector<double>& point, F&& margin) {
    try {
        check.record(margin(), point);
    } catch (const DomainError& e) {
        ++check.domain_errors;
        if (check.note.empty()) check.note = e.what();
        check.record(-std::numeric_limits<double>::infinity(), point);
    }
}

struct Draw {
    const SamplerSpec& spec;
    int n;
    const std::vector<double>& u;
    std::size_t at = 0;

    double unit() { return u[at++]; }
    double t(double T) { return T * unit(); }
    Vec x() {
        Vec v{0.0, 0.0};
        for (int d = 0; d < n; ++d) v[d] = spec.x_min[d] + unit() * (spec.x_max[d] - spec.x_min[d]);
        return v;
    }
    Vec p() {
        Vec v{0.0, 0.0};
        for (int d = 0; d < n; ++d) v[d] = spec.p_max * (2.0 * unit() - 1.0);
        return v;
    }
    /// A point of the cone as a nonnegative combination of its rays.
    Vec xi(const Cone& cone) {
        Vec v{0.0, 0.0};
        const auto& rays = cone.rays();
        for (const Vec& r : rays) {
            double w = unit();
            for (int d = 0; d < n; ++d) v[d] += w * r[d];
        }
        double len = norm(v, n);
        double scale = spec.xi_max * unit();
        if (len > 0.0)
            for (int d = 0; d < n; ++d) v[d] *= scale / len;
        return v;
    }
};

inline std::vector<double> pack(std::initializer_list<double> head, std::initializer_list<std::pair<const Vec*, int>> vecs) {
    std::vector<double> out(head);
    for (auto [v, n] : vecs)
        for (int d = 0; d < n; ++d) out.push_back((*v)[d]);
    return out;
}

inline int cost_dims(const Cone& cone) { return static_cast<int>(cone.rays().size()) + 1; }

/// Empirical modulus: the largest |f(a) - f(b)| over sampled pairs whose
/// argument distance is at most r, at r, r/2, r/4. Passes when the three
/// estimates are nonincreasing and the last one lies below the first.
template <class Pair>
AuditCheck empirical_modulus(const std::string& name, const SamplerSpec& spec, int dims, double r0, Pair&& pair) {
    AuditCheck check;
    check.name = name;
    check.tolerance = spec.exact_tol;
    double omega[3] = {0.0, 0.0, 0.0};
    for (int level = 0; level < 3; ++level) {
        const double r = r0 / static_cast<double>(1 << level);
        Halton seq(dims, spec.seed);
        for (std::size_t i = 0; i < spec.points; ++i) {
            auto u = seq.next();
            try {
                omega[level] = std::max(omega[level], pair(u, r));
            } catch (const DomainError& e) {
                ++check.domain_errors;
                if (check.note.empty()) check.note = e.what();
            }
        }
    }
    for (int level = 0; level < 2; ++level)
        check.record(omega[level] - omega[level + 1], {r0 / static_cast<double>(1 << level)});
    if (omega[0] > 0.0) check.record(omega[0] - omega[2] - 1e-12, {r0});
    char buf[160];
    std::snprintf(buf, sizeof buf, "omega estimates %.17g, %.17g, %.17g", omega[0], omega[1], omega[2]);
    check.note = check.note.empty() ? buf : std::string(buf) + "; " + check.note;
    if (check.domain_errors) check.record(-std::numeric_limits<double>::infinity(), {r0});
    check.finish();
    return check;
}

} // namespace detail

/// Lower bound on h, growth bound on H, Lipschitz dependence on p and an
/// empirical modulus in (t, x).
inline AuditReport audit_H1(const ImpulseProblem& problem, const AssumptionConstants& c, const SamplerSpec& spec) {
    const int n = problem.n;
    AuditReport report;

    AuditCheck lower;
    lower.name = "h_lower_bound";
    lower.tolerance = spec.scan_tol;
    {
        Halton seq(n, spec.seed);
        for (std::size_t i = 0; i < spec.points; ++i) {
            auto u = seq.next();
            detail::Draw draw{spec, n, u};
            Vec x = draw.x();
            detail::probe(lower, detail::pack({}, {{&x, n}}), [&] { return problem.h(x) + c.h0; });
        }
        if (spec.grid)
            for (std::size_t i = 0; i < spec.grid->space_size(); ++i) {
                Vec x = spec.grid->point(i);
                detail::probe(lower, detail::pack({}, {{&x, n}}), [&] { return problem.h(x) + c.h0; });
            }
    }
    lower.finish();
    report.checks.push_back(lower);

    AuditCheck growth;
    growth.name = "H_growth";
    growth.tolerance = spec.exact_tol;
    AuditCheck lipschitz;
    lipschitz.name = "H_p_lipschitz";
    lipschitz.tolerance = spec.exact_tol;
    {
        Halton seq(1 + 3 * n, spec.seed);
        for (std::size_t i = 0; i < spec.points; ++i) {
            auto u = seq.next();
            detail::Draw draw{spec, n, u};
            double t = draw.t(problem.T);
            Vec x = draw.x(), p = draw.p(), q = draw.p();
            const double weight = c.L * (1.0 + detail::pow_abs(norm(x, n), c.mu));
            detail::probe(growth, detail::pack({t}, {{&x, n}, {&p, n}}), [&] {
                return weight * (1.0 + norm(p, n)) - std::fabs(problem.H(t, x, p));
            });
            Vec dp{p[0] - q[0], p[1] - q[1]};
            detail::probe(lipschitz, detail::pack({t}, {{&x, n}, {&p, n}, {&q, n}}), [&] {
                return weight * norm(dp, n) - std::fabs(problem.H(t, x, p) - problem.H(t, x, q));
            });
        }
    }
    growth.finish();
    lipschitz.finish();
    report.checks.push_back(growth);
    report.checks.push_back(lipschitz);

    // t and s are sampled independently
    const double r0 = 0.1 * (1.0 + problem.T);
    report.checks.push_back(detail::empirical_modulus("H_modulus", spec, 2 + 3 * n, r0,
                                                      [&](const std::vector<double>& u, double r) {
        detail::Draw draw{spec, n, u};
        double t = draw.t(problem.T);
        Vec x = draw.x(), p = draw.p();
        double s = std::clamp(t + r * (2.0 * draw.unit() - 1.0) / 2.0, 0.0, problem.T);
        Vec y = x;
        for (int d = 0; d < n; ++d) y[d] += r * (2.0 * draw.unit() - 1.0) / (2.0 * n);
        return std::fabs(problem.H(t, x, p) - problem.H(s, y, p));
    }));
    return report;
}

/// Coercivity (with positivity), regularity in (t,x) and subadditivity of ell.
inline AuditReport audit_H2(const ImpulseProblem& problem, const AssumptionConstants& c, const SamplerSpec& spec) {
    const int n = problem.n;
    const int k = detail::cost_dims(problem.cone);
    AuditReport report;

    AuditCheck positive;
    positive.name = "ell_positive";
    positive.tolerance = 0.0;
    AuditCheck coercive;
    coercive.name = "ell_coercivity";
    coercive.tolerance = spec.scan_tol;
    AuditCheck subadditive;
    subadditive.name = "ell_subadditivity";
    subadditive.tolerance = spec.exact_tol;
    {
        Halton seq(1 + n + 2 * k, spec.seed);
        for (std::size_t i = 0; i < spec.points; ++i) {
            auto u = seq.next();
            detail::Draw draw{spec, n, u};
            double t = draw.t(problem.T);
            Vec x = draw.x(), xi = draw.xi(problem.cone), xj = draw.xi(problem.cone);
            auto at = detail::pack({t}, {{&x, n}, {&xi, n}});
            detail::probe(positive, at, [&] { return problem.ell(t, x, xi) - 1e-300; });
            detail::probe(coercive, at, [&] {
                return problem.ell(t, x, xi) - c.ell0 - c.alpha * std::pow(norm(xi, n), c.beta);
            });
            detail::probe(subadditive, detail::pack({t}, {{&x, n}, {&xi, n}, {&xj, n}}), [&] {
                Vec x1{x[0] + xi[0], x[1] + xi[1]}, x2{x[0] + xj[0], x[1] + xj[1]};
                Vec both{xi[0] + xj[0], xi[1] + xj[1]};
                double one_then_other = problem.ell(t, x, xi) + problem.ell(t, x1, xj);
                double other_then_one = problem.ell(t, x, xj) + problem.ell(t, x2, xi);
                return std::min(one_then_other, other_then_one) - problem.ell(t, x, both) - c.delta0;
            });
        }
    }
    positive.finish();
    coercive.finish();
    subadditive.finish();
    report.checks.push_back(positive);
    report.checks.push_back(coercive);

    const double r0 = 0.1 * (1.0 + problem.T);
    report.checks.push_back(detail::empirical_modulus("ell_modulus", spec, 2 + n + k + n, r0,
                                                      [&](const std::vector<double>& u, double r) {
        detail::Draw draw{spec, n, u};
        double t = draw.t(problem.T);
        Vec x = draw.x(), xi = draw.xi(problem.cone);
        double s = std::clamp(t + r * (2.0 * draw.unit() - 1.0) / 2.0, 0.0, problem.T);
        Vec y = x;
        for (int d = 0; d < n; ++d) y[d] += r * (2.0 * draw.unit() - 1.0) / (2.0 * n);
        return std::fabs(problem.ell(t, x, xi) - problem.ell(s, y, xi));
    }));
    report.checks.push_back(subadditive);
    return report;
}

/// Node pairs per slice used by the Hoelder check are capped at this count;
/// spatial nodes are strided to stay below it.
inline constexpr std::size_t holder_pair_budget = 2'000'000;

/// Order of the data (h <= h^, H <= H^, ell <= ell^) on samples, and the
/// growth and Hoelder bounds of V and V^ on the grid.
inline AuditReport audit_comparison_hypotheses(const ImpulseProblem& problem, const ImpulseProblem& hat,
                                               const AssumptionConstants& c, const GridFunction* V,
                                               const GridFunction* V_hat, const SamplerSpec& spec) {
    if (problem.n != hat.n) throw ConfigError("problems have different dimensions");
    if (problem.T != hat.T) throw ConfigError("problems have different horizons");
    const int n = problem.n;
    const int k = detail::cost_dims(problem.cone);
    AuditReport report;

    AuditCheck oh, oH, oell;
    oh.name = "order_h";
    oH.name = "order_H";
    oell.name = "order_ell";
    oh.tolerance = oH.tolerance = oell.tolerance = spec.exact_tol;
    {
        Halton seq(1 + 2 * n + k, spec.seed);
        for (std::size_t i = 0; i < spec.points; ++i) {
            auto u = seq.next();
            detail::Draw draw{spec, n, u};
            double t = draw.t(problem.T);
            Vec x = draw.x(), p = draw.p(), xi = draw.xi(problem.cone);
            detail::probe(oh, detail::pack({}, {{&x, n}}), [&] { return hat.h(x) - problem.h(x); });
            detail::probe(oH, detail::pack({t}, {{&x, n}, {&p, n}}),
                          [&] { return hat.H(t, x, p) - problem.H(t, x, p); });
            detail::probe(oell, detail::pack({t}, {{&x, n}, {&xi, n}}),
                          [&] { return hat.ell(t, x, xi) - problem.ell(t, x, xi); });
        }
        if (spec.grid)
            for (std::size_t i = 0; i < spec.grid->space_size(); ++i) {
                Vec x = spec.grid->point(i);
                detail::probe(oh, detail::pack({}, {{&x, n}}), [&] { return hat.h(x) - problem.h(x); });
            }
    }
    for (AuditCheck* chk : {&oh, &oH, &oell}) {
        chk->finish();
        report.checks.push_back(*chk);
    }

    auto growth_and_holder = [&](const GridFunction& W, const std::string& label) {
        const Grid& g = W.grid();
        AuditCheck growth;
        growth.name = "growth_" + label;
        growth.tolerance = spec.exact_tol;
        for (int kk = 0; kk < g.t_nodes(); ++kk)
            for (std::size_t i = 0; i < g.space_size(); ++i) {
                Vec x = g.point(i);
                growth.record(c.C * (1.0 + detail::pow_abs(norm(x, n), c.gamma)) - std::fabs(W(kk, i)),
                              detail::pack({g.t(kk)}, {{&x, n}}));
            }
        growth.finish();

        AuditCheck holder;
        holder.name = "holder_" + label;
        holder.tolerance = spec.exact_tol;
        std::size_t nodes = g.space_size();
        std::size_t per_slice = std::max<std::size_t>(1, holder_pair_budget / g.t_nodes());
        std::size_t stride = 1;
        while ((nodes / stride) * (nodes / stride) > per_slice) ++stride;
        for (int kk = 0; kk < g.t_nodes(); ++kk)
            for (std::size_t i = 0; i < nodes; i += stride)
                for (std::size_t j = i + stride; j < nodes; j += stride) {
                    Vec x = g.point(i), y = g.point(j);
                    Vec dxy{x[0] - y[0], x[1] - y[1]};
                    holder.record(c.C * (1.0 + std::pow(norm(dxy, n), c.kappa)) - std::fabs(W(kk, i) - W(kk, j)),
                                  detail::pack({g.t(kk)}, {{&x, n}, {&y, n}}));
                }
        holder.note = "node stride " + std::to_string(stride);
        holder.finish();
        report.checks.push_back(growth);
        report.checks.push_back(holder);
    };
    if (V) growth_and_holder(*V, "V");
    if (V_hat) growth_and_holder(*V_hat, "V_hat");
    return report;
}

} // namespace qvi
