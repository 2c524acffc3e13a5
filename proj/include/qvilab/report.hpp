// JSON and CSV emission for every report type.

#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "comparison.hpp"
#include "config.hpp"
#include "example.hpp"
#include "viscosity.hpp"

namespace qvi::report {

using nlohmann::json;

inline std::string real17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json point(const Grid& g, int k, std::size_t i) {
    json x = json::array();
    Vec p = g.point(i);
    for (int d = 0; d < g.dim(); ++d) x.push_back(p[d]);
    return {{"t", g.t(k)}, {"x", x}};
}

inline json vec(const Vec& v, int n) {
    json a = json::array();
    for (int d = 0; d < n; ++d) a.push_back(v[d]);
    return a;
}

inline json summary(const GridFunction& f) {
    auto [kmin, imin] = f.argmin();
    auto [kmax, imax] = f.argmax();
    return {{"min", f.min()}, {"max", f.max()}, {"argmin", point(f.grid(), kmin, imin)},
            {"argmax", point(f.grid(), kmax, imax)}};
}

inline json to_json(const AuditCheck& c) {
    return {{"name", c.name},
            {"points_tested", c.points_tested},
            {"worst_margin", c.worst_margin},
            {"worst_point", c.worst_point},
            {"tolerance", c.tolerance},
            {"pass", c.pass},
            {"domain_errors", c.domain_errors},
            {"note", c.note}};
}

inline json to_json(const AuditReport& r) {
    json checks = json::array();
    for (auto& c : r.checks) checks.push_back(to_json(c));
    return {{"pass", r.pass()}, {"checks", checks}};
}

inline json to_json(const Grid& g) {
    json lo = json::array(), hi = json::array(), nodes = json::array();
    for (int d = 0; d < g.dim(); ++d) {
        lo.push_back(g.x_min(d));
        hi.push_back(g.x_max(d));
        nodes.push_back(g.x_nodes(d));
    }
    return {{"n", g.dim()}, {"T", g.horizon()}, {"t_nodes", g.t_nodes()}, {"x_min", lo},
            {"x_max", hi},  {"x_nodes", nodes},  {"dt", g.dt()},           {"dx_max", g.max_dx()}};
}

inline json to_json(const SchemeParams& s, const Grid& g) {
    return {{"dissipation", vec(s.dissipation, g.dim())},
            {"speed", vec(s.speed, g.dim())},
            {"cfl_safety", s.cfl_safety},
            {"cfl_number", s.cfl_number(g)},
            {"fp_tol", s.fp_tol},
            {"fp_max_iter", s.fp_max_iter},
            {"boundary", "clamped-edge"}};
}

inline json to_json(const SolveResult& r) {
    const Grid& g = r.value.grid();
    std::size_t intervention = 0, truncated = 0;
    for (bool b : r.intervention) intervention += b;
    for (bool b : r.truncated) truncated += b;
    json j{{"grid", to_json(g)},
           {"scheme", to_json(r.scheme, g)},
           {"mode", r.gap ? "qvi" : "hjb"},
           {"value", summary(r.value)},
           {"residual_max", r.residual_max},
           {"obstacle_iterations", r.obstacle_iterations},
           {"intervention_nodes", intervention},
           {"intervention_tol", r.intervention_tol},
           {"truncated_searches", truncated},
           {"search_radius_max", r.search_radius_max},
           {"hypotheses", r.hypotheses_audited ? "audited" : "hypotheses unaudited"}};
    return j;
}

inline const char* to_string(Branch b) { return b == Branch::hjb ? "hjb" : "constraint"; }

/// Viscosity report; lists at most `limit` entries of each violation kind.
inline json to_json(const ViscosityReport& r, const Grid& g, std::size_t limit = 200) {
    auto bbox = [&](const auto& list) -> json {
        if (list.empty()) return nullptr;
        double t0 = 1e300, t1 = -1e300;
        Vec lo{1e300, 1e300}, hi{-1e300, -1e300};
        for (auto& v : list) {
            t0 = std::min(t0, g.t(v.k));
            t1 = std::max(t1, g.t(v.k));
            Vec x = g.point(v.node);
            for (int d = 0; d < g.dim(); ++d) {
                lo[d] = std::min(lo[d], x[d]);
                hi[d] = std::max(hi[d], x[d]);
            }
        }
        return {{"t", {t0, t1}}, {"x_min", vec(lo, g.dim())}, {"x_max", vec(hi, g.dim())}};
    };
    json v = json::array(), c = json::array(), t = json::array();
    for (std::size_t i = 0; i < r.violations.size() && i < limit; ++i) {
        const Violation& x = r.violations[i];
        json e = point(g, x.k, x.node);
        e["probe"] = x.probe;
        e["margin"] = x.margin;
        e["tolerance"] = x.tolerance;
        e["branch"] = to_string(x.branch);
        v.push_back(e);
    }
    auto nodes = [&](const std::vector<NodeViolation>& list, json& out) {
        for (std::size_t i = 0; i < list.size() && i < limit; ++i) {
            json e = point(g, list[i].k, list[i].node);
            e["margin"] = list[i].margin;
            out.push_back(e);
        }
    };
    nodes(r.constraint_violations, c);
    nodes(r.terminal_violations, t);
    return {{"variant", to_string(r.variant)},
            {"pass", r.pass()},
            {"verdict", r.pass() ? "no violation found" : "violations found"},
            {"points_tested", r.points_tested},
            {"probes_tested", r.probes_tested},
            {"probes_per_point", r.probes_per_point()},
            {"base_tolerance", r.base_tolerance},
            {"constraint_tol", r.constraint_tol},
            {"violation_count", r.violations.size()},
            {"constraint_violation_count", r.constraint_violations.size()},
            {"terminal_violation_count", r.terminal_violations.size()},
            {"violation_region", bbox(r.violations)},
            {"constraint_violation_region", bbox(r.constraint_violations)},
            {"violations", v},
            {"constraint_violations", c},
            {"terminal_violations", t},
            {"listed_limit", limit}};
}

inline void write_violations_csv(std::ostream& os, const ViscosityReport& r, const Grid& g) {
    os << "kind,t";
    for (int d = 0; d < g.dim(); ++d) os << ",x" << d + 1;
    os << ",probe,margin\n";
    auto row = [&](const char* kind, int k, std::size_t node, int probe, double margin) {
        os << kind << ',' << real17(g.t(k));
        Vec x = g.point(node);
        for (int d = 0; d < g.dim(); ++d) os << ',' << real17(x[d]);
        os << ',' << probe << ',' << real17(margin) << '\n';
    };
    for (auto& v : r.violations) row(v.branch == Branch::hjb ? "hjb" : "constraint", v.k, v.node, v.probe, v.margin);
    for (auto& v : r.constraint_violations) row("constraint_node", v.k, v.node, -1, v.margin);
    for (auto& v : r.terminal_violations) row("terminal", v.k, v.node, -1, v.margin);
}

inline json to_json(const ComparisonReport& r, const Grid& g) {
    return {{"max_diff", r.max_diff},
            {"max_positive", r.max_positive},
            {"argmax", point(g, r.k, r.node)},
            {"tolerance", r.tolerance},
            {"pass", r.pass},
            {"nodes_compared", r.nodes_compared},
            {"search_radius", r.radius},
            {"scheme", to_json(r.scheme, g)},
            {"hypotheses", to_json(r.hypotheses)}};
}

inline json to_json(const DoublingDiagnostics& d, int n) {
    return {{"eps", d.params.eps},
            {"delta", d.params.delta},
            {"theta", d.params.theta},
            {"G", d.params.G},
            {"nu", d.params.nu},
            {"rho", d.params.rho},
            {"t0", d.t0},
            {"s0", d.s0},
            {"x0", vec(d.x0, n)},
            {"y0", vec(d.y0, n)},
            {"phi_max", d.phi_max},
            {"penalty", d.penalty},
            {"residual_1e", d.residual_1e},
            {"growth_lhs", d.growth_lhs},
            {"abs_t0_s0", d.dt0},
            {"abs_x0_y0", d.dx0},
            {"stride", d.stride},
            {"tuples", d.tuples}};
}

inline json to_json(const DoublingSweep& s, int n) {
    json levels = json::array();
    for (auto& d : s.levels) levels.push_back(to_json(d, n));
    return {{"levels", levels},
            {"fitted_C", s.fitted_C},
            {"residuals_nonpositive", s.residuals_nonpositive},
            {"trend_nonincreasing", s.trend_nonincreasing}};
}

inline void write_trend_csv(std::ostream& os, const DoublingSweep& s) {
    os << "eps,delta,abs_t0_s0,abs_x0_y0,residual_1e,growth_lhs,phi_max\n";
    for (auto& d : s.levels)
        os << real17(d.params.eps) << ',' << real17(d.params.delta) << ',' << real17(d.dt0) << ',' << real17(d.dx0)
           << ',' << real17(d.residual_1e) << ',' << real17(d.growth_lhs) << ',' << real17(d.phi_max) << '\n';
}

inline json to_json(const example::ExampleInstance& e) {
    return {{"T", e.T},
            {"t0", e.t0},
            {"x0", e.x0},
            {"ell0", e.ell0},
            {"requested_ell0", e.requested_ell0},
            {"shrink_steps", e.shrink_steps},
            {"xi1", e.xi1},
            {"xi2", e.xi2},
            {"root_residuals", {e.root_residual1, e.root_residual2}},
            {"N[V](t0,x0)", e.obstacle_value},
            {"V(t0,x0)", e.value},
            {"gap", e.gap},
            {"needs_shrink", e.needs_shrink},
            {"delta", e.delta},
            {"g", e.g_source},
            {"g_height", e.g_height}};
}

inline json to_json(const example::SeparationReport& r, const Grid& g) {
    return {{"classical_verdict", r.classical_pass ? "PASS" : "FAIL"},
            {"modified_verdict", r.modified_fail ? "FAIL" : "PASS"},
            {"hjb_sub_verdict", r.hjb_sub_pass ? "PASS" : "FAIL"},
            {"separation_exhibited", r.separation_exhibited},
            {"separation_note", r.separation_exhibited ? "the two super-solution definitions differ on this instance"
                                                       : "separation not exhibited on this instance"},
            {"negative_gap_region_nodes", r.region_nodes},
            {"constraint_violations", r.modified.constraint_violations.size()},
            {"violations_outside_region", r.violations_outside_region},
            {"violations_outside_delta_diamond", r.violations_outside_diamond},
            {"grid_gap_at_center", r.grid_gap_at_center},
            {"classical", to_json(r.classical, g, 20)},
            {"modified", to_json(r.modified, g, 20)},
            {"hjb_sub", to_json(r.hjb_sub, g, 20)}};
}

inline void write_gap_csv(std::ostream& os, const example::SeparationReport& r) {
    os << "x1,grid_gap,exact_gap\n";
    for (std::size_t i = 0; i < r.slice_x.size(); ++i)
        os << real17(r.slice_x[i]) << ',' << real17(r.slice_grid_gap[i]) << ',' << real17(r.slice_exact_gap[i]) << '\n';
}

inline void write_regions_csv(std::ostream& os, const RegionMap& m, const Grid& g) {
    os << "t";
    for (int d = 0; d < g.dim(); ++d) os << ",x" << d + 1;
    os << ",region";
    for (int d = 0; d < g.dim(); ++d) os << ",xi" << d + 1;
    os << '\n';
    const std::size_t s = g.space_size();
    for (std::size_t j = 0; j < g.size(); ++j) {
        const int k = static_cast<int>(j / s);
        os << real17(g.t(k));
        Vec x = g.point(j % s);
        for (int d = 0; d < g.dim(); ++d) os << ',' << real17(x[d]);
        os << ',' << (m.region[j] == Region::intervention ? "intervention" : "continuation");
        for (int d = 0; d < g.dim(); ++d) os << ',' << real17(m.jump[j][d]);
        os << '\n';
    }
}

} // namespace qvi::report
