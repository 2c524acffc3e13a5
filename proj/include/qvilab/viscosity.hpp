// Grid checkers for viscosity sub/super-solution definitions.
//
// Smooth test functions are replaced by quadratics
//
//   phi(t,x) = V0 + a (t-t0) + p.(x-x0) + s (kappa/2) (|t-t0|^2 + |x-x0|^2)
//
// with s = +1 for SUB probes (phi touches V from above: V - phi has a local
// max at the centre) and s = -1 for SUPER probes (touching from below). A
// probe is counted only when the touching condition holds on every node of
// the (2r+1)-node neighbourhood.
//
// Slopes per axis are the forward quotient, the backward quotient and their
// midpoint; every combination is tried with kappa = c * max(1, m) for each
// multiplier c, m being the largest local second difference. The touching
// probe uses midpoint slopes with the smallest admissible kappa, so every
// tested node has at least one counted probe.
//
// A grid checker can refute, never certify: a clean report means no
// violation was found on the probes tried.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "obstacle.hpp"

namespace qvi {

enum class Variant { hjb_sub, hjb_super, qvi_sub, qvi_sub_lemma, qvi_super_classical, qvi_super_modified, constraint };

enum class Side { sub, super };

enum class Branch { hjb, constraint };

inline const char* to_string(Variant v) {
    switch (v) {
    case Variant::hjb_sub: return "hjb-sub";
    case Variant::hjb_super: return "hjb-super";
    case Variant::qvi_sub: return "qvi-sub";
    case Variant::qvi_sub_lemma: return "qvi-sub-lemma";
    case Variant::qvi_super_classical: return "qvi-super-classical";
    case Variant::qvi_super_modified: return "qvi-super-modified";
    case Variant::constraint: return "constraint";
    }
    return "?";
}

inline Variant parse_variant(const std::string& name) {
    for (Variant v : {Variant::hjb_sub, Variant::hjb_super, Variant::qvi_sub, Variant::qvi_sub_lemma,
                      Variant::qvi_super_classical, Variant::qvi_super_modified, Variant::constraint})
        if (name == to_string(v)) return v;
    throw ConfigError("unknown variant '" + name + "'", "variant");
}

struct ProbeSpec {
    int radius = 3;                             ///< neighbourhood half-width in nodes
    std::vector<double> multipliers{0.0, 1.0, 10.0};
    bool touching_probe = true;
    std::optional<double> tolerance;            ///< base tolerance; default 10 (dt + dx)
    double constraint_tol = 1e-6;
    double terminal_tol = 1e-9;
    int t_stride = 1;
    int x_stride = 1;
    SearchParams search{};
    bool keep_probes = false;
};

struct JetProbe {
    int k = 0;
    std::size_t node = 0;
    Side side = Side::sub;
    double a = 0.0;
    Vec p{0.0, 0.0};
    double kappa = 0.0;
    int radius = 3;
    bool touching = false;
};

struct Violation {
    int k = 0;
    std::size_t node = 0;
    int probe = -1;          ///< index within the node's probe list
    double margin = 0.0;
    double tolerance = 0.0;
    Branch branch = Branch::hjb;

    auto key() const { return std::tuple(k, node, probe); }
};

struct NodeViolation {
    int k = 0;
    std::size_t node = 0;
    double margin = 0.0;

    auto key() const { return std::tuple(k, node); }
};

struct ViscosityReport {
    Variant variant = Variant::qvi_sub;
    std::size_t points_tested = 0;
    std::size_t probes_tested = 0;
    double base_tolerance = 0.0;
    double constraint_tol = 0.0;
    std::vector<Violation> violations;
    std::vector<NodeViolation> constraint_violations;
    std::vector<NodeViolation> terminal_violations;
    std::vector<JetProbe> probes;  ///< only with ProbeSpec::keep_probes

    bool pass() const { return violations.empty() && constraint_violations.empty() && terminal_violations.empty(); }

    double probes_per_point() const {
        return points_tested ? static_cast<double>(probes_tested) / static_cast<double>(points_tested) : 0.0;
    }
};

/// Re-checks the touching condition of a stored probe.
inline bool probe_touches(const GridFunction& V, const JetProbe& probe, double slack_factor = 1e-12) {
    const Grid& g = V.grid();
    const int n = g.dim();
    const double V0 = V(probe.k, probe.node);
    const double slack = slack_factor * (1.0 + std::fabs(V0));
    const auto c = g.unflatten(probe.node);
    const Vec x0 = g.point(probe.node);
    const double t0 = g.t(probe.k);
    const double s = probe.side == Side::sub ? 1.0 : -1.0;
    const int r = probe.radius;
    for (int dk = -r; dk <= r; ++dk) {
        int k = probe.k + dk;
        if (k < 0 || k >= g.t_nodes()) continue;
        for (int a = -r; a <= r; ++a) {
            for (int b = (n > 1 ? -r : 0); b <= (n > 1 ? r : 0); ++b) {
                int i0 = c[0] + a, i1 = c[1] + b;
                if (i0 < 0 || i0 >= g.x_nodes(0) || (n > 1 && (i1 < 0 || i1 >= g.x_nodes(1)))) continue;
                std::size_t j = g.flatten({i0, i1});
                Vec x = g.point(j);
                double dt = g.t(k) - t0, lin = probe.a * dt, d2 = dt * dt;
                for (int d = 0; d < n; ++d) {
                    lin += probe.p[d] * (x[d] - x0[d]);
                    d2 += (x[d] - x0[d]) * (x[d] - x0[d]);
                }
                double diff = V(k, j) - (V0 + lin + s * 0.5 * probe.kappa * d2);
                if (probe.side == Side::sub ? diff > slack : diff < -slack) return false;
            }
        }
    }
    return true;
}

class ViscosityChecker {
public:
    ViscosityChecker(const GridFunction& V, const ImpulseProblem& problem, const AssumptionConstants& constants,
                     ProbeSpec spec = {})
        : V_(V), grid_(V.grid()), problem_(problem), constants_(constants), spec_(std::move(spec)),
          op_(grid_, problem_, spec_.search) {
        if (problem.n != grid_.dim()) throw ConfigError("problem and grid dimensions differ");
        if (spec_.radius < 1) throw ConfigError("probe radius must be at least 1", "radius");
        base_tol_ = spec_.tolerance ? *spec_.tolerance : 10.0 * grid_.resolution();
    }

    const ProbeSpec& spec() const noexcept { return spec_; }
    double base_tolerance() const noexcept { return base_tol_; }

    /// N[V](t_k, x_i) - V(t_k, x_i), computed on first use.
    double gap(int k, std::size_t i) {
        if (gap_.empty()) {
            gap_.assign(grid_.size(), std::numeric_limits<double>::quiet_NaN());
            radius_.assign(static_cast<std::size_t>(grid_.t_nodes()), -1.0);
        }
        const std::size_t flat = static_cast<std::size_t>(k) * grid_.space_size() + i;
        if (std::isnan(gap_[flat])) {
            double& R = radius_[static_cast<std::size_t>(k)];
            if (R < 0.0) R = op_.radius_for(V_.slice(k), constants_);
            gap_[flat] = op_.at_node(V_.slice(k), grid_.t(k), i, R).value - V_(k, i);
        }
        return gap_[flat];
    }

    /// Nodes where interior checks run: t_k < T, at least `radius` nodes
    /// away from the spatial boundary.
    std::vector<std::pair<int, std::size_t>> tested_nodes() const {
        std::vector<std::pair<int, std::size_t>> out;
        const int n = grid_.dim(), r = spec_.radius;
        for (int k = 0; k <= grid_.t_nodes() - 2; k += spec_.t_stride)
            for (int a = r; a <= grid_.x_nodes(0) - 1 - r; a += spec_.x_stride)
                for (int b = (n > 1 ? r : 0); b <= (n > 1 ? grid_.x_nodes(1) - 1 - r : 0); b += spec_.x_stride)
                    out.emplace_back(k, grid_.flatten({a, b}));
        return out;
    }

    /// Calls f(index, probe) for every admitted probe at a node.
    template <class F>
    void for_each_probe(int k, std::size_t i, Side side, F&& f) const {
        const int n = grid_.dim();
        const auto c = grid_.unflatten(i);
        const double V0 = V_(k, i);

        // slope options per axis: forward, backward, midpoint
        std::array<std::vector<double>, 1 + max_dim> options;
        std::array<double, 1 + max_dim> mid{};
        {
            auto& o = options[0];
            const bool fwd = k + 1 < grid_.t_nodes(), bwd = k > 0;
            double f_ = fwd ? (V_(k + 1, i) - V0) / (grid_.t(k + 1) - grid_.t(k)) : 0.0;
            double b_ = bwd ? (V0 - V_(k - 1, i)) / (grid_.t(k) - grid_.t(k - 1)) : 0.0;
            if (fwd) o.push_back(f_);
            if (bwd) o.push_back(b_);
            if (fwd && bwd) o.push_back(0.5 * (f_ + b_));
            mid[0] = fwd && bwd ? 0.5 * (f_ + b_) : (fwd ? f_ : b_);
        }
        for (int d = 0; d < n; ++d) {
            auto& o = options[1 + d];
            const std::size_t s = grid_.stride(d);
            const bool fwd = c[d] + 1 < grid_.x_nodes(d), bwd = c[d] > 0;
            double f_ = fwd ? (V_(k, i + s) - V0) / grid_.dx(d) : 0.0;
            double b_ = bwd ? (V0 - V_(k, i - s)) / grid_.dx(d) : 0.0;
            if (fwd) o.push_back(f_);
            if (bwd) o.push_back(b_);
            if (fwd && bwd) o.push_back(0.5 * (f_ + b_));
            mid[1 + d] = fwd && bwd ? 0.5 * (f_ + b_) : (fwd ? f_ : b_);
        }
        const double scale = std::max(1.0, curvature(k, i));

        JetProbe probe;
        probe.k = k;
        probe.node = i;
        probe.side = side;
        probe.radius = spec_.radius;
        int index = 0;
        std::array<std::size_t, 1 + max_dim> pick{0, 0, 0};
        for (;;) {
            probe.a = options[0][pick[0]];
            for (int d = 0; d < n; ++d) probe.p[d] = options[1 + d][pick[1 + d]];
            for (double m : spec_.multipliers) {
                probe.kappa = m * scale;
                probe.touching = false;
                if (probe_touches(V_, probe)) f(index, probe);
                ++index;
            }
            int ax = 0;
            while (ax <= n && ++pick[static_cast<std::size_t>(ax)] == options[static_cast<std::size_t>(ax)].size()) {
                pick[static_cast<std::size_t>(ax)] = 0;
                ++ax;
            }
            if (ax > n) break;
        }
        if (spec_.touching_probe) {
            probe.a = mid[0];
            for (int d = 0; d < n; ++d) probe.p[d] = mid[1 + d];
            probe.kappa = minimal_kappa(probe);
            probe.touching = true;
            f(index, probe);
        }
    }

    /// a + H(t0, x0, p) for a probe.
    double hjb_quantity(const JetProbe& probe) const {
        return probe.a + problem_.H(grid_.t(probe.k), grid_.point(probe.node), probe.p);
    }

    double probe_tolerance(const JetProbe& probe) const { return base_tol_ + probe.kappa * grid_.resolution(); }

    ViscosityReport check(Variant variant) {
        if (variant == Variant::qvi_sub_lemma) return via_lemma();
        ViscosityReport rep = blank(variant);
        const bool sub = variant == Variant::hjb_sub || variant == Variant::qvi_sub;
        const bool needs_gap = variant != Variant::hjb_sub && variant != Variant::hjb_super;
        terminal(rep, sub);
        const double ctol = spec_.constraint_tol;
        for (auto [k, i] : tested_nodes()) {
            ++rep.points_tested;
            const double gp = needs_gap ? gap(k, i) : 0.0;
            if (needs_gap && (variant == Variant::constraint || variant == Variant::qvi_sub ||
                              variant == Variant::qvi_super_modified) && gp < -ctol)
                rep.constraint_violations.push_back({k, i, gp});
            if (variant == Variant::constraint) continue;
            for_each_probe(k, i, sub ? Side::sub : Side::super, [&](int index, const JetProbe& probe) {
                ++rep.probes_tested;
                if (spec_.keep_probes) rep.probes.push_back(probe);
                const double q = hjb_quantity(probe), tol = probe_tolerance(probe);
                switch (variant) {
                case Variant::hjb_sub:
                    if (q < -tol) rep.violations.push_back({k, i, index, q, tol, Branch::hjb});
                    break;
                case Variant::hjb_super:
                    if (q > tol) rep.violations.push_back({k, i, index, -q, tol, Branch::hjb});
                    break;
                case Variant::qvi_sub:
                    if (q < -tol) rep.violations.push_back({k, i, index, q, tol, Branch::hjb});
                    else if (gp < -ctol) rep.violations.push_back({k, i, index, gp, ctol, Branch::constraint});
                    break;
                case Variant::qvi_super_classical:
                    // min{q, gap} <= tol fails only off the contact set
                    if (q > tol && gp > 2.0 * ctol)
                        rep.violations.push_back({k, i, index, -std::min(q - tol, gp - 2.0 * ctol), tol, Branch::hjb});
                    break;
                case Variant::qvi_super_modified:
                    if (gp > 2.0 * ctol && q > tol) rep.violations.push_back({k, i, index, -q, tol, Branch::hjb});
                    break;
                default: break;
                }
            });
        }
        return rep;
    }

private:
    ViscosityReport blank(Variant v) const {
        ViscosityReport rep;
        rep.variant = v;
        rep.base_tolerance = base_tol_;
        rep.constraint_tol = spec_.constraint_tol;
        return rep;
    }

    /// V(T,.) <= h (sub) or >= h (super) on every node.
    void terminal(ViscosityReport& rep, bool sub) const {
        const int last = grid_.t_nodes() - 1;
        for (std::size_t i = 0; i < grid_.space_size(); ++i) {
            double diff = V_(last, i) - problem_.h(grid_.point(i));
            double margin = sub ? -diff : diff;
            if (margin < -spec_.terminal_tol) rep.terminal_violations.push_back({last, i, margin});
        }
    }

    /// Constraint check and HJB sub-solution check run separately, then merged.
    ViscosityReport via_lemma() {
        ViscosityReport hjb = check(Variant::hjb_sub);
        ViscosityReport con = check(Variant::constraint);
        ViscosityReport rep = blank(Variant::qvi_sub_lemma);
        rep.points_tested = hjb.points_tested;
        rep.probes_tested = hjb.probes_tested;
        rep.probes = std::move(hjb.probes);
        rep.terminal_violations = hjb.terminal_violations;
        rep.constraint_violations = con.constraint_violations;
        std::map<std::tuple<int, std::size_t, int>, Violation> merged;
        for (const Violation& v : hjb.violations) merged.emplace(v.key(), v);
        for (const NodeViolation& nv : con.constraint_violations)
            for_each_probe(nv.k, nv.node, Side::sub, [&](int index, const JetProbe&) {
                merged.emplace(std::tuple(nv.k, nv.node, index),
                               Violation{nv.k, nv.node, index, nv.margin, spec_.constraint_tol, Branch::constraint});
            });
        for (auto& [key, v] : merged) rep.violations.push_back(v);
        return rep;
    }

    /// Largest second difference (time, space, mixed) available at a node.
    double curvature(int k, std::size_t i) const {
        const int n = grid_.dim();
        const auto c = grid_.unflatten(i);
        const double V0 = V_(k, i);
        double m = 0.0;
        const bool t_both = k > 0 && k + 1 < grid_.t_nodes();
        if (t_both) {
            double dt = grid_.dt();
            m = std::max(m, std::fabs(V_(k + 1, i) - 2.0 * V0 + V_(k - 1, i)) / (dt * dt));
        }
        for (int d = 0; d < n; ++d) {
            const std::size_t s = grid_.stride(d);
            const double h = grid_.dx(d);
            const bool x_both = c[d] > 0 && c[d] + 1 < grid_.x_nodes(d);
            if (x_both) m = std::max(m, std::fabs(V_(k, i + s) - 2.0 * V0 + V_(k, i - s)) / (h * h));
            if (x_both && t_both) {
                double mixed = (V_(k + 1, i + s) - V_(k + 1, i - s) - V_(k - 1, i + s) + V_(k - 1, i - s)) /
                               (4.0 * grid_.dt() * h);
                m = std::max(m, std::fabs(mixed));
            }
        }
        return m;
    }

    /// Smallest kappa for which the probe touches on its neighbourhood.
    double minimal_kappa(const JetProbe& probe) const {
        const int n = grid_.dim();
        const auto c = grid_.unflatten(probe.node);
        const double V0 = V_(probe.k, probe.node);
        const Vec x0 = grid_.point(probe.node);
        const double t0 = grid_.t(probe.k);
        const int r = probe.radius;
        double kappa = 0.0;
        for (int dk = -r; dk <= r; ++dk) {
            int k = probe.k + dk;
            if (k < 0 || k >= grid_.t_nodes()) continue;
            for (int a = -r; a <= r; ++a)
                for (int b = (n > 1 ? -r : 0); b <= (n > 1 ? r : 0); ++b) {
                    int i0 = c[0] + a, i1 = c[1] + b;
                    if (i0 < 0 || i0 >= grid_.x_nodes(0) || (n > 1 && (i1 < 0 || i1 >= grid_.x_nodes(1)))) continue;
                    if (dk == 0 && a == 0 && b == 0) continue;
                    std::size_t j = grid_.flatten({i0, i1});
                    Vec x = grid_.point(j);
                    double dt = grid_.t(k) - t0, lin = probe.a * dt, d2 = dt * dt;
                    for (int d = 0; d < n; ++d) {
                        lin += probe.p[d] * (x[d] - x0[d]);
                        d2 += (x[d] - x0[d]) * (x[d] - x0[d]);
                    }
                    double excess = V_(k, j) - V0 - lin;
                    if (probe.side == Side::super) excess = -excess;
                    kappa = std::max(kappa, 2.0 * excess / d2);
                }
        }
        return kappa;
    }

    const GridFunction& V_;
    const Grid& grid_;
    const ImpulseProblem& problem_;
    AssumptionConstants constants_;
    ProbeSpec spec_;
    ObstacleOperator op_;
    double base_tol_ = 0.0;
    std::vector<double> gap_;
    std::vector<double> radius_;
};

inline ViscosityReport check_qvi_subsolution(const GridFunction& V, const ImpulseProblem& problem,
                                             const AssumptionConstants& c, const ProbeSpec& spec = {}) {
    return ViscosityChecker(V, problem, c, spec).check(Variant::qvi_sub);
}

inline ViscosityReport check_qvi_subsolution_via_lemma(const GridFunction& V, const ImpulseProblem& problem,
                                                       const AssumptionConstants& c, const ProbeSpec& spec = {}) {
    return ViscosityChecker(V, problem, c, spec).check(Variant::qvi_sub_lemma);
}

inline ViscosityReport check_qvi_supersolution_classical(const GridFunction& V, const ImpulseProblem& problem,
                                                         const AssumptionConstants& c, const ProbeSpec& spec = {}) {
    return ViscosityChecker(V, problem, c, spec).check(Variant::qvi_super_classical);
}

inline ViscosityReport check_qvi_supersolution_modified(const GridFunction& V, const ImpulseProblem& problem,
                                                        const AssumptionConstants& c, const ProbeSpec& spec = {}) {
    return ViscosityChecker(V, problem, c, spec).check(Variant::qvi_super_modified);
}

} // namespace qvi
