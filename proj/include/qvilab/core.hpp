// Problem data, grids and grid functions shared by every other module.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "expr.hpp"

namespace qvi {

inline constexpr int max_dim = 2;

using Vec = std::array<double, max_dim>;

inline double norm(const Vec& v, int n) {
    double s = 0.0;
    for (int d = 0; d < n; ++d) s += v[d] * v[d];
    return std::sqrt(s);
}

/// Invalid user input (config values, constants out of range, shape mismatch).
/// `key()` names the offending entry when there is one.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, std::string key = {})
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

// Variable lists of the four problem expressions. The slot order is fixed
// and matches the argument packing used throughout.
inline std::vector<std::string> space_vars(int n, const char* prefix) {
    std::vector<std::string> v;
    for (int d = 1; d <= n; ++d) v.push_back(prefix + std::to_string(d));
    return v;
}

inline std::vector<std::string> hamiltonian_vars(int n) {
    std::vector<std::string> v{"t"};
    for (auto& s : space_vars(n, "x")) v.push_back(s);
    for (auto& s : space_vars(n, "p")) v.push_back(s);
    return v;
}

inline std::vector<std::string> terminal_vars(int n) { return space_vars(n, "x"); }

inline std::vector<std::string> cost_vars(int n) {
    std::vector<std::string> v{"t"};
    for (auto& s : space_vars(n, "x")) v.push_back(s);
    for (auto& s : space_vars(n, "xi")) v.push_back(s);
    return v;
}

inline std::vector<std::string> time_space_vars(int n) {
    std::vector<std::string> v{"t"};
    for (auto& s : space_vars(n, "x")) v.push_back(s);
    return v;
}

/// Uniform space-time grid on [0,T] x box.
class Grid {
public:
    Grid() = default;

    Grid(int n, double T, int t_nodes, std::vector<double> x_min, std::vector<double> x_max,
         std::vector<int> x_nodes)
        : n_(n), T_(T), t_nodes_(t_nodes) {
        if (n < 1 || n > max_dim) throw ConfigError("dimension must be 1 or 2", "n");
        if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("horizon must be positive", "T");
        if (t_nodes < 2) throw ConfigError("need at least 2 time nodes", "t_nodes");
        auto need = [&](std::size_t size, const char* key) {
            if (size != static_cast<std::size_t>(n))
                throw ConfigError("expected " + std::to_string(n) + " entries", key);
        };
        need(x_min.size(), "x_min");
        need(x_max.size(), "x_max");
        need(x_nodes.size(), "x_nodes");
        for (int d = 0; d < n; ++d) {
            if (!(x_min[d] < x_max[d])) throw ConfigError("x_min must be below x_max", "x_min");
            if (x_nodes[d] < 2) throw ConfigError("need at least 2 nodes per axis", "x_nodes");
            x_min_[d] = x_min[d];
            x_max_[d] = x_max[d];
            x_nodes_[d] = x_nodes[d];
        }
    }

    int dim() const noexcept { return n_; }
    double horizon() const noexcept { return T_; }
    int t_nodes() const noexcept { return t_nodes_; }
    int x_nodes(int d) const noexcept { return x_nodes_[d]; }
    double x_min(int d) const noexcept { return x_min_[d]; }
    double x_max(int d) const noexcept { return x_max_[d]; }

    double dt() const noexcept { return T_ / (t_nodes_ - 1); }
    double dx(int d) const noexcept { return (x_max_[d] - x_min_[d]) / (x_nodes_[d] - 1); }
    double max_dx() const noexcept {
        double h = 0.0;
        for (int d = 0; d < n_; ++d) h = std::max(h, dx(d));
        return h;
    }
    /// Dt + Dx, the first-order error scale used by all default tolerances.
    double resolution() const noexcept { return dt() + max_dx(); }

    double t(int k) const noexcept { return k == t_nodes_ - 1 ? T_ : k * dt(); }
    double x(int d, int i) const noexcept {
        return i == x_nodes_[d] - 1 ? x_max_[d] : x_min_[d] + i * dx(d);
    }

    std::size_t space_size() const noexcept {
        std::size_t s = 1;
        for (int d = 0; d < n_ && d < max_dim; ++d) s *= static_cast<std::size_t>(x_nodes_[d]);
        return s;
    }
    std::size_t size() const noexcept { return space_size() * static_cast<std::size_t>(t_nodes_); }

    /// Row-major: the last axis varies fastest.
    std::size_t flatten(const std::array<int, max_dim>& idx) const noexcept {
        std::size_t flat = 0;
        for (int d = 0; d < n_; ++d) flat = flat * static_cast<std::size_t>(x_nodes_[d]) + idx[d];
        return flat;
    }

    std::array<int, max_dim> unflatten(std::size_t flat) const noexcept {
        std::array<int, max_dim> idx{0, 0};
        for (int d = n_ - 1; d >= 0; --d) {
            idx[d] = static_cast<int>(flat % static_cast<std::size_t>(x_nodes_[d]));
            flat /= static_cast<std::size_t>(x_nodes_[d]);
        }
        return idx;
    }

    Vec point(std::size_t flat) const noexcept {
        auto idx = unflatten(flat);
        Vec p{0.0, 0.0};
        for (int d = 0; d < n_; ++d) p[d] = x(d, idx[d]);
        return p;
    }

    /// Stride between neighbouring nodes along axis d in flat indexing.
    std::size_t stride(int d) const noexcept {
        std::size_t s = 1;
        for (int e = n_ - 1; e > d; --e) s *= static_cast<std::size_t>(x_nodes_[e]);
        return s;
    }

    double diagonal() const noexcept {
        double s = 0.0;
        for (int d = 0; d < n_; ++d) s += (x_max_[d] - x_min_[d]) * (x_max_[d] - x_min_[d]);
        return std::sqrt(s);
    }

    bool inside(const Vec& x) const noexcept {
        for (int d = 0; d < n_; ++d)
            if (x[d] < x_min_[d] || x[d] > x_max_[d]) return false;
        return true;
    }

    /// Same box and horizon, different node counts.
    Grid with_nodes(int t_nodes, std::vector<int> x_nodes) const {
        std::vector<double> lo(x_min_.begin(), x_min_.begin() + n_), hi(x_max_.begin(), x_max_.begin() + n_);
        return Grid(n_, T_, t_nodes, lo, hi, std::move(x_nodes));
    }

    bool operator==(const Grid& o) const noexcept {
        if (n_ != o.n_ || T_ != o.T_ || t_nodes_ != o.t_nodes_) return false;
        for (int d = 0; d < n_; ++d)
            if (x_min_[d] != o.x_min_[d] || x_max_[d] != o.x_max_[d] || x_nodes_[d] != o.x_nodes_[d])
                return false;
        return true;
    }

private:
    int n_ = 1;
    double T_ = 1.0;
    int t_nodes_ = 2;
    Vec x_min_{0.0, 0.0};
    Vec x_max_{1.0, 1.0};
    std::array<int, max_dim> x_nodes_{2, 2};
};

/// Real values on every node of a Grid, indexed (time index, flat space index).
class GridFunction {
public:
    GridFunction() = default;

    explicit GridFunction(Grid grid, double fill = 0.0)
        : grid_(std::move(grid)), values_(grid_.size(), fill) {}

    GridFunction(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw ConfigError("grid function size does not match grid");
        for (double v : values_)
            if (!std::isfinite(v)) throw ConfigError("grid function has non-finite values");
    }

    const Grid& grid() const noexcept { return grid_; }

    double operator()(int k, std::size_t i) const noexcept { return values_[offset(k) + i]; }
    double& operator()(int k, std::size_t i) noexcept { return values_[offset(k) + i]; }

    std::span<const double> slice(int k) const noexcept {
        return {values_.data() + offset(k), grid_.space_size()};
    }
    std::span<double> slice(int k) noexcept { return {values_.data() + offset(k), grid_.space_size()}; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    /// Multilinear interpolation in space on slice k; points outside the box
    /// take the value at the nearest box point.
    double interpolate(int k, const Vec& x) const noexcept { return interpolate(grid_, slice(k), x); }

    static double interpolate(const Grid& grid, std::span<const double> slice, const Vec& x) noexcept {
        const int n = grid.dim();
        std::array<int, max_dim> lo{0, 0};
        Vec w{0.0, 0.0};
        for (int d = 0; d < n; ++d) {
            double s = (x[d] - grid.x_min(d)) / grid.dx(d);
            const int last = grid.x_nodes(d) - 1;
            if (!(s > 0.0)) s = 0.0;
            if (s >= last) {
                lo[d] = last - 1;
                w[d] = 1.0;
                continue;
            }
            lo[d] = static_cast<int>(s);
            if (lo[d] > last - 1) lo[d] = last - 1;
            w[d] = s - lo[d];
        }
        if (n == 1) {
            const double a = slice[static_cast<std::size_t>(lo[0])];
            const double b = slice[static_cast<std::size_t>(lo[0] + 1)];
            return w[0] == 0.0 ? a : (w[0] == 1.0 ? b : a + w[0] * (b - a));
        }
        const std::size_t s0 = grid.stride(0);
        const std::size_t base = grid.flatten(lo);
        const double v00 = slice[base], v01 = slice[base + 1];
        const double v10 = slice[base + s0], v11 = slice[base + s0 + 1];
        const double a = v00 + w[1] * (v01 - v00);
        const double b = v10 + w[1] * (v11 - v10);
        return a + w[0] * (b - a);
    }

    double min() const noexcept { return *std::min_element(values_.begin(), values_.end()); }
    double max() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

    /// First (lowest flat offset) location of the extreme value.
    std::pair<int, std::size_t> argmin() const noexcept { return locate(std::min_element(values_.begin(), values_.end())); }
    std::pair<int, std::size_t> argmax() const noexcept { return locate(std::max_element(values_.begin(), values_.end())); }

    GridFunction& operator+=(double c) noexcept {
        for (double& v : values_) v += c;
        return *this;
    }

private:
    std::size_t offset(int k) const noexcept { return static_cast<std::size_t>(k) * grid_.space_size(); }

    std::pair<int, std::size_t> locate(std::vector<double>::const_iterator it) const noexcept {
        auto flat = static_cast<std::size_t>(it - values_.begin());
        return {static_cast<int>(flat / grid_.space_size()), flat % grid_.space_size()};
    }

    Grid grid_;
    std::vector<double> values_;
};

/// Closed convex cone of admissible impulses: the conic hull of a finite set
/// of nonzero rays.
class Cone {
public:
    Cone() = default;

    static Cone orthant(int n) {
        std::vector<Vec> rays;
        for (int d = 0; d < n; ++d) {
            Vec r{0.0, 0.0};
            r[d] = 1.0;
            rays.push_back(r);
        }
        Cone c = from_rays(n, rays);
        c.orthant_ = true;
        return c;
    }

    static Cone from_rays(int n, std::vector<Vec> rays) {
        if (n < 1 || n > max_dim) throw ConfigError("dimension must be 1 or 2", "cone");
        if (rays.empty()) throw ConfigError("needs at least one ray", "cone");
        Cone c;
        c.n_ = n;
        for (auto& r : rays) {
            double len = norm(r, n);
            if (!(len > 0.0)) throw ConfigError("rays must be nonzero", "cone");
            for (int d = 0; d < n; ++d) r[d] /= len;
        }
        c.rays_ = rays;
        if (n == 1) {
            for (auto& r : rays) (r[0] > 0 ? c.positive_ : c.negative_) = true;
            return c;
        }
        constexpr double two_pi = 2.0 * std::numbers::pi;
        std::vector<double> angles;
        for (auto& r : rays) {
            double a = std::atan2(r[1], r[0]);
            angles.push_back(a < 0 ? a + two_pi : a);
        }
        std::sort(angles.begin(), angles.end());
        double best_gap = -1.0;
        std::size_t after = 0;
        for (std::size_t i = 0; i < angles.size(); ++i) {
            double next = i + 1 < angles.size() ? angles[i + 1] : angles[0] + two_pi;
            if (next - angles[i] > best_gap) {
                best_gap = next - angles[i];
                after = i;
            }
        }
        if (best_gap < std::numbers::pi - 1e-12) {
            c.full_ = true;
        } else {
            // sector from the ray after the largest gap, counter-clockwise
            c.start_ = after + 1 < angles.size() ? angles[after + 1] : angles[0];
            c.width_ = two_pi - best_gap;
        }
        return c;
    }

    int dim() const noexcept { return n_; }
    bool is_orthant() const noexcept { return orthant_; }
    const std::vector<Vec>& rays() const noexcept { return rays_; }

    bool contains(const Vec& xi, double tol = 1e-12) const noexcept {
        double len = norm(xi, n_);
        if (len <= tol) return true;
        if (n_ == 1) return xi[0] > 0 ? positive_ : negative_;
        if (full_) return true;
        constexpr double two_pi = 2.0 * std::numbers::pi;
        double a = std::atan2(xi[1], xi[0]) - start_;
        while (a < 0) a += two_pi;
        while (a >= two_pi) a -= two_pi;
        double slack = tol / len;
        return a <= width_ + slack || a >= two_pi - slack;
    }

    /// 1-d only: whether +1 / -1 directions are admissible.
    bool allows_positive() const noexcept { return positive_; }
    bool allows_negative() const noexcept { return negative_; }

    std::string describe() const {
        if (orthant_) return "orthant";
        std::ostringstream os;
        for (std::size_t i = 0; i < rays_.size(); ++i) {
            if (i) os << "; ";
            for (int d = 0; d < n_; ++d) os << (d ? "," : "") << format_real(rays_[i][d]);
        }
        return os.str();
    }

private:
    int n_ = 1;
    bool orthant_ = false;
    std::vector<Vec> rays_;
    bool positive_ = false, negative_ = false;
    bool full_ = false;
    double start_ = 0.0, width_ = 0.0;
};

/// One QVI instance: Hamiltonian, terminal data, impulse cost and cone.
/// The optional running term g is added to the Hamiltonian.
struct ImpulseProblem {
    int n = 1;
    double T = 1.0;
    Expr hamiltonian;
    Expr terminal;
    Expr cost;
    Cone cone = Cone::orthant(1);
    std::optional<Expr> running;

    double H(double t, const Vec& x, const Vec& p) const {
        std::array<double, 1 + 2 * max_dim> args{};
        args[0] = t;
        for (int d = 0; d < n; ++d) {
            args[1 + d] = x[d];
            args[1 + n + d] = p[d];
        }
        double value = hamiltonian.eval(std::span<const double>(args.data(), 1 + 2 * n));
        if (running) value += running->eval(std::span<const double>(args.data(), 1 + n));
        return value;
    }

    double h(const Vec& x) const { return terminal.eval(std::span<const double>(x.data(), n)); }

    double ell(double t, const Vec& x, const Vec& xi) const {
        std::array<double, 1 + 2 * max_dim> args{};
        args[0] = t;
        for (int d = 0; d < n; ++d) {
            args[1 + d] = x[d];
            args[1 + n + d] = xi[d];
        }
        return cost.eval(std::span<const double>(args.data(), 1 + 2 * n));
    }

    /// True when the cost depends on xi only, which lets callers cache it.
    bool cost_is_translation_invariant() const {
        if (cost.depends_on("t")) return false;
        for (auto& name : space_vars(n, "x"))
            if (cost.depends_on(name)) return false;
        return true;
    }

    /// Builds a problem from expression sources (all variable lists implied).
    static ImpulseProblem from_sources(int n, double T, const std::string& H, const std::string& h,
                                       const std::string& ell, Cone cone,
                                       const std::optional<std::string>& g = std::nullopt,
                                       const std::map<std::string, double>& params = {}) {
        auto with = [&](std::vector<std::string> vars) {
            for (auto& [name, value] : params) vars.push_back(name);
            return vars;
        };
        ImpulseProblem p;
        p.n = n;
        p.T = T;
        p.hamiltonian = Expr::parse(H, with(hamiltonian_vars(n))).bind(params);
        p.terminal = Expr::parse(h, with(terminal_vars(n))).bind(params);
        p.cost = Expr::parse(ell, with(cost_vars(n))).bind(params);
        if (g) p.running = Expr::parse(*g, with(time_space_vars(n))).bind(params);
        p.cone = std::move(cone);
        return p;
    }
};

/// Structural constants of the growth, coercivity and regularity hypotheses.
struct AssumptionConstants {
    double L = 1.0;
    double mu = 0.0;
    double h0 = 1.0;
    double ell0 = 0.05;
    double alpha = 0.05;
    double beta = 0.5;
    double delta0 = 0.05;
    double C = 1.0;
    double gamma = 0.0;
    double kappa = 0.25;

    void validate() const {
        auto require = [](bool ok, const char* key, const char* range) {
            if (!ok) throw ConfigError(std::string("out of range, expected ") + range, key);
        };
        require(L > 0, "L", "L > 0");
        require(mu >= 0 && mu < 1, "mu", "mu in [0,1)");
        require(h0 > 0, "h0", "h0 > 0");
        require(ell0 > 0, "ell0", "ell0 > 0");
        require(alpha > 0, "alpha", "alpha > 0");
        require(beta > 0 && beta < 1, "beta", "beta in (0,1)");
        require(delta0 > 0, "delta0", "delta0 > 0");
        require(C > 0, "C", "C > 0");
        require(gamma >= 0 && gamma < 1, "gamma", "gamma in [0,1)");
        require(kappa > 0 && kappa < beta, "kappa", "kappa in (0,beta)");
    }
};

/// Samples an expression over (t, x1..xn) on every grid node.
inline GridFunction sample(const Expr& f, const Grid& grid, const std::map<std::string, double>& fixed = {}) {
    const int n = grid.dim();
    Expr g = fixed.empty() ? f : f.bind(fixed);
    auto allowed = time_space_vars(n);
    std::vector<int> slot(g.variables().size(), -1);
    for (std::size_t i = 0; i < g.variables().size(); ++i) {
        for (std::size_t j = 0; j < allowed.size(); ++j)
            if (g.variables()[i] == allowed[j]) slot[i] = static_cast<int>(j);
        if (slot[i] < 0 && g.depends_on(i))
            throw ConfigError("cannot sample over variable '" + g.variables()[i] + "'");
    }
    GridFunction out(grid);
    std::vector<double> args(g.variables().size(), 0.0);
    for (int k = 0; k < grid.t_nodes(); ++k) {
        const double t = grid.t(k);
        for (std::size_t i = 0; i < grid.space_size(); ++i) {
            Vec x = grid.point(i);
            std::array<double, 1 + max_dim> env{t, x[0], x[1]};
            for (std::size_t s = 0; s < slot.size(); ++s)
                if (slot[s] >= 0) args[s] = env[static_cast<std::size_t>(slot[s])];
            try {
                out(k, i) = g.eval(args);
            } catch (const DomainError& e) {
                std::ostringstream where;
                where << "at t=" << format_real(t);
                for (int d = 0; d < n; ++d) where << ", x" << d + 1 << "=" << format_real(x[d]);
                throw DomainError(e, where.str());
            }
        }
    }
    return out;
}

/// Samples the terminal data on every spatial node.
inline std::vector<double> sample_terminal(const ImpulseProblem& problem, const Grid& grid) {
    std::vector<double> h(grid.space_size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = problem.h(grid.point(i));
    return h;
}

inline void write_csv(std::ostream& os, const GridFunction& f) {
    const Grid& g = f.grid();
    os << "t";
    for (int d = 0; d < g.dim(); ++d) os << ",x" << d + 1;
    os << ",value\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (int k = 0; k < g.t_nodes(); ++k) {
        for (std::size_t i = 0; i < g.space_size(); ++i) {
            put(g.t(k));
            Vec x = g.point(i);
            for (int d = 0; d < g.dim(); ++d) {
                os << ',';
                put(x[d]);
            }
            os << ',';
            put(f(k, i));
            os << '\n';
        }
    }
}

/// Reads a CSV written by write_csv back onto `grid`, checking coordinates.
inline GridFunction read_csv(std::istream& is, const Grid& grid) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("empty solution file");
    std::vector<double> values;
    values.reserve(grid.size());
    const double tol = 1e-9 * (1.0 + grid.diagonal() + grid.horizon());
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (row >= grid.size()) throw ConfigError("solution file has more rows than the grid");
        std::vector<double> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(std::strtod(cell.c_str(), nullptr));
        if (cols.size() != static_cast<std::size_t>(grid.dim() + 2))
            throw ConfigError("solution row " + std::to_string(row + 1) + " has wrong column count");
        int k = static_cast<int>(row / grid.space_size());
        Vec x = grid.point(row % grid.space_size());
        bool match = std::fabs(cols[0] - grid.t(k)) <= tol;
        for (int d = 0; d < grid.dim(); ++d) match = match && std::fabs(cols[1 + d] - x[d]) <= tol;
        if (!match) throw ConfigError("solution row " + std::to_string(row + 1) + " is off the grid");
        values.push_back(cols.back());
        ++row;
    }
    if (row != grid.size()) throw ConfigError("solution file has fewer rows than the grid");
    return GridFunction(grid, std::move(values));
}

} // namespace qvi
