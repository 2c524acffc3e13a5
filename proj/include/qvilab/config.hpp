// Line-oriented `key = value` configuration files.
//
//   [problem]   n, T, H, h, ell, cone, g
//   [constants] L, mu, h0, ell0, alpha, beta, delta0, C, gamma, kappa
//   [grid]      t_nodes, x_nodes, x_min, x_max
//   [params]    free names usable inside the expressions
//   [search]    radius, coarse, refine             (optional)
//   [scheme]    cfl, dissipation_factor, fp_tol, fp_max_iter   (optional)
//
// Expressions are double-quoted. Lists are comma separated, optionally in
// brackets. The cone is "orthant" or rays separated by ';', e.g. "1,0; 1,1".
// Constants and params are bound into the expressions at load time.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

namespace qvi {

/// Optional solver and search tuning carried by a config.
struct ConfigTuning {
    std::optional<double> search_radius;
    std::optional<int> search_coarse;
    std::optional<int> search_refine;
    std::optional<double> cfl;
    std::optional<double> dissipation_factor;
    std::optional<double> fp_tol;
    std::optional<int> fp_max_iter;
};

struct Setup {
    ImpulseProblem problem;
    AssumptionConstants constants;
    Grid grid;
    ConfigTuning tuning;
    std::map<std::string, double> params;
};

/// Raw section/key/value table, before interpretation.
class ConfigTable {
public:
    static ConfigTable parse(const std::string& text) {
        ConfigTable table;
        std::istringstream is(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            line = strip_comment(line);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("malformed section header on line " + std::to_string(lineno));
                section = trim(line.substr(1, line.size() - 2));
                if (!known_sections().count(section))
                    throw ConfigError("unknown section [" + section + "]", section);
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("expected key = value on line " + std::to_string(lineno));
            if (section.empty())
                throw ConfigError("key outside any section on line " + std::to_string(lineno));
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            table.set(section + "." + key, value);
        }
        return table;
    }

    /// Applies `section.key=value` (as given to --set).
    void override_with(const std::string& assignment) {
        auto eq = assignment.find('=');
        auto dot = assignment.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
            throw ConfigError("override must look like section.key=value", assignment);
        std::string key = trim(assignment.substr(0, eq));
        if (!known_sections().count(key.substr(0, key.find('.'))))
            throw ConfigError("unknown section in override", key);
        set(key, trim(assignment.substr(eq + 1)));
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    const std::string& raw(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing key", key);
        return it->second;
    }

    std::vector<std::string> keys_in(const std::string& section) const {
        std::vector<std::string> out;
        for (auto& [key, value] : values_)
            if (key.compare(0, section.size() + 1, section + ".") == 0) out.push_back(key);
        return out;
    }

    std::string string(const std::string& key) const {
        const std::string& v = raw(key);
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
        return v;
    }

    double real(const std::string& key) const { return to_real(raw(key), key); }

    int integer(const std::string& key) const {
        double v = real(key);
        if (v != static_cast<int>(v)) throw ConfigError("expected an integer", key);
        return static_cast<int>(v);
    }

    std::vector<double> reals(const std::string& key) const {
        std::string v = string(key);
        if (!v.empty() && v.front() == '[') {
            if (v.back() != ']') throw ConfigError("unterminated list", key);
            v = v.substr(1, v.size() - 2);
        }
        std::vector<double> out;
        std::stringstream ss(v);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(to_real(trim(cell), key));
        if (out.empty()) throw ConfigError("empty list", key);
        return out;
    }

    std::vector<int> integers(const std::string& key) const {
        std::vector<int> out;
        for (double v : reals(key)) {
            if (v != static_cast<int>(v)) throw ConfigError("expected integers", key);
            out.push_back(static_cast<int>(v));
        }
        return out;
    }

private:
    static const std::set<std::string>& known_sections() {
        static const std::set<std::string> s{"problem", "constants", "grid", "params", "search", "scheme"};
        return s;
    }

    static std::string strip_comment(const std::string& line) {
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (!quoted && line[i] == '#') return line.substr(0, i);
        }
        return line;
    }

    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static double to_real(const std::string& text, const std::string& key) {
        std::string s = text;
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
            throw ConfigError("expected a decimal number, got '" + text + "'", key);
        return v;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::map<std::string, std::string> values_;
};

inline Cone parse_cone(const std::string& spec, int n) {
    std::string s = spec;
    if (s.empty() || s == "orthant") return Cone::orthant(n);
    std::vector<Vec> rays;
    std::stringstream rs(s);
    std::string ray;
    while (std::getline(rs, ray, ';')) {
        std::stringstream cs(ray);
        std::string cell;
        Vec r{0.0, 0.0};
        int d = 0;
        while (std::getline(cs, cell, ',')) {
            if (d >= n) throw ConfigError("ray has too many components", "cone");
            char* end = nullptr;
            r[d++] = std::strtod(cell.c_str(), &end);
        }
        if (d != n) throw ConfigError("ray has too few components", "cone");
        rays.push_back(r);
    }
    return Cone::from_rays(n, rays);
}

/// Interprets a parsed table.
inline Setup load_problem(const ConfigTable& table) {
    static const std::set<std::string> allowed{
        "problem.n", "problem.T", "problem.H", "problem.h", "problem.ell", "problem.cone", "problem.g",
        "constants.L", "constants.mu", "constants.h0", "constants.ell0", "constants.alpha",
        "constants.beta", "constants.delta0", "constants.C", "constants.gamma", "constants.kappa",
        "grid.t_nodes", "grid.x_nodes", "grid.x_min", "grid.x_max",
        "search.radius", "search.coarse", "search.refine",
        "scheme.cfl", "scheme.dissipation_factor", "scheme.fp_tol", "scheme.fp_max_iter"};
    for (const char* section : {"problem", "constants", "grid", "search", "scheme"})
        for (auto& key : table.keys_in(section))
            if (!allowed.count(key)) throw ConfigError("unknown key", key);

    Setup s;
    AssumptionConstants& c = s.constants;
    c.L = table.real("constants.L");
    c.mu = table.real("constants.mu");
    c.h0 = table.real("constants.h0");
    c.ell0 = table.real("constants.ell0");
    c.alpha = table.real("constants.alpha");
    c.beta = table.real("constants.beta");
    c.delta0 = table.real("constants.delta0");
    c.C = table.real("constants.C");
    c.gamma = table.real("constants.gamma");
    c.kappa = table.real("constants.kappa");
    c.validate();

    std::map<std::string, double> names{
        {"L", c.L}, {"mu", c.mu}, {"h0", c.h0}, {"ell0", c.ell0}, {"alpha", c.alpha},
        {"beta", c.beta}, {"delta0", c.delta0}, {"C", c.C}, {"gamma", c.gamma}, {"kappa", c.kappa}};
    for (auto& key : table.keys_in("params")) {
        std::string name = key.substr(7);
        s.params[name] = table.real(key);
        names[name] = s.params[name];
    }

    const int n = table.integer("problem.n");
    if (n < 1 || n > max_dim) throw ConfigError("dimension must be 1 or 2", "problem.n");
    const double T = table.real("problem.T");
    if (!(T > 0)) throw ConfigError("horizon must be positive", "problem.T");

    auto expression = [&](const char* key, std::vector<std::string> vars) {
        for (auto& [name, value] : names) vars.push_back(name);
        try {
            return Expr::parse(table.string(key), vars).bind(names);
        } catch (const ParseError& e) {
            throw ConfigError(e.what(), key);
        }
    };
    ImpulseProblem& p = s.problem;
    p.n = n;
    p.T = T;
    p.hamiltonian = expression("problem.H", hamiltonian_vars(n));
    p.terminal = expression("problem.h", terminal_vars(n));
    p.cost = expression("problem.ell", cost_vars(n));
    if (table.has("problem.g")) p.running = expression("problem.g", time_space_vars(n));
    p.cone = parse_cone(table.has("problem.cone") ? table.string("problem.cone") : "orthant", n);

    s.grid = Grid(n, T, table.integer("grid.t_nodes"), table.reals("grid.x_min"), table.reals("grid.x_max"),
                  table.integers("grid.x_nodes"));

    // the cost must be strictly positive on the cone; probe it on grid nodes
    const Grid& g = s.grid;
    for (int k = 0; k < g.t_nodes(); k += std::max(1, g.t_nodes() / 4)) {
        for (std::size_t i = 0; i < g.space_size(); i += std::max<std::size_t>(1, g.space_size() / 16)) {
            for (const Vec& ray : p.cone.rays()) {
                for (double r : {0.0, 0.5, 1.0, 2.0}) {
                    Vec xi{ray[0] * r, ray[1] * r};
                    double v;
                    try {
                        v = p.ell(g.t(k), g.point(i), xi);
                    } catch (const DomainError& e) {
                        throw ConfigError(e.what(), "problem.ell");
                    }
                    if (!(v > 0)) throw ConfigError("impulse cost must be strictly positive", "problem.ell");
                }
            }
        }
    }

    ConfigTuning& t = s.tuning;
    if (table.has("search.radius")) t.search_radius = table.real("search.radius");
    if (table.has("search.coarse")) t.search_coarse = table.integer("search.coarse");
    if (table.has("search.refine")) t.search_refine = table.integer("search.refine");
    if (table.has("scheme.cfl")) t.cfl = table.real("scheme.cfl");
    if (table.has("scheme.dissipation_factor")) t.dissipation_factor = table.real("scheme.dissipation_factor");
    if (table.has("scheme.fp_tol")) t.fp_tol = table.real("scheme.fp_tol");
    if (table.has("scheme.fp_max_iter")) t.fp_max_iter = table.integer("scheme.fp_max_iter");
    return s;
}

inline Setup load_problem(const std::string& text, const std::vector<std::string>& overrides = {}) {
    ConfigTable table = ConfigTable::parse(text);
    for (auto& o : overrides) table.override_with(o);
    return load_problem(table);
}

/// FNV-1a, used to fingerprint configs in run manifests.
inline std::uint64_t fingerprint(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace qvi
