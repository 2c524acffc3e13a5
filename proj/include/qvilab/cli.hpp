// Command-line front end. run_cli() is the whole program; tools/qvilab.cpp
// only forwards argv to it.
//
// Exit codes: 0 pass, 1 checked and failed, 2 invalid input.

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "report.hpp"

namespace qvi::cli {

enum Exit { pass = 0, fail = 1, invalid = 2 };

struct Common {
    std::vector<std::string> overrides;
    std::string out = ".";
    int grid_nx = -1;   ///< nodes per spatial axis
    int grid_nt = -1;   ///< time nodes; 0 = smallest count meeting the CFL condition
    double tol = -1.0;  ///< command-specific tolerance; < 0 keeps the default
};

struct Loaded {
    Setup setup;
    std::string text;
    SchemeParams scheme;
    SearchParams search;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Config, grid overrides and the scheme / search derived from it.
inline Loaded load(const std::string& path, const Common& common, bool need_scheme = true) {
    Loaded l;
    l.text = read_file(path);
    l.setup = load_problem(l.text, common.overrides);
    Grid& g = l.setup.grid;
    if (common.grid_nx > 0) g = g.with_nodes(g.t_nodes(), std::vector<int>(static_cast<std::size_t>(g.dim()), common.grid_nx));
    const ConfigTuning& tn = l.setup.tuning;
    if (need_scheme) {
        l.scheme = estimate_scheme(l.setup.problem, g, tn.dissipation_factor.value_or(1.2));
        if (tn.cfl) l.scheme.cfl_safety = *tn.cfl;
        if (tn.fp_tol) l.scheme.fp_tol = *tn.fp_tol;
        if (tn.fp_max_iter) l.scheme.fp_max_iter = *tn.fp_max_iter;
    }
    if (common.grid_nt > 0) g = g.with_nodes(common.grid_nt, std::vector<int>(g.dim() > 1 ? std::vector<int>{g.x_nodes(0), g.x_nodes(1)} : std::vector<int>{g.x_nodes(0)}));
    if (common.grid_nt == 0) {
        std::vector<int> nodes;
        for (int d = 0; d < g.dim(); ++d) nodes.push_back(g.x_nodes(d));
        g = g.with_nodes(std::max(2, cfl_time_nodes(g, l.scheme)), nodes);
    }
    if (tn.search_radius) l.search.radius = *tn.search_radius;
    if (tn.search_coarse) l.search.coarse = *tn.search_coarse;
    if (tn.search_refine) l.search.refine = *tn.search_refine;
    return l;
}

class Outputs {
public:
    explicit Outputs(std::string dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    std::ofstream open(const std::string& name) {
        std::filesystem::path p = std::filesystem::path(dir_) / name;
        paths_.push_back(p.string());
        std::ofstream os(p, std::ios::binary);
        if (!os) throw ConfigError("cannot write '" + p.string() + "'");
        return os;
    }

    void json(const std::string& name, const nlohmann::json& j) { open(name) << j.dump(2) << '\n'; }

    const std::vector<std::string>& paths() const noexcept { return paths_; }
    const std::string& dir() const noexcept { return dir_; }

private:
    std::string dir_;
    std::vector<std::string> paths_;
};

inline void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--set", c.overrides, "Override a config entry, section.key=value")->take_all();
    cmd->add_option("--out", c.out, "Output directory");
    cmd->add_option("--grid-nx", c.grid_nx, "Nodes per spatial axis");
    cmd->add_option("--grid-nt", c.grid_nt, "Time nodes (0: smallest CFL-admissible count)");
    cmd->add_option("--tol", c.tol, "Tolerance override");
}

inline std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline int cmd_check(const std::string& path, const Common& c, std::size_t points, Outputs& out, std::ostream& log) {
    Loaded l = load(path, c, false);
    SamplerSpec spec = SamplerSpec::over(l.setup.grid);
    spec.points = points;
    if (c.tol >= 0) spec.exact_tol = spec.scan_tol = c.tol;
    AuditReport r = audit_H1(l.setup.problem, l.setup.constants, spec);
    r.append(audit_H2(l.setup.problem, l.setup.constants, spec));
    out.json("check.json", report::to_json(r));
    for (auto& chk : r.checks)
        log << (chk.pass ? "pass " : "FAIL ") << chk.name << "  worst margin " << report::real17(chk.worst_margin) << '\n';
    return r.pass() ? pass : fail;
}

inline int cmd_solve(const std::string& path, const Common& c, bool no_obstacle, const std::string& exact,
                     Outputs& out, std::ostream& log) {
    Loaded l = load(path, c);
    const Grid& g = l.setup.grid;
    SolveResult r = no_obstacle ? solve_hjb(l.setup.problem, g, l.scheme, &l.setup.constants)
                                : solve_qvi(l.setup.problem, l.setup.constants, g, l.scheme, l.search);
    {
        auto os = out.open("solution.csv");
        write_csv(os, r.value);
    }
    nlohmann::json meta = report::to_json(r);
    bool ok = true;
    const std::vector<bool> interior = interior_mask(g, l.scheme);
    const std::size_t m = g.space_size(), last = static_cast<std::size_t>(g.t_nodes() - 1) * m;
    if (r.gap) {
        const double tol = c.tol >= 0 ? c.tol : 10.0 * g.resolution();
        std::size_t inside = 0, accepted = 0, constraint_bad = 0;
        for (std::size_t j = 0; j < last; ++j) {
            if (r.gap->values()[j] < -l.scheme.fp_tol) ++constraint_bad;
            if (!interior[j]) continue;
            ++inside;
            accepted += std::fabs(r.residual.values()[j]) <= tol;
        }
        const double share = inside ? static_cast<double>(accepted) / static_cast<double>(inside) : 0.0;
        meta["acceptance"] = {{"residual_tol", tol},
                              {"residual_share_within_tol", share},
                              {"constraint_violations", constraint_bad}};
        ok = share >= 0.99 && constraint_bad == 0;
        // the discrete gap on the intervention band is O(dt + dx), not zero
        RegionMap regions = extract_regions(r, g.resolution());
        meta["regions"] = {{"tolerance", g.resolution()}, {"intervention_nodes", regions.intervention_count}};
        auto os = out.open("regions.csv");
        report::write_regions_csv(os, regions, g);
        log << "intervention nodes " << regions.intervention_count << '\n';
    }
    if (!exact.empty()) {
        GridFunction V = sample(Expr::parse(exact, time_space_vars(g.dim())), g);
        const double tol = c.tol >= 0 ? c.tol : 0.02;
        double err = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j)
            if (interior[j]) err = std::max(err, std::fabs(V.values()[j] - r.value.values()[j]));
        meta["exact"] = {{"expression", exact}, {"interior_max_error", err}, {"tolerance", tol}};
        ok = ok && err <= tol;
        log << "interior max error " << report::real17(err) << " (tolerance " << report::real17(tol) << ")\n";
    }
    meta["pass"] = ok;
    out.json("solve.json", meta);
    log << "residual max " << report::real17(r.residual_max) << '\n';
    return ok ? pass : fail;
}

inline int cmd_viscosity(const std::string& path, const Common& c, const std::string& solution,
                         const std::string& analytic, const std::string& variant, Outputs& out, std::ostream& log) {
    Loaded l = load(path, c, false);
    const Grid& g = l.setup.grid;
    if (solution.empty() == analytic.empty()) throw ConfigError("give exactly one of --solution and --analytic");
    GridFunction V;
    if (!solution.empty()) {
        std::ifstream in(solution);
        if (!in) throw ConfigError("cannot read solution '" + solution + "'");
        V = read_csv(in, g);
    } else {
        V = sample(Expr::parse(analytic, time_space_vars(g.dim())), g);
    }
    ProbeSpec spec;
    spec.search = l.search;
    if (c.tol >= 0) spec.tolerance = c.tol;
    ViscosityReport r = ViscosityChecker(V, l.setup.problem, l.setup.constants, spec).check(parse_variant(variant));
    out.json("viscosity.json", report::to_json(r, g));
    {
        auto os = out.open("violations.csv");
        report::write_violations_csv(os, r, g);
    }
    log << to_string(r.variant) << ": " << (r.pass() ? "no violation found" : "violations found") << " ("
        << r.violations.size() << " probe, " << r.constraint_violations.size() << " constraint, "
        << r.terminal_violations.size() << " terminal)\n";
    return r.pass() ? pass : fail;
}

inline int cmd_compare(const std::string& path, const std::string& hat_path, const Offsets& offsets,
                       bool override_hypotheses, const Common& c, Outputs& out, std::ostream& log) {
    Loaded l = load(path, c);
    const Grid& g = l.setup.grid;
    ImpulseProblem hat;
    if (!hat_path.empty()) {
        Loaded h = load(hat_path, c, false);
        hat = h.setup.problem;
    } else {
        hat = ordered_pair_generator(l.setup.problem, offsets, SamplerSpec::over(g)).hat;
    }
    ComparisonOptions opt;
    opt.override_hypotheses = override_hypotheses;
    opt.coarse = l.search.coarse;
    if (l.search.radius > 0) opt.radius = l.search.radius;
    if (c.tol >= 0) opt.tolerance = c.tol;
    try {
        ComparisonReport r = compare_solutions(l.setup.problem, hat, l.setup.constants, g, opt);
        out.json("compare.json", report::to_json(r, g));
        log << "max interior (V - V^) " << report::real17(r.max_diff) << " (tolerance " << report::real17(r.tolerance)
            << ")\n";
        return r.pass ? pass : fail;
    } catch (const HypothesisError& e) {
        out.json("compare.json", {{"pass", false}, {"error", e.what()}, {"hypotheses", report::to_json(e.report())}});
        log << e.what() << '\n';
        return fail;
    }
}

inline int cmd_doubling(const std::string& path, const std::string& hat_path, const std::string& analytic,
                        DoublingParams params, std::vector<double> scales, const Common& c, Outputs& out,
                        std::ostream& log) {
    Loaded l = load(path, c);
    const Grid& g = l.setup.grid;
    params.validate();
    GridFunction V = analytic.empty()
                         ? solve_qvi(l.setup.problem, l.setup.constants, g, l.scheme, l.search).value
                         : sample(Expr::parse(analytic, time_space_vars(g.dim())), g);
    GridFunction Vh;
    if (hat_path.empty()) {
        Vh = solve_qvi(l.setup.problem, l.setup.constants, g, l.scheme, l.search).value;
    } else {
        Loaded h = load(hat_path, c);
        if (!(h.setup.grid == g)) throw ConfigError("the two configs describe different grids");
        Vh = solve_qvi(h.setup.problem, h.setup.constants, g, h.scheme, h.search).value;
    }
    DoublingSweep s = doubling_sweep(V, Vh, params, l.setup.constants.gamma, std::move(scales));
    out.json("doubling.json", report::to_json(s, g.dim()));
    {
        auto os = out.open("doubling_trend.csv");
        report::write_trend_csv(os, s);
    }
    for (auto& d : s.levels)
        log << "eps " << report::real17(d.params.eps) << "  |t0-s0| " << report::real17(d.dt0) << "  |x0-y0| "
            << report::real17(d.dx0) << "  residual " << report::real17(d.residual_1e) << '\n';
    return s.residuals_nonpositive && s.trend_nonincreasing ? pass : fail;
}

struct ExampleArgs {
    double l0 = 0.05, t0 = 0.5, T = 1.0;
    double x_min = -1.0, x_max = 4.0;
    bool auto_shrink = false;
};

inline int cmd_example(const ExampleArgs& a, const Common& c, Outputs& out, std::ostream& log) {
    example::ExampleOptions opt;
    opt.T = a.T;
    opt.auto_shrink = a.auto_shrink;
    example::ExampleInstance e = example::build_instance(a.t0, a.l0, opt);
    Grid g(1, a.T, c.grid_nt > 0 ? c.grid_nt : 201, {a.x_min}, {a.x_max}, {c.grid_nx > 0 ? c.grid_nx : 701});
    ProbeSpec spec;
    if (c.tol >= 0) spec.tolerance = c.tol;
    example::SeparationReport r = example::verify_separation(e, g, spec);
    ObstacleResult searched = example::search_obstacle(e);
    nlohmann::json j = report::to_json(e);
    j["N[V](t0,x0) search"] = searched.value;
    j["search_argmin_xi"] = searched.xi[0];
    j["grid"] = report::to_json(g);
    j["separation"] = report::to_json(r, g);
    j["classical verdict"] = r.classical_pass ? "PASS" : "FAIL";
    j["modified verdict"] = r.modified_fail ? "FAIL" : "PASS";
    out.json("example.json", j);
    {
        auto os = out.open("example_gap.csv");
        report::write_gap_csv(os, r);
    }
    log << "xi1 " << report::real17(e.xi1) << "  xi2 " << report::real17(e.xi2) << "  gap " << report::real17(e.gap)
        << "  delta " << report::real17(e.delta) << '\n'
        << "classical " << (r.classical_pass ? "PASS" : "FAIL") << "  modified " << (r.modified_fail ? "FAIL" : "PASS")
        << (r.separation_exhibited ? "  (separation exhibited)" : "  (separation not exhibited)") << '\n';
    return r.separation_exhibited ? pass : fail;
}

inline int run_cli(std::vector<std::string> args, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Numerical laboratory for impulse-control quasi-variational inequalities"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    Common common;
    std::string config, config_hat, solution, analytic, variant = "qvi-sub", exact;
    std::size_t points = 4096;
    bool no_obstacle = false, override_hypotheses = false;
    Offsets offsets;
    DoublingParams dparams;
    std::vector<double> scales{0.1, 0.05, 0.025};
    ExampleArgs ex;

    auto* check = app.add_subcommand("check", "Audit the structural hypotheses on samples");
    check->add_option("config", config, "Config file")->required();
    check->add_option("--points", points, "Low-discrepancy sample count");
    add_common(check, common);

    auto* solve = app.add_subcommand("solve", "Solve the QVI (or the HJB equation with --no-obstacle)");
    solve->add_option("config", config, "Config file")->required();
    solve->add_flag("--no-obstacle", no_obstacle, "Pure HJB mode");
    solve->add_option("--exact", exact, "Closed-form V(t, x1..) to measure the interior error against");
    add_common(solve, common);

    auto* visc = app.add_subcommand("viscosity", "Check a viscosity solution definition on the grid");
    visc->add_option("config", config, "Config file")->required();
    visc->add_option("--solution", solution, "Solution CSV on the config grid");
    visc->add_option("--analytic", analytic, "Candidate V(t, x1..) as an expression");
    visc->add_option("--variant", variant,
                     "hjb-sub | hjb-super | qvi-sub | qvi-sub-lemma | qvi-super-classical | qvi-super-modified | constraint");
    add_common(visc, common);

    auto* cmp = app.add_subcommand("compare", "Solve an ordered pair and compare the solutions");
    cmp->add_option("config", config, "Config file")->required();
    cmp->add_option("config_hat", config_hat, "Config of the dominating problem");
    cmp->add_option("--dh", offsets.dh, "Offset of h (when no second config)");
    cmp->add_option("--dH", offsets.dH, "Offset of H");
    cmp->add_option("--dell", offsets.dell, "Offset of ell");
    cmp->add_flag("--override", override_hypotheses, "Proceed when the data are not ordered");
    add_common(cmp, common);

    auto* dbl = app.add_subcommand("doubling", "Maximise the doubling-of-variables functional over an eps sweep");
    dbl->add_option("config", config, "Config file (V)")->required();
    dbl->add_option("--hat", config_hat, "Config for V^ (default: same as V)");
    dbl->add_option("--analytic", analytic, "Use this V(t, x1..) instead of solving the first config");
    dbl->add_option("--eps", scales, "eps = delta levels")->delimiter(',');
    dbl->add_option("--theta", dparams.theta);
    dbl->add_option("--G", dparams.G);
    dbl->add_option("--nu", dparams.nu);
    dbl->add_option("--rho", dparams.rho);
    add_common(dbl, common);

    auto* exm = app.add_subcommand("reproduce-example", "Reproduce the transport counterexample");
    exm->add_option("--l0", ex.l0, "Impulse cost scale ell0");
    exm->add_option("--t0", ex.t0, "Time of the separation point");
    exm->add_option("--T", ex.T, "Horizon");
    exm->add_option("--x-min", ex.x_min);
    exm->add_option("--x-max", ex.x_max);
    exm->add_flag("--auto-shrink", ex.auto_shrink, "Halve ell0 until the gap is negative");
    add_common(exm, common);

    std::vector<const char*> argv{"qvilab"};
    for (auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        log << app.help();
        return pass;
    } catch (const CLI::CallForAllHelp& e) {
        log << app.help("", CLI::AppFormatMode::All);
        return pass;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return invalid;
    }

    const auto start = std::chrono::steady_clock::now();
    CLI::App* used = app.get_subcommands().front();
    int code = invalid;
    std::string error;
    std::unique_ptr<Outputs> out;
    try {
        out = std::make_unique<Outputs>(common.out);
        if (used == check) code = cmd_check(config, common, points, *out, log);
        else if (used == solve) code = cmd_solve(config, common, no_obstacle, exact, *out, log);
        else if (used == visc) code = cmd_viscosity(config, common, solution, analytic, variant, *out, log);
        else if (used == cmp) code = cmd_compare(config, config_hat, offsets, override_hypotheses, common, *out, log);
        else if (used == dbl) code = cmd_doubling(config, config_hat, analytic, dparams, scales, common, *out, log);
        else if (used == exm) code = cmd_example(ex, common, *out, log);
    } catch (const ConfigError& e) {
        error = e.what();
        code = invalid;
    } catch (const ParseError& e) {
        error = e.what();
        code = invalid;
    } catch (const DomainError& e) {
        error = e.what();
        code = invalid;
    } catch (const SolverError& e) {
        error = e.what();
        code = fail;
    } catch (const std::filesystem::filesystem_error& e) {
        error = e.what();
        code = invalid;
    }
    if (!error.empty()) err << "error: " << error << '\n';

    if (out) {
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string text;
        try {
            if (!config.empty()) text = read_file(config);
        } catch (const ConfigError&) {
        }
        nlohmann::json manifest{{"command", used->get_name()},
                                {"arguments", args},
                                {"config", config},
                                {"config_hash", config.empty() ? "" : hex(fingerprint(text))},
                                {"overrides", common.overrides},
                                {"artifacts", out->paths()},
                                {"wall_time_s", wall},
                                {"exit_code", code},
                                {"summary", code == pass ? "pass" : (code == fail ? "fail" : "invalid input")}};
        if (!error.empty()) manifest["error"] = error;
        std::ofstream(std::filesystem::path(out->dir()) / "run_manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
    }
    return code;
}

} // namespace qvi::cli
