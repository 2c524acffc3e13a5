// Shared fixtures for the unit tests and the acceptance binary.

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <qvilab/qvilab.hpp>

namespace fixtures {

using namespace qvi;

inline const char* transport_V = "(x1-1+t)*exp(-(x1-1+t))";

inline ImpulseProblem example_problem(const std::string& ell = "0.05 + 0.05*abs(xi1)") {
    return ImpulseProblem::from_sources(1, 1.0, "-p1", "x1*exp(-x1)", ell, Cone::orthant(1));
}

inline AssumptionConstants example_constants() {
    AssumptionConstants c;
    c.h0 = 3.0;
    c.ell0 = c.delta0 = 0.05;
    c.alpha = 1e-4;
    c.C = 20.0;
    return c;
}

inline GridFunction closed_form(const Grid& g) { return sample(Expr::parse(transport_V, time_space_vars(1)), g); }

/// Named grid functions on one grid: solver output, shifts, the transport
/// solution and deliberately corrupted variants.
inline std::vector<std::pair<std::string, GridFunction>> corpus(const Grid& g) {
    auto p = example_problem();
    GridFunction solved = solve_qvi(p, example_constants(), g, estimate_scheme(p, g)).value;
    std::vector<std::pair<std::string, GridFunction>> out;
    out.emplace_back("solver", solved);
    GridFunction up = solved, down = solved;
    up += 0.05;
    down += -0.05;
    out.emplace_back("solver+0.05", up);
    out.emplace_back("solver-0.05", down);
    out.emplace_back("transport", closed_form(g));
    // transport of the nondecreasing C1 majorant of h: an HJB solution that meets the constraint
    out.emplace_back("transport-majorant",
                     sample(Expr::parse("min(x1-1+t, 1)*exp(-min(x1-1+t, 1))", time_space_vars(1)), g));
    out.emplace_back("transport+kink", sample(Expr::parse(std::string(transport_V) + " + 0.5*abs(x1-1.5)",
                                                          time_space_vars(1)), g));
    out.emplace_back("transport-kink", sample(Expr::parse(std::string(transport_V) + " - 0.5*abs(x1-1.5)",
                                                          time_space_vars(1)), g));
    GridFunction noisy = solved;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (std::size_t j = 0; j < g.size(); j += 97) noisy.values()[j] += u(rng);
    out.emplace_back("solver+noise", noisy);
    return out;
}

}
