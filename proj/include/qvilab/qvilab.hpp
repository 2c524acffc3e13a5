#pragma once

#include "expr.hpp"
#include "core.hpp"
#include "config.hpp"
#include "assumptions.hpp"
#include "obstacle.hpp"
#include "solver.hpp"
#include "viscosity.hpp"
#include "comparison.hpp"
#include "example.hpp"
#include "report.hpp"
