#pragma once

#include "qnmlpt/born_tail.hpp"
#include "qnmlpt/error.hpp"
#include "qnmlpt/lpt.hpp"
#include "qnmlpt/numeric.hpp"
#include "qnmlpt/ode.hpp"
#include "qnmlpt/oracles.hpp"
#include "qnmlpt/potentials.hpp"
#include "qnmlpt/quadrature.hpp"
#include "qnmlpt/riccati.hpp"
#include "qnmlpt/roots.hpp"
#include "qnmlpt/scenarios.hpp"
#include "qnmlpt/special_functions.hpp"
