#pragma once

// Everything in one include.

#include "decaylab/error.hpp"
#include "decaylab/check_result.hpp"
#include "decaylab/numerics/quadrature.hpp"
#include "decaylab/numerics/dormand_prince.hpp"
#include "decaylab/numerics/parallel.hpp"
#include "decaylab/coeffs.hpp"
#include "decaylab/stabilization.hpp"
#include "decaylab/mode_solver.hpp"
#include "decaylab/integrals.hpp"
#include "decaylab/bounds.hpp"
#include "decaylab/spectral.hpp"
#include "decaylab/cli/config.hpp"
#include "decaylab/cli/runner.hpp"
#include "decaylab/cli/report.hpp"
