#ifndef SEMIRANDOM_SEMIRANDOM_HPP
#define SEMIRANDOM_SEMIRANDOM_HPP

#include "semirandom/cli_commands.hpp"
#include "semirandom/error.hpp"
#include "semirandom/experiment.hpp"
#include "semirandom/expm.hpp"
#include "semirandom/instances.hpp"
#include "semirandom/jl.hpp"
#include "semirandom/matrix.hpp"
#include "semirandom/mpc.hpp"
#include "semirandom/operators.hpp"
#include "semirandom/regression.hpp"
#include "semirandom/rng.hpp"
#include "semirandom/solvers.hpp"
#include "semirandom/spectral.hpp"
#include "semirandom/weights.hpp"

#endif
