#pragma once

// Convenience header for the whole library.

#include "rank1/core/error.hpp"
#include "rank1/core/numerics.hpp"
#include "rank1/core/parallel.hpp"
#include "rank1/geometry/hyperbolic.hpp"
#include "rank1/geometry/integrate.hpp"
#include "rank1/geometry/io.hpp"
#include "rank1/geometry/surface_model.hpp"
#include "rank1/geometry/types.hpp"
#include "rank1/jacobi/riccati.hpp"
#include "rank1/lyapunov/exponents.hpp"
#include "rank1/orbits/bridge.hpp"
#include "rank1/orbits/coding.hpp"
#include "rank1/orbits/library.hpp"
#include "rank1/orbits/shooting.hpp"
#include "rank1/symbolic/sft.hpp"
#include "rank1/symbolic/suspension.hpp"
#include "rank1/thermo/curve.hpp"
#include "rank1/thermo/spectrum.hpp"
#include "rank1/cli/experiments.hpp"
