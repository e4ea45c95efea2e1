#pragma once
// Umbrella header.

#include "ipspad/core.hpp"
#include "ipspad/estimate.hpp"
#include "ipspad/imaging.hpp"
#include "ipspad/io.hpp"
#include "ipspad/noise.hpp"
#include "ipspad/parallel.hpp"
#include "ipspad/rng.hpp"
#include "ipspad/sim.hpp"
#include "ipspad/stats.hpp"
