#pragma once

#include "circlaw/ensembles.hpp"
#include "circlaw/experiments.hpp"
#include "circlaw/lattice.hpp"
#include "circlaw/numeric.hpp"
#include "circlaw/rng.hpp"
#include "circlaw/spectral.hpp"
#include "circlaw/stats.hpp"
#include "circlaw/transport.hpp"
