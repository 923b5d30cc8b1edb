#pragma once

#include "mala/analytic.hpp"
#include "mala/common.hpp"
#include "mala/diagnostics.hpp"
#include "mala/initializers.hpp"
#include "mala/quadrature.hpp"
#include "mala/rng.hpp"
#include "mala/sampler.hpp"
#include "mala/targets.hpp"
