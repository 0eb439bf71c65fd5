#pragma once

// Everything in one include.

#include "nrmkit/dependency_ops.hpp"
#include "nrmkit/error.hpp"
#include "nrmkit/levy.hpp"
#include "nrmkit/logging.hpp"
#include "nrmkit/moments.hpp"
#include "nrmkit/ngg_posterior.hpp"
#include "nrmkit/quadrature.hpp"
#include "nrmkit/random.hpp"
#include "nrmkit/slice_sampler.hpp"
#include "nrmkit/special_math.hpp"
#include "nrmkit/tak.hpp"
#include "nrmkit/verify.hpp"
