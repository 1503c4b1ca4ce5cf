// Umbrella header.

#pragma once

#include "splitmcmc/diagnostics.hpp"
#include "splitmcmc/errors.hpp"
#include "splitmcmc/experiments.hpp"
#include "splitmcmc/gaussian.hpp"
#include "splitmcmc/json_io.hpp"
#include "splitmcmc/linalg.hpp"
#include "splitmcmc/numerics.hpp"
#include "splitmcmc/proposals.hpp"
#include "splitmcmc/random.hpp"
#include "splitmcmc/sampler.hpp"
#include "splitmcmc/spectral.hpp"
#include "splitmcmc/splitting.hpp"
