#pragma once

// Umbrella header for the whole library.

#include "ebinv/core.hpp"
#include "ebinv/grouping.hpp"
#include "ebinv/instability.hpp"
#include "ebinv/io.hpp"
#include "ebinv/methods.hpp"
#include "ebinv/mixture.hpp"
#include "ebinv/newsvendor.hpp"
#include "ebinv/oracle.hpp"
#include "ebinv/posterior_f.hpp"
#include "ebinv/posterior_g.hpp"
#include "ebinv/priors.hpp"
#include "ebinv/simulation.hpp"
