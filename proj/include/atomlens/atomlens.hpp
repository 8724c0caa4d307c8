#pragma once

// umbrella header: everything except the CLI layer (which drags in CLI11)

#include "config.hpp"
#include "constants.hpp"
#include "csvio.hpp"
#include "efficiency.hpp"
#include "errors.hpp"
#include "fft.hpp"
#include "field.hpp"
#include "fitting.hpp"
#include "jones.hpp"
#include "lens_design.hpp"
#include "lifetime.hpp"
#include "propagation.hpp"
#include "rng.hpp"
#include "species.hpp"
#include "telegraph.hpp"
#include "tweezer.hpp"
#include "util.hpp"
