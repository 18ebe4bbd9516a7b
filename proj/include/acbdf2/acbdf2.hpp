#pragma once

// Umbrella header.

#include "acbdf2/adaptive.hpp"
#include "acbdf2/config.hpp"
#include "acbdf2/errors.hpp"
#include "acbdf2/experiments.hpp"
#include "acbdf2/kernels.hpp"
#include "acbdf2/pcg.hpp"
#include "acbdf2/simulation.hpp"
#include "acbdf2/spatial.hpp"
#include "acbdf2/stepper.hpp"
#include "acbdf2/time_mesh.hpp"
