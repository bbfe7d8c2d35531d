#pragma once

// Umbrella header: spin-cavity simulator and fitting toolkit for a large
// (half-integer) spin ensemble in a tetragonal crystal field coupled to a
// microwave cavity mode.

#include "spincav/cavity.hpp"
#include "spincav/commands.hpp"
#include "spincav/config.hpp"
#include "spincav/constants.hpp"
#include "spincav/csv.hpp"
#include "spincav/dynamics.hpp"
#include "spincav/eigensystem.hpp"
#include "spincav/ensemble.hpp"
#include "spincav/errors.hpp"
#include "spincav/fitkit.hpp"
#include "spincav/level_diagram.hpp"
#include "spincav/levmar.hpp"
#include "spincav/manifest.hpp"
#include "spincav/spectra.hpp"
#include "spincav/spin_operators.hpp"
#include "spincav/spin_system.hpp"
#include "spincav/stevens.hpp"
