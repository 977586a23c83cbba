#pragma once

// Umbrella header for the classical solvers.

#include "alns.hpp"   // IWYU pragma: export
#include "ga.hpp"     // IWYU pragma: export
#include "split.hpp"  // IWYU pragma: export
#include "ts.hpp"     // IWYU pragma: export
