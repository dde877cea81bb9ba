#pragma once

// Umbrella header for the solver library. The JSON-dependent pieces
// (graph_io.hpp, solution_file.hpp, cli.hpp) are included separately.

#include "graphmfe/elliptic.hpp"
#include "graphmfe/errors.hpp"
#include "graphmfe/generators.hpp"
#include "graphmfe/graph.hpp"
#include "graphmfe/monotone.hpp"
#include "graphmfe/torus.hpp"
#include "graphmfe/variational.hpp"
