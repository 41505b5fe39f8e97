#pragma once
// Umbrella header.

#include "bitcore.hpp"       // IWYU pragma: export
#include "compile.hpp"       // IWYU pragma: export
#include "errors.hpp"        // IWYU pragma: export
#include "folding.hpp"       // IWYU pragma: export
#include "kernels.hpp"       // IWYU pragma: export
#include "modelio.hpp"       // IWYU pragma: export
#include "oracle.hpp"        // IWYU pragma: export
#include "perfmodel.hpp"     // IWYU pragma: export
#include "presets.hpp"       // IWYU pragma: export
#include "random.hpp"        // IWYU pragma: export
#include "streamsim.hpp"     // IWYU pragma: export
#include "topology.hpp"      // IWYU pragma: export
