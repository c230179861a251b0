#pragma once

// Umbrella header: subset sampling, the additive performance surrogate,
// threshold selection, the synthetic linear-Gaussian benchmark world,
// brute-force verification oracles, the external-oracle file protocol, and
// the end-to-end pipeline.

#include "tasksel/core.hpp"
#include "tasksel/errors.hpp"
#include "tasksel/extoracle.hpp"
#include "tasksel/io.hpp"
#include "tasksel/metrics.hpp"
#include "tasksel/oracle.hpp"
#include "tasksel/parallel.hpp"
#include "tasksel/pipeline.hpp"
#include "tasksel/prng.hpp"
#include "tasksel/selection.hpp"
#include "tasksel/surrogate.hpp"
#include "tasksel/synthworld.hpp"
#include "tasksel/textio.hpp"
