#pragma once

#include "linrl/agents.hpp"
#include "linrl/bridge.hpp"
#include "linrl/envs.hpp"
#include "linrl/error.hpp"
#include "linrl/exploration.hpp"
#include "linrl/features.hpp"
#include "linrl/harness.hpp"
#include "linrl/random.hpp"
#include "linrl/stats.hpp"
