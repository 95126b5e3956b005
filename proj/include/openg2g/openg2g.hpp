#pragma once

// umbrella header

#include "openg2g/clock.hpp"
#include "openg2g/command.hpp"
#include "openg2g/common.hpp"
#include "openg2g/config.hpp"
#include "openg2g/controller.hpp"
#include "openg2g/controllers.hpp"
#include "openg2g/datacenter.hpp"
#include "openg2g/episode.hpp"
#include "openg2g/events.hpp"
#include "openg2g/feeder.hpp"
#include "openg2g/grid.hpp"
#include "openg2g/io.hpp"
#include "openg2g/library.hpp"
#include "openg2g/logistic.hpp"
#include "openg2g/metrics.hpp"
#include "openg2g/model_spec.hpp"
#include "openg2g/power_flow.hpp"
#include "openg2g/rng.hpp"
#include "openg2g/scenario.hpp"
#include "openg2g/sim_loop.hpp"
#include "openg2g/trace.hpp"
