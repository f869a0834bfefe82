#pragma once

#include "harpagon/dispatch.hpp"
#include "harpagon/oracle.hpp"
#include "harpagon/pipeline.hpp"
#include "harpagon/scheduler.hpp"
#include "harpagon/simulator.hpp"
#include "harpagon/splitter.hpp"
#include "harpagon/synth.hpp"
#include "harpagon/types.hpp"
#include "harpagon/workload.hpp"
