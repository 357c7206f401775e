#pragma once

#include "forceframe/errors.hpp"
#include "forceframe/spatial.hpp"
#include "forceframe/modes.hpp"
#include "forceframe/contact_models.hpp"
#include "forceframe/environment.hpp"
#include "forceframe/demo.hpp"
#include "forceframe/scenarios.hpp"
#include "forceframe/recovery.hpp"
#include "forceframe/task_structure.hpp"
#include "forceframe/controller.hpp"
#include "forceframe/trajectory.hpp"
#include "forceframe/scheduler.hpp"
#include "forceframe/metrics.hpp"
#include "forceframe/config.hpp"
