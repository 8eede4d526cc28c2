#pragma once

#include "aquarium/control.hpp"
#include "aquarium/display.hpp"
#include "aquarium/domain.hpp"
#include "aquarium/event_log.hpp"
#include "aquarium/metrics.hpp"
#include "aquarium/plant.hpp"
#include "aquarium/publisher.hpp"
#include "aquarium/runtime.hpp"
#include "aquarium/serialization.hpp"
#include "aquarium/service.hpp"
#include "aquarium/signal.hpp"
#include "aquarium/text_config.hpp"
#include "aquarium/time.hpp"
#include "aquarium/trace.hpp"
