#pragma once

#include "rowtrack/config.hpp"
#include "rowtrack/config_file.hpp"
#include "rowtrack/error.hpp"
#include "rowtrack/events.hpp"
#include "rowtrack/frontend.hpp"
#include "rowtrack/geometry.hpp"
#include "rowtrack/line_codec.hpp"
#include "rowtrack/metrics.hpp"
#include "rowtrack/mitigation.hpp"
#include "rowtrack/mtt.hpp"
#include "rowtrack/oracle.hpp"
#include "rowtrack/sac.hpp"
#include "rowtrack/simulator.hpp"
#include "rowtrack/trace.hpp"
#include "rowtrack/tracker.hpp"
