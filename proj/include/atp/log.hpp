#pragma once

#include <spdlog/spdlog.h>

namespace atp {

/// Sets the global log level from ATP_LOG (error, info, debug); default info.
void init_logging_from_env();

}  // namespace atp
