#pragma once

#include <spdlog/spdlog.h>

namespace udiff {

/// Shared stderr logger; level from UDIFF_LOG (error, info, debug), default info.
spdlog::logger& log();

}  // namespace udiff
