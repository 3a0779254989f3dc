#include "log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <string_view>

namespace udiff {

namespace {

spdlog::level::level_enum level_from_env() {
    const char* value = std::getenv("UDIFF_LOG");
    if (value == nullptr) return spdlog::level::info;
    const std::string_view v(value);
    if (v == "error") return spdlog::level::err;
    if (v == "debug") return spdlog::level::debug;
    if (v == "warn") return spdlog::level::warn;
    if (v == "off") return spdlog::level::off;
    return spdlog::level::info;
}

}  // namespace

spdlog::logger& log() {
    static const auto logger = [] {
        auto l = spdlog::stderr_color_st("udiff");
        l->set_level(level_from_env());
        l->set_pattern("[%l] %v");
        return l;
    }();
    return *logger;
}

}  // namespace udiff
