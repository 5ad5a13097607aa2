#pragma once

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace confluence::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Reads CONFLUENCE_LOG once; unknown or unset values mean `warn`.
inline Level threshold() {
    static const Level level = [] {
        const char* env = std::getenv("CONFLUENCE_LOG");
        const std::string_view v = env ? env : "";
        if (v == "error") return Level::error;
        if (v == "info") return Level::info;
        if (v == "debug") return Level::debug;
        return Level::warn;
    }();
    return level;
}

inline constexpr std::string_view name(Level l) {
    switch (l) {
        case Level::error: return "error";
        case Level::warn: return "warn";
        case Level::info: return "info";
        case Level::debug: return "debug";
    }
    return "?";
}

template <typename... Args>
void write(Level level, const Args&... args) {
    if (static_cast<int>(level) > static_cast<int>(threshold())) return;
    std::cerr << "[confluence " << name(level) << "] ";
    (std::cerr << ... << args) << '\n';
}

template <typename... Args> void error(const Args&... a) { write(Level::error, a...); }
template <typename... Args> void warn(const Args&... a) { write(Level::warn, a...); }
template <typename... Args> void info(const Args&... a) { write(Level::info, a...); }
template <typename... Args> void debug(const Args&... a) { write(Level::debug, a...); }

}  // namespace confluence::log
