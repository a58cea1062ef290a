#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace mensura {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Verbosity from MENSURA_LOG (error|warn|info|debug); warnings by default.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("MENSURA_LOG");
        if (!env) return LogLevel::Warn;
        std::string v(env);
        if (v == "error") return LogLevel::Error;
        if (v == "warn") return LogLevel::Warn;
        if (v == "info") return LogLevel::Info;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log(LogLevel level, const std::string& msg) {
    if (level > log_level()) return;
    const char* tag = level == LogLevel::Error  ? "error"
                      : level == LogLevel::Warn ? "warn"
                      : level == LogLevel::Info ? "info"
                                                : "debug";
    std::cerr << "mensura: " << tag << ": " << msg << "\n";
}

}  // namespace mensura
