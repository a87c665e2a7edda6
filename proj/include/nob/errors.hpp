#pragma once

#include <stdexcept>
#include <string>

namespace nob {

// Exit-code mapping used by the CLI: config -> 2, data format -> 3, numeric -> 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : ConfigError {
    explicit ShapeError(const std::string& msg) : ConfigError(msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg, long long byte_offset = -1)
        : std::runtime_error(byte_offset >= 0 ? msg + " (byte offset " + std::to_string(byte_offset) + ")"
                                              : msg),
          offset(byte_offset) {}
    long long offset;
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nob
