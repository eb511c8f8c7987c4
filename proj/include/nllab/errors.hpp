#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nllab {

// Bad config key/value. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(message), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

// Non-finite value or broken numeric invariant mid-run. The CLI maps this
// to exit code 3 and reports the offending epoch when known.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& message, int epoch = -1)
        : std::runtime_error(message), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

// Malformed binary or text input; offset is the byte position where
// parsing stopped making sense.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t offset)
        : std::runtime_error(message + " (byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

} // namespace nllab
