#pragma once

#include <stdexcept>
#include <string>

namespace barecam {

// Invalid argument values (negative lengths, zero rates, ...).
struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Incompatible tensor/image dimensions.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed or truncated files.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation called out of order (backward before forward, missing checkpoint, ...).
struct StateError : std::logic_error {
    explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

// Allocation request over the configured budget; carries the size that was asked for.
struct SizeError : std::runtime_error {
    std::size_t required_bytes;
    SizeError(const std::string& msg, std::size_t bytes)
        : std::runtime_error(msg), required_bytes(bytes) {}
};

// Bad command line or config file usage.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace barecam
