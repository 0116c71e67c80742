#pragma once

#include <stdexcept>
#include <string>

namespace nadsnet {

// Shape / channel mismatches between tensors or layer declarations.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid ArchitectureConfig / TargetConfig / ParseConfig values.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed on-disk payloads (bad magic, truncation, unparsable text).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Records that parse but violate a schema invariant.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad arguments to library calls (non-positive reference, unknown key, ...).
struct ArgumentError : std::runtime_error {
    explicit ArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nadsnet
