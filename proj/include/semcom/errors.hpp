#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

/// Invalid configuration or input file. CLI exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// All inputs to an orthogonalization were dropped as linearly dependent.
struct DegenerateBasisError : std::runtime_error {
    explicit DegenerateBasisError(const std::string& what) : std::runtime_error(what) {}
};

/// Runtime failure (divergence, agent contract violation). CLI exit code 2.
struct RuntimeFailure : std::runtime_error {
    explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace semcom
