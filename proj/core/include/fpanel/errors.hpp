#pragma once

#include <stdexcept>
#include <string>

namespace fpanel {

/// Raised when input data violates a documented precondition
/// (bad grids, ragged panels, malformed files, out-of-range arguments).
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when a computation cannot proceed numerically
/// (rank-deficient designs, degenerate fits, failed iterations).
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fpanel
