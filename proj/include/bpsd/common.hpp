// ============================================================================
// common.hpp - shared error types and version constants
// ============================================================================
#pragma once

#include <stdexcept>
#include <string>

namespace bpsd {

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kModelFormatVersion = 1;

// Error taxonomy, mapped to CLI exit codes (config=2, data=3, train=4).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when an instance tagged as test data reaches a fit call.
struct LeakageError : TrainError {
    using TrainError::TrainError;
};

} // namespace bpsd
