#pragma once

#include <stdexcept>
#include <string>

namespace surfblc {

struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// thrown when an operation is called out of sequence, e.g. backward()
// before any forward pass
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace surfblc
