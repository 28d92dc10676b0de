#pragma once

#include <stdexcept>
#include <string>

namespace sparnet {

/// Dimension disagreement between arguments (batch sizes, vector lengths).
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent on-disk artifact (checkpoint, CSV, config file).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration detected before or during a run.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A required input artifact is absent (e.g. importance vector).
struct MissingArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values encountered; the offending update was refused.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Misuse of a single-shot object (e.g. backward on a consumed trace).
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

class TrainingFailedError : public std::runtime_error {
public:
    TrainingFailedError(const std::string& msg, double final_error)
        : std::runtime_error(msg), final_error_(final_error) {}
    double final_error() const { return final_error_; }

private:
    double final_error_;
};

}  // namespace sparnet
