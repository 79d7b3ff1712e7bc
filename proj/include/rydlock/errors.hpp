#pragma once

#include <stdexcept>
#include <string>

namespace rydlock {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent user configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure during integration: blow-up, step underflow (CLI exit code 3).
class NumericError : public Error {
public:
    NumericError(const std::string& what, double failure_time)
        : Error(what), time_(failure_time) {}

    double failure_time() const noexcept { return time_; }

private:
    double time_;
};

/// Analysis precondition not met (too few samples, nothing bracketed, ...).
class AnalysisError : public Error {
public:
    using Error::Error;
};

}  // namespace rydlock
