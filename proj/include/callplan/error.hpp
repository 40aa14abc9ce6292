#pragma once

#include <stdexcept>
#include <string>

namespace callplan {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

/// Malformed input data (CSV rows, schema violations). CLI exit code 1.
class DataError : public Error {
  public:
    explicit DataError(const std::string &msg) : Error(msg) {}
};

/// Invalid configuration (bad thresholds, weights, flags). CLI exit code 2.
class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string &msg) : Error(msg) {}
};

/// E2C ratio requested over a window with zero connections.
class NoConnectionsError : public Error {
  public:
    explicit NoConnectionsError(const std::string &msg) : Error(msg) {}
};

/// A labeled example cannot be formed from the given history.
class SampleUnavailableError : public Error {
  public:
    explicit SampleUnavailableError(const std::string &msg) : Error(msg) {}
};

/// Transition row has no observations and no smoothing was requested.
class UndefinedRowError : public Error {
  public:
    explicit UndefinedRowError(const std::string &msg) : Error(msg) {}
};

/// Training loss became non-finite.
class TrainingDivergedError : public Error {
  public:
    explicit TrainingDivergedError(const std::string &msg) : Error(msg) {}
};

} // namespace callplan
