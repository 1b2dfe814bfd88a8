#pragma once

#include <stdexcept>
#include <string>

namespace diffpaint {

// Error taxonomy mirrors the CLI exit codes: config/usage -> 1,
// data/shape -> 2, numerical divergence -> 3.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

class VariantMismatchError : public DataError {
 public:
  explicit VariantMismatchError(const std::string& msg) : DataError(msg) {}
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& msg, int timestep)
      : std::runtime_error(msg + " (timestep " + std::to_string(timestep) + ")"),
        timestep_(timestep) {}
  int timestep() const { return timestep_; }

 private:
  int timestep_;
};

}  // namespace diffpaint
