#pragma once

#include <stdexcept>
#include <string>

namespace pvm {

// Bad parameters or inconsistent shapes. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, malformed or inconsistent input data. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A non-finite activation was produced. CLI exit code 4.
class NumericFault : public std::runtime_error {
 public:
  NumericFault(int unit_id, const std::string& what)
      : std::runtime_error("unit " + std::to_string(unit_id) + ": " + what),
        unit_id_(unit_id) {}

  int unit_id() const { return unit_id_; }

 private:
  int unit_id_;
};

}  // namespace pvm
