#pragma once

#include <stdexcept>
#include <string>

namespace xlt {

// Each category maps onto one CLI exit code (1, 2, 3).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace xlt
