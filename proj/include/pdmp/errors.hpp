#pragma once

#include <stdexcept>
#include <string>

namespace pdmp {

/// Simulation produced a state the model's own components disallow.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// q_hat was read before any pre-jump location fell near x.
class ZeroDenominator : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pdmp
