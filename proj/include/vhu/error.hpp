#pragma once

#include <stdexcept>
#include <string>

namespace vhu {

// Shape or extent violation in an op precondition.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf produced by an op, or a non-finite optimizer update.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Misuse of the gradient tape (non-scalar loss, detached graph, missing grad).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad run configuration: unknown key, unparsable value, invalid path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or missing input data: unreadable container, unpaired files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vhu
