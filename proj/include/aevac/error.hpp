#pragma once

#include <stdexcept>
#include <string>

namespace aevac {

/// Malformed or inconsistent input documents (floor plans, histories, configs).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometry that parses but cannot be turned into a navigable model.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No exit reachable from a query point.
class RouteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Project configuration problems (missing files, bad references).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aevac
