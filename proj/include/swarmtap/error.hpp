#pragma once

#include <stdexcept>
#include <string>

namespace swarmtap {

// Wire-level decode failure (bad prefix, truncation, non-canonical form, ...).
struct MalformedInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scenario configuration failed validation; carries the offending field path.
struct ConfigInvalid : std::runtime_error {
  ConfigInvalid(std::string field, const std::string& why)
      : std::runtime_error(field + ": " + why), field_path(std::move(field)) {}
  std::string field_path;
};

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoRelaysAvailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StreamClosed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace swarmtap
