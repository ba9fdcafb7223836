#pragma once

#include <stdexcept>
#include <string>

namespace rhpt {

// File-system and serialization failures (unreadable path, malformed CSV,
// truncated sketch dump).  The CLI maps this to exit code 3.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally valid input on which the requested statistic is undefined:
// a treatment vector with an empty arm, a dataset without the ground-truth
// columns a diagnostic needs, too few samples to split.  The CLI maps this
// to exit code 4.  Invalid configuration (bad field values, unknown method
// labels) throws std::invalid_argument instead and maps to exit code 2.
class DegenerateData : public std::runtime_error {
 public:
  explicit DegenerateData(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace rhpt
