#pragma once

#include <stdexcept>
#include <string>

namespace revarc {

// Exception tiers map onto CLI exit codes: UsageError -> 1,
// ValidationError -> 2, FatalError -> 4. Partial failures are not
// exceptions; they are reported through run reports.

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FatalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace revarc
