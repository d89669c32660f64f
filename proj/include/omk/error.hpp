#pragma once

#include <stdexcept>
#include <string>

namespace omk {

// Failure raised for bad data, violated preconditions and I/O problems. The CLI
// maps it to exit code 1; usage problems are reported separately.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace omk
