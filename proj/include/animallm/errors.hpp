#pragma once

#include <stdexcept>
#include <string>

namespace animallm {

// Raised when inputs fail a precondition that the caller could have checked
// (bad file, bad flag value, mismatched run parameters). The CLI maps this
// family to exit code 1; everything else is a runtime failure (exit code 2).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace animallm
