#pragma once

#include <stdexcept>
#include <string>

namespace skelattack {

// All recoverable failures in the library surface as this type; the CLI maps
// it to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace skelattack
