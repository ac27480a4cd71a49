#pragma once

#include <stdexcept>
#include <string>

namespace cpubone {

// Violated configuration constraint (divisibility, unsupported kernel, bad
// block/model layout). The CLI maps this to exit code 2.
class SpecError : public std::invalid_argument {
 public:
  explicit SpecError(const std::string& what) : std::invalid_argument(what) {}
};

class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Element count or MAC count does not fit in 64 bits.
class SizeError : public std::length_error {
 public:
  explicit SizeError(const std::string& what) : std::length_error(what) {}
};

}  // namespace cpubone
