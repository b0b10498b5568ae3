#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace momalign {

// Invalid argument or violated precondition.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A computation would need more grid points than permitted.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, std::int64_t required)
      : std::runtime_error(what), required_(required) {}

  std::int64_t required() const noexcept { return required_; }

 private:
  std::int64_t required_;
};

}  // namespace momalign
