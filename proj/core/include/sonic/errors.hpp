#pragma once

#include <stdexcept>
#include <string>

namespace sonic {

/// Invalid network or training configuration, raised at construction time.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A loss, gradient or parameter update became non-finite.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, std::string block)
      : std::runtime_error(what + " (parameter block: " + block + ")"), block_(std::move(block)) {}

  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

}  // namespace sonic
