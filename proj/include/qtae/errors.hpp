#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qtae {

/// A caller broke an operation's precondition (shape, arity, range).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN or Inf reached a value that must stay finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents. `offset()` is the byte position where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ContractError(message);
}

}  // namespace qtae
