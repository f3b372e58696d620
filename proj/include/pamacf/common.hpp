#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pamacf {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;

inline constexpr const char* kVersion = "0.1.0";

enum class ErrorKind { usage, data, numerical };

// Base exception. The kind maps onto the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace pamacf
