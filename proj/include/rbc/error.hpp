#pragma once

#include <stdexcept>
#include <string>

namespace rbc {

/// Failure category; the CLI maps these onto exit codes.
enum class ErrorKind { parameter, data, io };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_parameter(const std::string& what) {
  throw Error(ErrorKind::parameter, what);
}
[[noreturn]] inline void throw_data(const std::string& what) {
  throw Error(ErrorKind::data, what);
}
[[noreturn]] inline void throw_io(const std::string& what) {
  throw Error(ErrorKind::io, what);
}

}  // namespace rbc
