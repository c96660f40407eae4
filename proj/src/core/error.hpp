#pragma once

#include <stdexcept>
#include <string>

namespace marscache {

// Library-wide failure categories. The C API maps each to a status code.
enum class ErrorKind {
    invalid_argument,
    config,
    io,
    numeric,
    state,
    check_failed,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string & message) : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string & message) {
    throw Error(kind, message);
}

}  // namespace marscache
