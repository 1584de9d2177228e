#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace acrm {

enum class ErrorKind {
  Dimension,   // tensor shape mismatch
  Config,      // invalid configuration or shape arithmetic
  Input,       // bad user data (labels, loader payloads)
  Contract,    // API misuse, e.g. training with an unfrozen head
  Arithmetic,  // overflow
  Io,
  Format,      // malformed or corrupt file
};

std::string_view to_string(ErrorKind kind);

/// Process exit code used by the CLI for each error category.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace acrm
