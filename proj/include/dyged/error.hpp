#pragma once

#include <stdexcept>
#include <string>

namespace dyged {

enum class ErrorKind {
  dimension,
  config,
  parse,
  io,
  contract,
  undefined_metric,
};

// All library failures surface as dyged::Error; the kind drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace dyged
