#pragma once

#include <stdexcept>
#include <string>

namespace sv {

// Toolkit error with a stable machine-readable code ("NonPositiveDepth",
// "ViewMismatch", ...). The CLI maps these to diagnostic lines and exit
// status 2.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

}  // namespace sv
