#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace horizon {

// Domain error with a stable machine-readable code next to the human message.
// Codes are part of the tool contract (they surface in CLI output and tests).
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool ok, const std::string& code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

}  // namespace horizon
