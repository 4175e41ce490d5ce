#pragma once

#include <stdexcept>
#include <string>

namespace prefalign {

// Every failure surfaced by the library carries a short machine-readable
// category ("shape-mismatch", "bad-magic", "tag-mismatch", ...) so the CLI can
// report a single parseable line.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

[[noreturn]] inline void fail(std::string category, const std::string& message) {
  throw Error(std::move(category), message);
}

inline void require(bool condition, const char* category, const std::string& message) {
  if (!condition) fail(category, message);
}

}  // namespace prefalign
