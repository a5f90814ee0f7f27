#pragma once

#include <stdexcept>
#include <string>

namespace qccs {

// Error taxonomy shared by the library and the CLI; the CLI maps kinds to
// distinct exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    Validation,  // invariant violated on construction or call
    Parse,       // concrete-syntax or document errors (exit code 2)
    Budget,      // state/time budget exceeded (exit code 3)
    Verdict,     // expected-verdict mismatch (exit code 4)
    Io,
    Internal,
  };

  Error(Kind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& msg) {
  throw Error(Error::Kind::Validation, msg);
}
[[noreturn]] inline void fail_parse(const std::string& msg) {
  throw Error(Error::Kind::Parse, msg);
}
[[noreturn]] inline void fail_budget(const std::string& msg) {
  throw Error(Error::Kind::Budget, msg);
}

}  // namespace qccs
