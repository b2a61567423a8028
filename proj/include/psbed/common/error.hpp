#pragma once

#include <stdexcept>
#include <string>

namespace psbed {

// Bad user input: malformed config file, unknown keys, out-of-range values.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A runtime invariant was violated (clock gap over bound, double commit,
// negative count, deadlock, ...). The CLI maps this to exit code 3.
class InvariantError : public std::runtime_error {
 public:
  explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
[[noreturn]] void CheckFailed(const char* expr, const char* file, int line,
                              const std::string& msg);
}  // namespace detail

}  // namespace psbed

// CHECK-style guard for runtime invariants. Throws InvariantError so callers
// (CLI, tests) can map failures to diagnostics instead of aborting.
#define PSBED_CHECK(cond)                                            \
  do {                                                               \
    if (!(cond)) ::psbed::detail::CheckFailed(#cond, __FILE__, __LINE__, ""); \
  } while (0)

#define PSBED_CHECK_MSG(cond, msg)                                     \
  do {                                                                 \
    if (!(cond)) ::psbed::detail::CheckFailed(#cond, __FILE__, __LINE__, (msg)); \
  } while (0)
