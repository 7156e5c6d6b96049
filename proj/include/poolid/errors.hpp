#ifndef POOLID_ERRORS_HPP
#define POOLID_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace poolid {

// Exit codes used by the CLI. 0 is success.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigError = 2,
  kExitDataError = 3,
  kExitNumericError = 4,
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace poolid

#endif
