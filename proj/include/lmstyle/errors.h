#ifndef LMSTYLE_ERRORS_H_
#define LMSTYLE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace lmstyle {

// Raised when a caller breaks an operation's preconditions. Maps to exit code 1.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Raised when a loss or metric becomes non-finite. Maps to exit code 2.
class NumericalDivergence : public std::runtime_error {
 public:
  explicit NumericalDivergence(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lmstyle

#define LMS_REQUIRE(cond, msg)                                              \
  do {                                                                      \
    if (!(cond)) {                                                          \
      throw ::lmstyle::ContractViolation(std::string(__func__) + ": " + (msg)); \
    }                                                                       \
  } while (0)

#endif  // LMSTYLE_ERRORS_H_
