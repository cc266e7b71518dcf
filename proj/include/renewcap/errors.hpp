#ifndef RENEWCAP_ERRORS_HPP
#define RENEWCAP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace renewcap {

// Raised when a computation cannot deliver the requested accuracy even after
// escalating precision.  Maps to process exit code 3 in the CLI.
class numerical_instability_error : public std::runtime_error {
 public:
  explicit numerical_instability_error(const std::string& what)
      : std::runtime_error(what) {}
};

// Raised when a replacement-age model makes the expected count infinite (or
// its finiteness cannot be certified).  Maps to process exit code 4.
class divergent_model_error : public std::runtime_error {
 public:
  explicit divergent_model_error(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace renewcap

#endif  // RENEWCAP_ERRORS_HPP
