#ifndef CMJ_ERRORS_HPP
#define CMJ_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cmj {

/// An operation declined to produce a result because the theory does not
/// cover the input (wrong regime, non-simple critical root, zero measure).
/// The CLI maps this to exit status 2.
class Refusal : public std::runtime_error {
 public:
  explicit Refusal(const std::string& what) : std::runtime_error(what) {}
};

/// A violated precondition or broken internal identity. Exit status 3.
class Fault : public std::logic_error {
 public:
  explicit Fault(const std::string& what) : std::logic_error(what) {}
};

}  // namespace cmj

#endif  // CMJ_ERRORS_HPP
