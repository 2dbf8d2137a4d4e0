#ifndef SEGZIP_ERRORS_HPP
#define SEGZIP_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace segzip {

// Raised when the marginal likelihood (or one of its building blocks)
// cannot be evaluated at the requested parameter value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, int block, long long obs = -1)
      : std::runtime_error(what), block_(block), obs_(obs) {}
  int block() const { return block_; }
  long long observation() const { return obs_; }

 private:
  int block_;
  long long obs_;
};

// CSV / config parse failure; carries the 1-based file line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace segzip

#endif
