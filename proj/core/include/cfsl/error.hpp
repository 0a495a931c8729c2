#ifndef CFSL_ERROR_HPP_
#define CFSL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace cfsl {

// File, parse and serialization failures. The CLI maps these to exit code 1.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Violations of the pipeline's domain contracts (degenerate noise pools,
// batches without positive pairs, class coverage, divergence). Exit code 2.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cfsl

#endif  // CFSL_ERROR_HPP_
