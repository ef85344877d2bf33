#pragma once

#include <stdexcept>
#include <string>

namespace ergolab {

/// Malformed input. `field` names the offending spec field (dotted path),
/// and is empty when the problem is not tied to one.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::invalid_argument(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A rank-1 map was applied on its top level, where the finite stage does
/// not define it.
class DepthExceeded : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// The requested computation has no exact or sampled route for this input.
class Unsupported : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite digit streams cannot decide the dyadic criterion.
class UndecidableInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace ergolab
