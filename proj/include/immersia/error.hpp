#pragma once

#include <stdexcept>
#include <string>

namespace immersia {

enum class ErrorCode {
  invalid_argument,
  invalid_shape,
  unsupported_order,
  unsupported_dimension,
  unsupported_codimension,
  unsupported,
  degenerate_metric,
  invalid_exponent,
  precondition,
  tangency,
  singular_configuration,
  search_failure,
  oscillation_too_large,
  projection_singular,
  inversion_singular,
  solver_failure,
  fold_detected,
  insufficient_overlap,
  io,
};

const char* error_code_name(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace immersia
