#pragma once

#include <stdexcept>
#include <string>

namespace kyleback {

enum class ErrorKind {
  invalid_argument,
  assumption_violated,
  out_of_domain,
  singular_covariance,
  improper_conditioning,
  degenerate_phi,
  insufficient_sample,
  shape_mismatch,
  compatibility_violated,
  blow_up,
  solver_diverged,
  configuration,
  io
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace kyleback
