#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mlpe {

// Error categories; the CLI maps these onto exit codes.
enum class errc {
  invalid_architecture,
  infeasible_target,
  parse,
  config_mismatch,
  numeric,
  degenerate_design,
  degenerate_row,
  invalid_measurement,
  insufficient_samples,
  missing_data,
  no_reference_runs,
  invalid_epoch_model,
};

class error : public std::runtime_error {
public:
  error(errc code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
  throw error(code, message);
}

} // namespace mlpe
