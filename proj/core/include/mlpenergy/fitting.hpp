#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mlpe {

struct FitProblem {
  std::vector<std::vector<double>> rows; // design rows, one per run
  std::vector<double> measured_j;        // measured energy per run, > 0
  std::vector<std::string> labels;       // optional run ids for diagnostics
  std::vector<std::string> coefficient_names;

  std::size_t coefficient_count() const { return rows.empty() ? 0 : rows.front().size(); }
  std::string label_of(std::size_t row) const;
};

struct FitConfig {
  double tolerance = 1e-8; // projected-gradient norm on the scaled problem
  int max_iterations = 20000;
  std::uint64_t seed = 987654321; // multi-start initializer
  int starts = 4;                 // warm start plus starts-1 random restarts
  bool check_rank = true;
  bool newton_polish = true;
};

struct FitResult {
  std::vector<double> coefficients; // >= 0, aligned with coefficient_names
  double mean_abs_rel_error = 0;    // mean |predicted/measured - 1|
  double rms_log_ratio = 0;         // sqrt(mean log(predicted/measured)^2)
  int iterations = 0;
  bool converged = false;
  std::vector<double> predicted_j;
  std::vector<double> objective_history; // accepted iterates, non-increasing
  std::vector<std::string> warnings;
};

// Nonnegative least squares on the plain (un-logged) system, min ||A x - b||.
std::vector<double> nnls(const std::vector<std::vector<double>>& rows, const std::vector<double>& rhs);

// Minimize sum over runs of log(prediction/measured)^2 subject to k >= 0.
// Projected gradient with backtracking line search from an NNLS warm start
// (plus random restarts), then a projected Newton polish on the free
// coefficients. Deterministic for a fixed config.
FitResult fit(const FitProblem& problem, const FitConfig& config = {});

} // namespace mlpe
