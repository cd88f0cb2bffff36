#include "mlpenergy/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "mlpenergy/errors.hpp"

namespace mlpe {

std::string FitProblem::label_of(std::size_t row) const {
  if (row < labels.size() && !labels[row].empty())
    return labels[row];
  return "row " + std::to_string(row);
}

std::vector<double> nnls(const std::vector<std::vector<double>>& rows, const std::vector<double>& rhs) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(rows.empty() ? 0 : rows.front().size());
  Eigen::MatrixXd a(n, p);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b(i) = rhs[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j)
      a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }

  // Lawson-Hanson active set on the normal equations; p is small here.
  const Eigen::MatrixXd ata = a.transpose() * a;
  const Eigen::VectorXd atb = a.transpose() * b;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
  std::vector<bool> passive(static_cast<std::size_t>(p), false);
  const double tolerance = 1e-12 * std::max(1.0, atb.cwiseAbs().maxCoeff());

  const auto solve_passive = [&](const std::vector<bool>& set) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < p; ++j)
      if (set[static_cast<std::size_t>(j)])
        idx.push_back(j);
    Eigen::MatrixXd sub(idx.size(), idx.size());
    Eigen::VectorXd sub_rhs(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      sub_rhs(static_cast<Eigen::Index>(r)) = atb(idx[r]);
      for (std::size_t c = 0; c < idx.size(); ++c)
        sub(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = ata(idx[r], idx[c]);
    }
    const Eigen::VectorXd sub_x = sub.ldlt().solve(sub_rhs);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(p);
    for (std::size_t r = 0; r < idx.size(); ++r)
      full(idx[r]) = sub_x(static_cast<Eigen::Index>(r));
    return full;
  };

  for (int outer = 0; outer < 3 * static_cast<int>(p) + 10; ++outer) {
    const Eigen::VectorXd w = atb - ata * x;
    Eigen::Index best = -1;
    double best_w = tolerance;
    for (Eigen::Index j = 0; j < p; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    if (best < 0)
      break;
    passive[static_cast<std::size_t>(best)] = true;

    Eigen::VectorXd z = solve_passive(passive);
    for (int inner = 0; inner < 2 * static_cast<int>(p) + 10; ++inner) {
      double alpha = 1.0;
      bool all_positive = true;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (!passive[static_cast<std::size_t>(j)] || z(j) > 0)
          continue;
        all_positive = false;
        alpha = std::min(alpha, x(j) / (x(j) - z(j)));
      }
      if (all_positive)
        break;
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < p; ++j)
        if (passive[static_cast<std::size_t>(j)] && x(j) <= 1e-14 * std::abs(atb(j)))
          passive[static_cast<std::size_t>(j)] = false;
      for (Eigen::Index j = 0; j < p; ++j)
        if (!passive[static_cast<std::size_t>(j)])
          x(j) = 0;
      z = solve_passive(passive);
    }
    x = z.cwiseMax(0.0);
  }
  return {x.data(), x.data() + x.size()};
}

namespace {

struct ScaledProblem {
  Eigen::MatrixXd design;     // columns normalized to unit max
  Eigen::VectorXd log_target; // log(measured / geometric mean)
  Eigen::VectorXd target;     // measured / geometric mean
  std::vector<double> column_scale;
  double energy_scale = 1; // geometric mean of measured energies
};

double objective(const ScaledProblem& sp, const Eigen::VectorXd& k, Eigen::VectorXd* residual) {
  const Eigen::VectorXd prediction = sp.design * k;
  double value = 0;
  for (Eigen::Index i = 0; i < prediction.size(); ++i) {
    if (prediction(i) <= 0)
      return std::numeric_limits<double>::infinity();
    const double r = std::log(prediction(i)) - sp.log_target(i);
    if (residual)
      (*residual)(i) = r;
    value += r * r;
  }
  return value;
}

Eigen::VectorXd gradient(const ScaledProblem& sp, const Eigen::VectorXd& k) {
  const Eigen::VectorXd prediction = sp.design * k;
  Eigen::VectorXd weight(prediction.size());
  for (Eigen::Index i = 0; i < prediction.size(); ++i)
    weight(i) = 2 * (std::log(prediction(i)) - sp.log_target(i)) / prediction(i);
  return sp.design.transpose() * weight;
}

struct Descent {
  Eigen::VectorXd point;
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

double projected_gradient_norm(const Eigen::VectorXd& k, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lower) {
  double norm = 0;
  for (Eigen::Index j = 0; j < k.size(); ++j) {
    const double moved = std::max(lower(j), k(j) - g(j)) - k(j);
    norm = std::max(norm, std::abs(moved));
  }
  return norm;
}

// Projected gradient with backtracking; every accepted step decreases the
// objective. A periodic Newton step on the free coefficients sharpens
// convergence near the optimum (the dimension is tiny).
Descent minimize(const ScaledProblem& sp, Eigen::VectorXd start, const Eigen::VectorXd& lower,
                 const FitConfig& config) {
  Descent state;
  state.point = start.cwiseMax(lower);
  state.value = objective(sp, state.point, nullptr);
  state.history.push_back(state.value);
  if (!std::isfinite(state.value))
    return state;

  double step = 1.0;
  const int polish_period = 10;
  for (state.iterations = 0; state.iterations < config.max_iterations; ++state.iterations) {
    const Eigen::VectorXd g = gradient(sp, state.point);
    if (projected_gradient_norm(state.point, g, lower) <= config.tolerance) {
      state.converged = true;
      break;
    }

    Eigen::VectorXd direction = -g;
    if (config.newton_polish && state.iterations % polish_period == polish_period - 1) {
      // Newton direction restricted to coefficients off their bound.
      std::vector<Eigen::Index> free_set;
      for (Eigen::Index j = 0; j < state.point.size(); ++j)
        if (state.point(j) > lower(j) || g(j) < 0)
          free_set.push_back(j);
      if (!free_set.empty()) {
        const Eigen::VectorXd prediction = sp.design * state.point;
        Eigen::MatrixXd hessian =
            Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(free_set.size()),
                                  static_cast<Eigen::Index>(free_set.size()));
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(free_set.size()));
        for (std::size_t a = 0; a < free_set.size(); ++a)
          rhs(static_cast<Eigen::Index>(a)) = -g(free_set[a]);
        for (Eigen::Index i = 0; i < prediction.size(); ++i) {
          const double r = std::log(prediction(i)) - sp.log_target(i);
          const double curvature = 2 * (1 - r) / (prediction(i) * prediction(i));
          if (curvature <= 0)
            continue;
          for (std::size_t a = 0; a < free_set.size(); ++a)
            for (std::size_t b = 0; b < free_set.size(); ++b)
              hessian(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
                  curvature * sp.design(i, free_set[a]) * sp.design(i, free_set[b]);
        }
        hessian.diagonal().array() += 1e-12;
        const Eigen::VectorXd newton = hessian.ldlt().solve(rhs);
        double dot = 0;
        for (std::size_t a = 0; a < free_set.size(); ++a)
          dot += newton(static_cast<Eigen::Index>(a)) * g(free_set[a]);
        if (std::isfinite(newton.sum()) && dot < 0) {
          direction.setZero();
          for (std::size_t a = 0; a < free_set.size(); ++a)
            direction(free_set[a]) = newton(static_cast<Eigen::Index>(a));
          step = std::max(step, 1.0);
        }
      }
    }

    bool accepted = false;
    for (int backtrack = 0; backtrack < 60; ++backtrack) {
      const Eigen::VectorXd candidate = (state.point + step * direction).cwiseMax(lower);
      const Eigen::VectorXd delta = candidate - state.point;
      if (delta.lpNorm<Eigen::Infinity>() == 0)
        break;
      const double candidate_value = objective(sp, candidate, nullptr);
      // Sufficient decrease along the projected step.
      if (candidate_value <= state.value + 1e-4 * g.dot(delta)) {
        state.point = candidate;
        state.value = candidate_value;
        state.history.push_back(candidate_value);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No acceptable step at working precision.
      state.converged =
          projected_gradient_norm(state.point, gradient(sp, state.point), lower) <= config.tolerance;
      break;
    }
    step = std::min(step * 2, 1e12);
  }
  return state;
}

} // namespace

FitResult fit(const FitProblem& problem, const FitConfig& config) {
  const std::size_t n = problem.rows.size();
  const std::size_t p = problem.coefficient_count();
  if (n == 0 || p == 0)
    raise(errc::degenerate_design, "empty fit problem");
  if (problem.measured_j.size() != n)
    raise(errc::invalid_measurement, "row/measurement count mismatch");

  FitResult result;
  if (n < p)
    result.warnings.push_back("only " + std::to_string(n) + " runs for " + std::to_string(p) +
                              " coefficients; the fit is underdetermined");

  for (std::size_t i = 0; i < n; ++i) {
    if (problem.rows[i].size() != p)
      raise(errc::degenerate_design, "ragged design row at " + problem.label_of(i));
    if (!(problem.measured_j[i] > 0) || !std::isfinite(problem.measured_j[i]))
      raise(errc::invalid_measurement,
            "non-positive measured energy for " + problem.label_of(i));
    bool any = false;
    for (double v : problem.rows[i]) {
      if (v < 0 || !std::isfinite(v))
        raise(errc::degenerate_row, "negative or non-finite feature in " + problem.label_of(i));
      any = any || v > 0;
    }
    if (!any)
      raise(errc::degenerate_row, "all-zero design row for " + problem.label_of(i) +
                                      "; its prediction is zero for every feasible coefficient vector");
  }

  ScaledProblem sp;
  sp.column_scale.assign(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      sp.column_scale[j] = std::max(sp.column_scale[j], problem.rows[i][j]);

  std::vector<std::string> empty_columns;
  for (std::size_t j = 0; j < p; ++j)
    if (sp.column_scale[j] == 0) {
      empty_columns.push_back(j < problem.coefficient_names.size() ? problem.coefficient_names[j]
                                                                   : "k[" + std::to_string(j) + "]");
      sp.column_scale[j] = 1; // harmless; coefficient stays at 0
    }
  if (!empty_columns.empty() && config.check_rank) {
    std::string joined;
    for (const auto& name : empty_columns)
      joined += (joined.empty() ? "" : ", ") + name;
    raise(errc::degenerate_design, "coefficients without support in any run: " + joined);
  }

  double log_sum = 0;
  for (double e : problem.measured_j)
    log_sum += std::log(e);
  sp.energy_scale = std::exp(log_sum / static_cast<double>(n));

  sp.design.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  sp.target.resize(static_cast<Eigen::Index>(n));
  sp.log_target.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    sp.target(static_cast<Eigen::Index>(i)) = problem.measured_j[i] / sp.energy_scale;
    sp.log_target(static_cast<Eigen::Index>(i)) = std::log(sp.target(static_cast<Eigen::Index>(i)));
    for (std::size_t j = 0; j < p; ++j)
      sp.design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          problem.rows[i][j] / sp.column_scale[j];
  }

  if (config.check_rank) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sp.design);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(p)) {
      const auto permutation = qr.colsPermutation().indices();
      std::string joined;
      for (Eigen::Index r = qr.rank(); r < static_cast<Eigen::Index>(p); ++r) {
        const auto j = static_cast<std::size_t>(permutation(r));
        joined += (joined.empty() ? "" : ", ") +
                  (j < problem.coefficient_names.size() ? problem.coefficient_names[j]
                                                        : "k[" + std::to_string(j) + "]");
      }
      raise(errc::degenerate_design, "design is rank-deficient after scaling; "
                                     "unresolvable coefficients: " + joined);
    }
  }

  // Warm start: NNLS on the un-logged scaled system.
  std::vector<std::vector<double>> scaled_rows(n, std::vector<double>(p));
  std::vector<double> scaled_rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    scaled_rhs[i] = sp.target(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < p; ++j)
      scaled_rows[i][j] = sp.design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const auto warm = nnls(scaled_rows, scaled_rhs);
  Eigen::VectorXd warm_start(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j)
    warm_start(static_cast<Eigen::Index>(j)) = warm[j];

  // Keep every prediction strictly positive while iterating: when the warm
  // start leaves some run at zero, hold the run-overhead coefficient (whose
  // feature is identically 1) at a tiny floor.
  Eigen::VectorXd lower = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  const double floor_eps = 1e-9 / sp.energy_scale;
  const Eigen::VectorXd warm_prediction = sp.design * warm_start;
  if (warm_prediction.minCoeff() <= 0)
    lower(0) = floor_eps;

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.05, 1.0);

  Descent best;
  int total_iterations = 0;
  for (int start = 0; start < std::max(1, config.starts); ++start) {
    Eigen::VectorXd init;
    if (start == 0) {
      init = warm_start;
    } else {
      init.resize(static_cast<Eigen::Index>(p));
      for (Eigen::Index j = 0; j < init.size(); ++j)
        init(j) = unit(rng) / static_cast<double>(p);
    }
    Descent attempt = minimize(sp, init, lower, config);
    total_iterations += attempt.iterations;
    if (attempt.value < best.value ||
        (attempt.value == best.value && attempt.converged && !best.converged))
      best = std::move(attempt);
  }
  if (!std::isfinite(best.value))
    raise(errc::numeric, "no feasible starting point produced a finite objective");

  // Release the floor if it ended up active and dropping it is no worse.
  if (lower(0) > 0 && best.point(0) <= lower(0) * (1 + 1e-9)) {
    Eigen::VectorXd released = best.point;
    released(0) = 0;
    const double value = objective(sp, released, nullptr);
    if (value <= best.value) {
      best.point = released;
      best.value = value;
    }
  }

  result.iterations = total_iterations;
  result.converged = best.converged;
  result.objective_history = std::move(best.history);

  result.coefficients.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j)
    result.coefficients[j] =
        best.point(static_cast<Eigen::Index>(j)) * sp.energy_scale / sp.column_scale[j];

  result.predicted_j.resize(n);
  double abs_rel = 0;
  double log_sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double prediction = 0;
    for (std::size_t j = 0; j < p; ++j)
      prediction += problem.rows[i][j] * result.coefficients[j];
    result.predicted_j[i] = prediction;
    const double ratio = prediction / problem.measured_j[i];
    abs_rel += std::abs(ratio - 1);
    log_sq += std::log(ratio) * std::log(ratio);
  }
  result.mean_abs_rel_error = abs_rel / static_cast<double>(n);
  result.rms_log_ratio = std::sqrt(log_sq / static_cast<double>(n));
  return result;
}

} // namespace mlpe
