#include "mlpenergy/arch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mlpenergy/errors.hpp"

namespace mlpe {

namespace {

constexpr std::int64_t kMaxFirstHiddenWidth = std::int64_t{1} << 26;

std::int64_t round_width(double w) {
  return std::max<std::int64_t>(1, std::llround(w));
}

} // namespace

ShapeFamily ShapeFamily::parse(std::string_view token) {
  ShapeFamily shape;
  if (token == "rectangle") {
    shape.kind = Kind::rectangle;
  } else if (token == "rectangle_residual") {
    shape.kind = Kind::rectangle_residual;
  } else if (token == "trapezoid") {
    shape.kind = Kind::trapezoid;
  } else if (token == "exponential") {
    shape.kind = Kind::exponential;
  } else if (token.starts_with("wide_first")) {
    shape.kind = Kind::wide_first;
    std::string_view rest = token.substr(std::string_view("wide_first").size());
    if (rest.empty()) {
      shape.wide_factor = 2;
    } else {
      // wide_first_4x
      if (!rest.starts_with("_") || rest.size() < 3 || rest.back() != 'x')
        raise(errc::parse, "bad shape token '" + std::string(token) + "'");
      rest = rest.substr(1, rest.size() - 2);
      int factor = 0;
      for (char c : rest) {
        if (c < '0' || c > '9')
          raise(errc::parse, "bad shape token '" + std::string(token) + "'");
        factor = factor * 10 + (c - '0');
      }
      shape.wide_factor = factor;
    }
    if (shape.wide_factor < 2)
      raise(errc::parse, "wide_first factor must be >= 2");
  } else {
    raise(errc::parse, "unknown shape '" + std::string(token) + "'");
  }
  return shape;
}

std::string ShapeFamily::name() const {
  switch (kind) {
  case Kind::rectangle:
    return "rectangle";
  case Kind::rectangle_residual:
    return "rectangle_residual";
  case Kind::trapezoid:
    return "trapezoid";
  case Kind::exponential:
    return "exponential";
  case Kind::wide_first:
    return "wide_first_" + std::to_string(wide_factor) + "x";
  }
  return "?";
}

void TaskSpec::validate() const {
  if (n_features < 1 || n_outputs < 1 || n_train < 1 || n_test < 0 || batch_size < 1)
    raise(errc::invalid_architecture, "task counts must be positive");
  if (dtype_bytes != 2 && dtype_bytes != 4 && dtype_bytes != 8)
    raise(errc::invalid_architecture, "dtype_bytes must be one of {2,4,8}");
}

void NetworkArchitecture::validate() const {
  if (input_width < 1)
    raise(errc::invalid_architecture, "input width must be >= 1");
  if (layer_widths.empty())
    raise(errc::invalid_architecture, "architecture needs at least one layer");
  for (std::int64_t w : layer_widths)
    if (w < 1)
      raise(errc::invalid_architecture, "every layer width must be >= 1");
}

std::uint64_t count_parameters(const NetworkArchitecture& arch) {
  std::uint64_t total = 0;
  std::int64_t fan_in = arch.input_width;
  for (std::int64_t width : arch.layer_widths) {
    total += static_cast<std::uint64_t>(fan_in + 1) * static_cast<std::uint64_t>(width);
    fan_in = width;
  }
  return total;
}

std::vector<std::int64_t> family_widths(const ShapeFamily& shape, int depth, std::int64_t w,
                                        const TaskSpec& task) {
  const int hidden = depth - 1;
  std::vector<std::int64_t> widths(static_cast<std::size_t>(depth));
  widths.back() = task.n_outputs;
  switch (shape.kind) {
  case ShapeFamily::Kind::rectangle:
  case ShapeFamily::Kind::rectangle_residual:
    for (int i = 0; i < hidden; ++i)
      widths[static_cast<std::size_t>(i)] = w;
    break;
  case ShapeFamily::Kind::wide_first:
    for (int i = 0; i < hidden; ++i)
      widths[static_cast<std::size_t>(i)] = (i == 0) ? shape.wide_factor * w : w;
    break;
  case ShapeFamily::Kind::trapezoid:
    // Widths fall linearly from w at the first hidden layer to the output
    // width at the output layer; intermediate values round to nearest.
    for (int i = 0; i < hidden; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(depth - 1);
      widths[static_cast<std::size_t>(i)] =
          round_width(static_cast<double>(w) + (static_cast<double>(task.n_outputs) - static_cast<double>(w)) * t);
    }
    break;
  case ShapeFamily::Kind::exponential:
    // Geometric decay from w to the output width.
    for (int i = 0; i < hidden; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(depth - 1);
      widths[static_cast<std::size_t>(i)] =
          round_width(static_cast<double>(w) *
                      std::pow(static_cast<double>(task.n_outputs) / static_cast<double>(w), t));
    }
    break;
  }
  return widths;
}

namespace {

std::uint64_t family_ntp(const ShapeFamily& shape, int depth, std::int64_t w, const TaskSpec& task) {
  NetworkArchitecture arch;
  arch.input_width = task.n_features;
  arch.layer_widths = family_widths(shape, depth, w, task);
  return count_parameters(arch);
}

} // namespace

NetworkArchitecture solve_widths(const ShapeFamily& shape, int depth, std::uint64_t target_ntp,
                                 const TaskSpec& task) {
  task.validate();
  if (depth < 2)
    raise(errc::invalid_architecture, "depth must be >= 2");
  if (shape.kind == ShapeFamily::Kind::wide_first && shape.wide_factor < 2)
    raise(errc::invalid_architecture, "wide_first factor must be >= 2");

  const std::uint64_t minimum = family_ntp(shape, depth, 1, task);
  if (target_ntp < minimum)
    raise(errc::infeasible_target, "target parameter count " + std::to_string(target_ntp) +
                                       " below the family minimum " + std::to_string(minimum));

  // Parameter count is monotone non-decreasing in the first hidden width for
  // every family, so bisect for the smallest width reaching the target and
  // compare it with its predecessor. Equivalent to an exhaustive scan with
  // early exit on overshoot.
  std::int64_t lo = 1;
  std::int64_t hi = 1;
  while (family_ntp(shape, depth, hi, task) < target_ntp) {
    if (hi >= kMaxFirstHiddenWidth)
      break;
    lo = hi;
    hi = std::min(hi * 2, kMaxFirstHiddenWidth);
  }

  std::int64_t best_w;
  if (family_ntp(shape, depth, hi, task) < target_ntp) {
    best_w = hi; // target beyond the search cap; nearest reachable member
  } else {
    while (lo < hi) { // smallest w with ntp(w) >= target
      const std::int64_t mid = lo + (hi - lo) / 2;
      if (family_ntp(shape, depth, mid, task) >= target_ntp)
        hi = mid;
      else
        lo = mid + 1;
    }
    best_w = hi;
    if (hi > 1) {
      const std::uint64_t over = family_ntp(shape, depth, hi, task);
      const std::uint64_t under = family_ntp(shape, depth, hi - 1, task);
      const std::uint64_t d_over = over - target_ntp;
      const std::uint64_t d_under = target_ntp - under;
      if (d_under <= d_over) // ties go to the smaller architecture
        best_w = hi - 1;
    }
  }

  NetworkArchitecture arch;
  arch.input_width = task.n_features;
  arch.layer_widths = family_widths(shape, depth, best_w, task);
  arch.residual = shape.kind == ShapeFamily::Kind::rectangle_residual;
  arch.validate();
  return arch;
}

OpCounts count_ops(const NetworkArchitecture& arch, const TaskSpec& task) {
  arch.validate();
  task.validate();
  OpCounts ops;
  ops.forward = 2 * count_parameters(arch) * static_cast<std::uint64_t>(task.batch_size);
  ops.backward = 2 * ops.forward;
  return ops;
}

} // namespace mlpe
