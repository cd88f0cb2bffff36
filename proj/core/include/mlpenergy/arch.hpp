#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mlpe {

// MLP width-profile family. wide_factor applies to wide_first only.
struct ShapeFamily {
  enum class Kind { rectangle, rectangle_residual, trapezoid, exponential, wide_first };

  Kind kind = Kind::rectangle;
  int wide_factor = 2; // >= 2

  // Accepts "rectangle", "rectangle_residual", "trapezoid", "exponential",
  // "wide_first_4x" (any factor >= 2).
  static ShapeFamily parse(std::string_view token);
  std::string name() const;
};

struct TaskSpec {
  std::int64_t n_features = 1;
  std::int64_t n_outputs = 1;
  std::int64_t n_train = 1;
  std::int64_t n_test = 0;
  std::int64_t batch_size = 256;
  int dtype_bytes = 4; // bytes per scalar, one of {2,4,8}

  void validate() const;
};

// Concrete layer widths: hidden layers first, output layer last. depth is the
// number of parameterized layers, so it counts the output layer.
struct NetworkArchitecture {
  std::int64_t input_width = 1;
  std::vector<std::int64_t> layer_widths;
  bool residual = false;

  std::size_t depth() const { return layer_widths.size(); }
  void validate() const;
};

// FLOPs per training batch.
struct OpCounts {
  std::uint64_t forward = 0;
  std::uint64_t backward = 0;
};

// Sum over layers of (fan_in + 1) * width; the +1 is the bias column.
// Residual links add no parameters.
std::uint64_t count_parameters(const NetworkArchitecture& arch);

// Widths of the family member with first hidden width w (before searching).
std::vector<std::int64_t> family_widths(const ShapeFamily& shape, int depth, std::int64_t first_hidden_width,
                                        const TaskSpec& task);

// Architecture of the family whose parameter count is nearest target_ntp;
// on a distance tie the smaller architecture wins.
NetworkArchitecture solve_widths(const ShapeFamily& shape, int depth, std::uint64_t target_ntp,
                                 const TaskSpec& task);

// forward = 2 * parameters * batch (one multiply-accumulate per parameter per
// datum); backward = 2 * forward (parameter-gradient plus activation-gradient
// products). Activation and optimizer ops are excluded; overheads absorb them.
OpCounts count_ops(const NetworkArchitecture& arch, const TaskSpec& task);

} // namespace mlpe
