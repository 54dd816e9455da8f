#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dyged/matrix.hpp"
#include "dyged/model.hpp"
#include "dyged/tape.hpp"

namespace dyged::gradcheck {

/// Entrywise |a-n| / max(|a|, |n|, floor), maximised over the tensor.
double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-6);

/// Central differences of a scalar function with respect to every entry of
/// `param`; `param` is perturbed in place and restored.
Matrix numeric_gradient(const std::function<double()>& f, Matrix& param, double step = 1e-5);

struct Options {
  std::size_t n = 5;
  std::size_t d = 3;
  std::size_t hidden = 4;
  std::size_t embed = 4;
  std::size_t k = 2;
  std::size_t windows = 5;
  std::uint64_t seed = 7;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
  /// Scales the adjoint of this op during backward (negative control).
  std::optional<ad::Op> corrupt;
};

struct TensorCheck {
  Variant variant = Variant::full;
  std::string tensor;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Builds a random toy dynamic graph, then compares analytic loss gradients
/// against central differences for every parameter tensor of every variant,
/// in eval mode. Throws ErrorKind::config unless n <= 8 and h <= 8.
std::vector<TensorCheck> check_model(const Options& options);

}  // namespace dyged::gradcheck
