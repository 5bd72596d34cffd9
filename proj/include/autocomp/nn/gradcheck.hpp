#pragma once

// Central finite-difference verification of reverse-mode gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "autocomp/error.hpp"
#include "autocomp/nn/ops.hpp"
#include "autocomp/nn/tensor.hpp"

namespace autocomp::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  // Coordinates left out because x+h and x-h fall on different sides of a
  // ReLU or L1 kink, where the central difference is not a derivative.
  std::size_t kink_skips = 0;
};

// Scalar-valued function of tensors it has captured; records onto the tape
// when one is given.
using ScalarFn = std::function<Tensor<double>(Tape<double>*)>;

// Compares analytic gradients of fn w.r.t. each input against
// (f(x + h) - f(x - h)) / 2h, coordinate by coordinate. The per-coordinate
// error is |a - n| / max(|a|, |n|, 1e-8). Coordinates whose perturbation
// crosses a kink are counted in kink_skips instead of scored. `max_coords_per_input` > 0 checks an
// evenly strided subset of each input's coordinates.
inline GradCheckResult grad_check(const ScalarFn& fn, std::vector<Tensor<double>> inputs, double h = 1e-3,
                                  std::size_t max_coords_per_input = 0) {
  for (auto& in : inputs) {
    if (!in.requires_grad()) throw DataError("grad_check inputs must require gradients");
    in.zero_grad();
  }
  Tape<double> tape;
  Tensor<double> loss = fn(&tape);
  if (loss.numel() != 1) throw DataError("grad_check needs a scalar function");
  tape.backward(loss);

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& in = inputs[k];
    const std::vector<double> analytic =
        in.grad().empty() ? std::vector<double>(in.numel(), 0.0) : std::vector<double>(in.grad().begin(), in.grad().end());
    const std::size_t n = in.numel();
    const std::size_t stride =
        (max_coords_per_input == 0 || n <= max_coords_per_input) ? 1 : (n + max_coords_per_input - 1) / max_coords_per_input;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = in.data()[i];
      KinkRecorder up_kinks;
      KinkRecorder down_kinks;
      in.data()[i] = saved + h;
      kink_recorder = &up_kinks;
      const double up = fn(nullptr).item();
      in.data()[i] = saved - h;
      kink_recorder = &down_kinks;
      const double down = fn(nullptr).item();
      kink_recorder = nullptr;
      in.data()[i] = saved;
      if (up_kinks.pattern != down_kinks.pattern) {
        ++result.kink_skips;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (err >= result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = k;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace autocomp::nn
