#pragma once

// Finite-difference checks of every differentiable op, the building blocks
// and the full fusion network with its training loss, in double precision on
// tensors no larger than 2x4x8x8. Inputs sit away from ReLU/L1 kinks and the
// cross-entropy clamp so central differences stay valid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "autocomp/error.hpp"
#include "autocomp/mlf.hpp"
#include "autocomp/nn/gradcheck.hpp"
#include "autocomp/nn/layers.hpp"
#include "autocomp/nn/ops.hpp"

namespace autocomp {

struct GradSuiteCase {
  std::string name;
  nn::GradCheckResult result;
  bool passed = false;
};

inline constexpr double kGradTolerance = 1e-3;

namespace detail {

using DTensor = nn::Tensor<double>;

inline DTensor random_tensor(nn::Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0, bool grad = true) {
  DTensor t(s, 0.0, grad);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// Values with |v| in [0.1, 1] and random sign.
inline DTensor off_kink_tensor(nn::Shape s, std::mt19937_64& rng) {
  DTensor t(s, 0.0, true);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

// Constant target that keeps every element of `value` at least 0.1 away.
inline DTensor shifted_target(const DTensor& value, std::mt19937_64& rng) {
  DTensor t(value.shape());
  std::uniform_real_distribution<double> u(0.1, 0.3);
  std::bernoulli_distribution sign(0.5);
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = value.data()[i] + (sign(rng) ? u(rng) : -u(rng));
  return t;
}

struct SuiteEntry {
  std::string name;
  std::function<nn::GradCheckResult(double h)> run;
};

inline std::vector<SuiteEntry> suite_entries() {
  using nn::Shape;
  std::vector<SuiteEntry> e;

  e.push_back({"conv2d", [](double h) {
                 std::mt19937_64 rng(11);
                 auto x = random_tensor(Shape{2, 3, 7, 6}, rng);
                 auto w = random_tensor(Shape{4, 3, 3, 3}, rng);
                 auto b = random_tensor(Shape{1, 4, 1, 1}, rng);
                 auto target = random_tensor(Shape{2, 4, 7, 6}, rng, -1, 1, false);
                 return nn::grad_check(
                     [=](nn::Tape<double>* t) { return nn::mse_loss(t, nn::conv2d(t, x, w, b, 1, 1), target); },
                     {x, w, b}, h);
               }});
  e.push_back({"conv2d_stride2", [](double h) {
                 std::mt19937_64 rng(12);
                 auto x = random_tensor(Shape{2, 4, 8, 7}, rng);
                 auto w = random_tensor(Shape{3, 4, 3, 3}, rng);
                 auto b = random_tensor(Shape{1, 3, 1, 1}, rng);
                 auto target = random_tensor(Shape{2, 3, 4, 4}, rng, -1, 1, false);
                 return nn::grad_check(
                     [=](nn::Tape<double>* t) { return nn::mse_loss(t, nn::conv2d(t, x, w, b, 2, 1), target); },
                     {x, w, b}, h);
               }});
  e.push_back({"conv2d_pointwise", [](double h) {
                 std::mt19937_64 rng(13);
                 auto x = random_tensor(Shape{2, 4, 5, 5}, rng);
                 auto w = random_tensor(Shape{3, 4, 1, 1}, rng);
                 auto b = random_tensor(Shape{1, 3, 1, 1}, rng);
                 auto target = random_tensor(Shape{2, 3, 5, 5}, rng, -1, 1, false);
                 return nn::grad_check(
                     [=](nn::Tape<double>* t) { return nn::mse_loss(t, nn::conv2d(t, x, w, b, 1, 0), target); },
                     {x, w, b}, h);
               }});
  e.push_back({"conv_transpose2d", [](double h) {
                 std::mt19937_64 rng(14);
                 auto x = random_tensor(Shape{2, 4, 4, 3}, rng);
                 auto w = random_tensor(Shape{4, 3, 4, 4}, rng);
                 auto b = random_tensor(Shape{1, 3, 1, 1}, rng);
                 auto target = random_tensor(Shape{2, 3, 8, 6}, rng, -1, 1, false);
                 return nn::grad_check(
                     [=](nn::Tape<double>* t) {
                       return nn::mse_loss(t, nn::conv_transpose2d(t, x, w, b, 2, 1), target);
                     },
                     {x, w, b}, h);
               }});
  e.push_back({"relu", [](double h) {
                 std::mt19937_64 rng(15);
                 auto x = off_kink_tensor(Shape{2, 4, 8, 8}, rng);
                 auto target = random_tensor(Shape{2, 4, 8, 8}, rng, -1, 1, false);
                 return nn::grad_check([=](nn::Tape<double>* t) { return nn::mse_loss(t, nn::relu(t, x), target); },
                                       {x}, h);
               }});
  e.push_back({"sigmoid", [](double h) {
                 std::mt19937_64 rng(16);
                 auto x = random_tensor(Shape{2, 4, 8, 8}, rng, -4, 4);
                 auto target = random_tensor(Shape{2, 4, 8, 8}, rng, 0, 1, false);
                 return nn::grad_check(
                     [=](nn::Tape<double>* t) { return nn::mse_loss(t, nn::sigmoid(t, x), target); }, {x}, h);
               }});
  e.push_back({"scale_add", [](double h) {
                 std::mt19937_64 rng(17);
                 auto a = random_tensor(Shape{2, 4, 6, 5}, rng);
                 auto b = random_tensor(Shape{2, 4, 6, 5}, rng);
                 auto target = random_tensor(Shape{2, 4, 6, 5}, rng, -1, 1, false);
                 return nn::grad_check(
                     [=](nn::Tape<double>* t) {
                       return nn::mse_loss(t, nn::add(t, nn::scale(t, a, -1.7), nn::add(t, b, b)), target);
                     },
                     {a, b}, h);
               }});
  e.push_back({"concat_channels", [](double h) {
                 std::mt19937_64 rng(18);
                 auto a = random_tensor(Shape{2, 1, 5, 5}, rng);
                 auto b = random_tensor(Shape{2, 3, 5, 5}, rng);
                 auto target = random_tensor(Shape{2, 4, 5, 5}, rng, -1, 1, false);
                 return nn::grad_check(
                     [=](nn::Tape<double>* t) { return nn::mse_loss(t, nn::concat_channels<double>(t, {a, b}), target); },
                     {a, b}, h);
               }});
  e.push_back({"l1_loss", [](double h) {
                 std::mt19937_64 rng(19);
                 auto p = random_tensor(Shape{2, 3, 8, 8}, rng);
                 auto target = shifted_target(p, rng);
                 return nn::grad_check([=](nn::Tape<double>* t) { return nn::l1_loss(t, p, target); }, {p}, h);
               }});
  e.push_back({"mse_loss", [](double h) {
                 std::mt19937_64 rng(20);
                 auto p = random_tensor(Shape{2, 3, 8, 8}, rng);
                 auto target = random_tensor(Shape{2, 3, 8, 8}, rng, -1, 1, false);
                 return nn::grad_check([=](nn::Tape<double>* t) { return nn::mse_loss(t, p, target); }, {p}, h);
               }});
  e.push_back({"cross_entropy", [](double h) {
                 std::mt19937_64 rng(21);
                 // |p - t| >= 0.2 keeps the gradient clear of zero, where the
                 // relative error would measure truncation error alone
                 auto target = random_tensor(Shape{2, 1, 8, 8}, rng, 0, 1, false);
                 DTensor p(target.shape(), 0.0, true);
                 std::uniform_real_distribution<double> gap(0.2, 0.4);
                 for (std::size_t i = 0; i < p.numel(); ++i) {
                   const double t = target.data()[i];
                   p.data()[i] = std::clamp(t > 0.5 ? t - gap(rng) : t + gap(rng), 0.05, 0.95);
                 }
                 return nn::grad_check([=](nn::Tape<double>* t) { return nn::cross_entropy(t, p, target); }, {p}, h);
               }});
  e.push_back({"dense_block", [](double h) {
                 std::mt19937_64 rng(22);
                 nn::ParameterStore<double> store;
                 auto block = nn::DenseBlock<double>::create(store, "b", 2, nn::DenseBlockSpec{2, 3}, rng);
                 auto x = random_tensor(Shape{2, 2, 6, 6}, rng);
                 auto target = random_tensor(Shape{2, 8, 6, 6}, rng, -1, 1, false);
                 std::vector<DTensor> inputs{x};
                 for (auto* p : store.all()) inputs.push_back(p->value);
                 auto keep = std::make_shared<nn::ParameterStore<double>>(std::move(store));
                 return nn::grad_check(
                     [=](nn::Tape<double>* t) {
                       (void)keep;
                       return nn::mse_loss(t, block(t, x), target);
                     },
                     inputs, h);
               }});
  e.push_back({"perceptual_loss", [](double h) {
                 std::mt19937_64 rng(23);
                 auto extractor = std::make_shared<FeatureExtractor<double>>();
                 auto p = random_tensor(Shape{2, 3, 8, 8}, rng, 0, 1);
                 auto target = random_tensor(Shape{2, 3, 8, 8}, rng, 0, 1, false);
                 return nn::grad_check(
                     [=](nn::Tape<double>* t) { return perceptual_loss(t, *extractor, p, target); }, {p}, h);
               }});
  e.push_back({"mlf_total_loss", [](double h) {
                 std::mt19937_64 rng(24);
                 auto net = std::make_shared<MlfNetwork<double>>(mlf_config(), 24);
                 auto extractor = std::make_shared<FeatureExtractor<double>>();
                 auto fg = random_tensor(Shape{1, 4, 8, 8}, rng, 0, 1);
                 auto bg = random_tensor(Shape{1, 4, 8, 8}, rng, 0, 1);
                 const DTensor pred = net->forward(nullptr, {fg, bg});
                 auto target = shifted_target(pred, rng);
                 std::vector<DTensor> inputs{fg, bg};
                 for (auto* p : net->parameters().all()) inputs.push_back(p->value);
                 // a strided subset of at most 32 coordinates per array
                 return nn::grad_check(
                     [=](nn::Tape<double>* t) {
                       return total_loss(t, net->forward(t, {fg, bg}), target, 0.8, *extractor).total;
                     },
                     inputs, h, 32);
               }});
  return e;
}

}  // namespace detail

inline std::vector<std::string> gradient_suite_names() {
  std::vector<std::string> out;
  for (const auto& e : detail::suite_entries()) out.push_back(e.name);
  return out;
}

// `which` is "all" or one case name.
inline std::vector<GradSuiteCase> run_gradient_suite(const std::string& which = "all", double h = 1e-3,
                                                     double tolerance = kGradTolerance) {
  std::vector<GradSuiteCase> out;
  for (const auto& e : detail::suite_entries()) {
    if (which != "all" && which != e.name) continue;
    GradSuiteCase c;
    c.name = e.name;
    c.result = e.run(h);
    // a case where most probes straddle kinks verifies nothing
    const bool enough = c.result.kink_skips * 4 <= c.result.coordinates + c.result.kink_skips;
    c.passed = std::isfinite(c.result.max_rel_error) && c.result.max_rel_error < tolerance && enough;
    out.push_back(std::move(c));
  }
  if (out.empty()) throw UsageError("unknown gradient suite '" + which + "'");
  return out;
}

}  // namespace autocomp
