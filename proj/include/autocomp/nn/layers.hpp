#pragma once

// Parameterized layers built on the differentiable ops.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "autocomp/error.hpp"
#include "autocomp/nn/ops.hpp"
#include "autocomp/nn/tensor.hpp"

namespace autocomp::nn {

// He-style uniform initialization: U(-b, b), b = sqrt(6 / fan_in).
template <class T>
void init_he_uniform(Parameter<T>& p, double fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / std::max(fan_in, 1.0));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : p.value.data()) v = static_cast<T>(dist(rng));
}

template <class T>
struct Conv2d {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;
  int stride = 1;
  int pad = 0;

  static Conv2d create(ParameterStore<T>& store, const std::string& name, int in_ch, int out_ch, int kernel,
                       int stride, int pad, std::mt19937_64& rng) {
    Conv2d c;
    c.weight = store.add(name + ".weight", Shape{out_ch, in_ch, kernel, kernel});
    c.bias = store.add(name + ".bias", Shape{1, out_ch, 1, 1});
    c.stride = stride;
    c.pad = pad;
    init_he_uniform(*c.weight, static_cast<double>(in_ch) * kernel * kernel, rng);
    return c;
  }

  int in_channels() const { return weight->value.shape().c; }
  int out_channels() const { return weight->value.shape().n; }

  Tensor<T> operator()(Tape<T>* tape, const Tensor<T>& x) const {
    return conv2d(tape, x, weight->value, bias->value, stride, pad);
  }
};

// Padding defaults to (kernel - stride) / 2, giving output = stride * input.
template <class T>
struct ConvTranspose2d {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;
  int stride = 2;
  int pad = 1;

  static ConvTranspose2d create(ParameterStore<T>& store, const std::string& name, int in_ch, int out_ch, int kernel,
                                int stride, std::mt19937_64& rng) {
    if (kernel < stride || (kernel - stride) % 2 != 0)
      throw DataError("transposed conv kernel must exceed stride by an even amount");
    ConvTranspose2d c;
    c.weight = store.add(name + ".weight", Shape{in_ch, out_ch, kernel, kernel});
    c.bias = store.add(name + ".bias", Shape{1, out_ch, 1, 1});
    c.stride = stride;
    c.pad = (kernel - stride) / 2;
    // each output pixel sees about in_ch * (kernel / stride)^2 taps
    init_he_uniform(*c.weight, static_cast<double>(in_ch) * kernel * kernel / (stride * stride), rng);
    return c;
  }

  Tensor<T> operator()(Tape<T>* tape, const Tensor<T>& x) const {
    return conv_transpose2d(tape, x, weight->value, bias->value, stride, pad);
  }
};

struct DenseBlockSpec {
  int num_layers = 2;
  int growth_rate = 8;

  int output_channels(int in_channels) const { return in_channels + num_layers * growth_rate; }
};

// Each layer sees the concatenation of the block input and all earlier layer
// outputs, applies a 3x3 conv and ReLU; the block returns every feature map
// concatenated.
template <class T>
struct DenseBlock {
  DenseBlockSpec spec;
  int in_channels = 0;
  std::vector<Conv2d<T>> layers;

  static DenseBlock create(ParameterStore<T>& store, const std::string& name, int in_ch, DenseBlockSpec spec,
                           std::mt19937_64& rng) {
    if (spec.num_layers < 0 || spec.growth_rate < 1) throw DataError("invalid dense block spec");
    DenseBlock b;
    b.spec = spec;
    b.in_channels = in_ch;
    for (int i = 0; i < spec.num_layers; ++i)
      b.layers.push_back(Conv2d<T>::create(store, name + ".layer" + std::to_string(i), in_ch + i * spec.growth_rate,
                                           spec.growth_rate, 3, 1, 1, rng));
    return b;
  }

  int out_channels() const { return spec.output_channels(in_channels); }

  Tensor<T> operator()(Tape<T>* tape, const Tensor<T>& x) const {
    if (x.shape().c != in_channels)
      throw DataError("dense block expects " + std::to_string(in_channels) + " channels, got " +
                      std::to_string(x.shape().c));
    Tensor<T> features = x;
    for (const auto& layer : layers) {
      Tensor<T> y = relu(tape, layer(tape, features));
      features = concat_channels<T>(tape, {features, y});
    }
    return features;
  }
};

}  // namespace autocomp::nn
