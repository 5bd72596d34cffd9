#pragma once

// Multi-stream fusion compositing network and the mask refinement network.
//
// Both are instances of one dense encoder-decoder. The fusion network runs a
// foreground encoder on [FG, mask] and a background encoder on
// [BG, 1 - mask] with disjoint parameters. Their deepest features are
// concatenated and squeezed by a 1x1 conv; each decoder level upsamples with a
// stride-2 transposed conv, concatenates the same-level features of every
// encoder and applies a dense block. A 3x3 conv + sigmoid head produces the
// output. The refiner is the single-stream form on [RGB, raw mask] with one
// output channel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "autocomp/composite.hpp"
#include "autocomp/error.hpp"
#include "autocomp/imgcore.hpp"
#include "autocomp/nn/checkpoint.hpp"
#include "autocomp/nn/layers.hpp"
#include "autocomp/nn/ops.hpp"
#include "autocomp/nn/tensor.hpp"

namespace autocomp {

struct EncoderDecoderConfig {
  int streams = 2;
  int in_channels = 4;  // per stream
  int out_channels = 3;
  int num_levels = 4;
  int base_channels = 16;
  int growth_rate = 8;
  int block_layers = 2;

  // Spatial dimensions must be multiples of this.
  int size_multiple() const { return 1 << (num_levels - 1); }

  void validate() const {
    if (streams < 1 || streams > 2) throw UsageError("encoder-decoder supports 1 or 2 streams");
    if (in_channels < 1 || out_channels < 1) throw UsageError("channel counts must be positive");
    if (num_levels < 1 || num_levels > 8) throw UsageError("num_levels must be in [1, 8]");
    if (base_channels < 1 || growth_rate < 1 || block_layers < 0) throw UsageError("invalid width settings");
  }

  std::map<std::string, std::string> to_meta() const {
    return {{"streams", std::to_string(streams)},
            {"in_channels", std::to_string(in_channels)},
            {"out_channels", std::to_string(out_channels)},
            {"num_levels", std::to_string(num_levels)},
            {"base_channels", std::to_string(base_channels)},
            {"growth_rate", std::to_string(growth_rate)},
            {"block_layers", std::to_string(block_layers)}};
  }

  static EncoderDecoderConfig from_meta(const nn::Checkpoint& ckpt) {
    auto get = [&](const std::string& k) { return std::stoi(ckpt.meta_value(k)); };
    EncoderDecoderConfig c;
    c.streams = get("streams");
    c.in_channels = get("in_channels");
    c.out_channels = get("out_channels");
    c.num_levels = get("num_levels");
    c.base_channels = get("base_channels");
    c.growth_rate = get("growth_rate");
    c.block_layers = get("block_layers");
    c.validate();
    return c;
  }

  friend bool operator==(const EncoderDecoderConfig&, const EncoderDecoderConfig&) = default;
};

inline EncoderDecoderConfig mlf_config(int num_levels = 4, int base_channels = 16, int growth_rate = 8) {
  return {2, 4, 3, num_levels, base_channels, growth_rate, 2};
}

inline EncoderDecoderConfig refiner_config(int num_levels = 3, int base_channels = 8, int growth_rate = 4) {
  return {1, 4, 1, num_levels, base_channels, growth_rate, 2};
}

template <class T>
class EncoderDecoder {
 public:
  struct Encoder {
    nn::Conv2d<T> stem;
    std::vector<nn::DenseBlock<T>> blocks;
    std::vector<nn::Conv2d<T>> downs;
  };

  struct DecoderLevel {
    nn::ConvTranspose2d<T> up;
    nn::DenseBlock<T> block;
  };

  EncoderDecoder(const EncoderDecoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const nn::DenseBlockSpec spec{cfg_.block_layers, cfg_.growth_rate};
    const int L = cfg_.num_levels;

    for (int s = 0; s < cfg_.streams; ++s) {
      const std::string prefix = cfg_.streams == 1 ? "enc" : (s == 0 ? "fg_enc" : "bg_enc");
      Encoder e;
      e.stem = nn::Conv2d<T>::create(params_, prefix + ".stem", cfg_.in_channels, cfg_.base_channels, 3, 1, 1, rng);
      int ch = cfg_.base_channels;
      feature_channels_.assign(static_cast<std::size_t>(L), 0);
      for (int k = 0; k < L; ++k) {
        e.blocks.push_back(
            nn::DenseBlock<T>::create(params_, prefix + ".level" + std::to_string(k) + ".block", ch, spec, rng));
        ch = e.blocks.back().out_channels();
        feature_channels_[static_cast<std::size_t>(k)] = ch;
        if (k + 1 < L)
          e.downs.push_back(
              nn::Conv2d<T>::create(params_, prefix + ".level" + std::to_string(k) + ".down", ch, ch, 3, 2, 1, rng));
      }
      encoders_.push_back(std::move(e));
    }

    const int top = feature_channels_.back();
    fuse_ = nn::Conv2d<T>::create(params_, "fuse", cfg_.streams * top, top, 1, 1, 0, rng);
    int width = top;
    for (int k = L - 2; k >= 0; --k) {
      const int fk = feature_channels_[static_cast<std::size_t>(k)];
      const int up_ch = std::max(1, fk / 2);
      DecoderLevel d;
      d.up = nn::ConvTranspose2d<T>::create(params_, "dec.level" + std::to_string(k) + ".up", width, up_ch, 4, 2, rng);
      d.block = nn::DenseBlock<T>::create(params_, "dec.level" + std::to_string(k) + ".block",
                                          up_ch + cfg_.streams * fk, spec, rng);
      width = d.block.out_channels();
      decoder_.push_back(std::move(d));
    }
    head_ = nn::Conv2d<T>::create(params_, "head", width, cfg_.out_channels, 3, 1, 1, rng);
  }

  EncoderDecoder(EncoderDecoder&&) noexcept = default;
  EncoderDecoder& operator=(EncoderDecoder&&) noexcept = default;

  const EncoderDecoderConfig& config() const { return cfg_; }
  nn::ParameterStore<T>& parameters() { return params_; }
  const nn::ParameterStore<T>& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }

  // Per-level features of one encoder, finest first.
  std::vector<nn::Tensor<T>> encode(nn::Tape<T>* tape, int stream, const nn::Tensor<T>& x) const {
    const Encoder& e = encoders_.at(static_cast<std::size_t>(stream));
    std::vector<nn::Tensor<T>> feats;
    nn::Tensor<T> h = nn::relu(tape, e.stem(tape, x));
    for (std::size_t k = 0; k < e.blocks.size(); ++k) {
      h = e.blocks[k](tape, h);
      feats.push_back(h);
      if (k < e.downs.size()) h = nn::relu(tape, e.downs[k](tape, h));
    }
    return feats;
  }

  // One input per stream. A single-stream network given several inputs
  // concatenates them along channels.
  nn::Tensor<T> forward(nn::Tape<T>* tape, const std::vector<nn::Tensor<T>>& inputs) const {
    if (inputs.empty()) throw DataError("encoder-decoder forward needs inputs");
    std::vector<nn::Tensor<T>> stream_inputs = inputs;
    if (cfg_.streams == 1 && inputs.size() > 1) stream_inputs = {nn::concat_channels(tape, inputs)};
    if (static_cast<int>(stream_inputs.size()) != cfg_.streams)
      throw DataError("expected " + std::to_string(cfg_.streams) + " stream inputs");
    const nn::Shape s0 = stream_inputs.front().shape();
    for (const auto& in : stream_inputs) {
      const nn::Shape s = in.shape();
      if (s.c != cfg_.in_channels)
        throw DataError("stream input has " + std::to_string(s.c) + " channels, expected " +
                        std::to_string(cfg_.in_channels));
      if (s.n != s0.n || s.h != s0.h || s.w != s0.w) throw DataError("stream inputs differ in shape");
    }
    const int m = cfg_.size_multiple();
    if (s0.h % m != 0 || s0.w % m != 0)
      throw DataError("input " + std::to_string(s0.w) + "x" + std::to_string(s0.h) + " is not a multiple of " +
                      std::to_string(m));

    std::vector<std::vector<nn::Tensor<T>>> feats;
    for (int s = 0; s < cfg_.streams; ++s)
      feats.push_back(encode(tape, s, stream_inputs[static_cast<std::size_t>(s)]));

    std::vector<nn::Tensor<T>> tops;
    for (const auto& f : feats) tops.push_back(f.back());
    nn::Tensor<T> h = nn::relu(tape, fuse_(tape, cfg_.streams == 1 ? tops.front() : nn::concat_channels(tape, tops)));

    const int L = cfg_.num_levels;
    for (int i = 0; i < L - 1; ++i) {
      const int k = L - 2 - i;
      const DecoderLevel& d = decoder_[static_cast<std::size_t>(i)];
      std::vector<nn::Tensor<T>> parts{nn::relu(tape, d.up(tape, h))};
      for (const auto& f : feats) parts.push_back(f[static_cast<std::size_t>(k)]);
      h = d.block(tape, nn::concat_channels(tape, parts));
    }
    return nn::sigmoid(tape, head_(tape, h));
  }

  void zero_all_weights() {
    for (std::size_t i = 0; i < params_.size(); ++i)
      for (auto& v : params_[i].value.data()) v = T(0);
  }

 private:
  EncoderDecoderConfig cfg_;
  nn::ParameterStore<T> params_;
  std::vector<int> feature_channels_;
  std::vector<Encoder> encoders_;
  nn::Conv2d<T> fuse_;
  std::vector<DecoderLevel> decoder_;
  nn::Conv2d<T> head_;
};

template <class T>
using MlfNetwork = EncoderDecoder<T>;
template <class T>
using RefineNetwork = EncoderDecoder<T>;

// Single-stream fusion variant whose width is chosen so its parameter count is
// as close as possible to the two-stream network built from `two_stream`.
inline EncoderDecoderConfig single_stream_matched(const EncoderDecoderConfig& two_stream) {
  const std::size_t target = EncoderDecoder<float>(two_stream, 0).parameter_count();
  EncoderDecoderConfig best = two_stream;
  best.streams = 1;
  best.in_channels = 2 * two_stream.in_channels;
  std::size_t best_gap = SIZE_MAX;
  for (int base = two_stream.base_channels; base <= 3 * two_stream.base_channels; ++base)
    for (int growth = two_stream.growth_rate; growth <= 3 * two_stream.growth_rate; ++growth) {
      EncoderDecoderConfig c = best;
      c.base_channels = base;
      c.growth_rate = growth;
      const std::size_t n = EncoderDecoder<float>(c, 0).parameter_count();
      const std::size_t gap = n > target ? n - target : target - n;
      if (gap < best_gap) {
        best_gap = gap;
        best.base_channels = base;
        best.growth_rate = growth;
      }
    }
  return best;
}

// ---------------------------------------------------------------------------
// Image <-> tensor conversion

template <class T>
nn::Tensor<T> image_to_tensor(const Image& img) {
  nn::Tensor<T> t(nn::Shape{1, img.channels(), img.height(), img.width()});
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) t.at(0, c, y, x) = static_cast<T>(img.at(y, x, c));
  return t;
}

// [R, G, B, mask] planes.
template <class T>
nn::Tensor<T> stream_tensor(const Image& rgb, const SoftMask& mask) {
  if (rgb.channels() != 3) throw DataError("stream input image must be RGB");
  if (!mask.same_size(rgb)) throw DataError("stream input mask and image dimensions differ");
  nn::Tensor<T> t(nn::Shape{1, 4, rgb.height(), rgb.width()});
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x) {
      for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = static_cast<T>(rgb.at(y, x, c));
      t.at(0, 3, y, x) = static_cast<T>(mask.at(y, x));
    }
  return t;
}

template <class T>
Image tensor_to_image(const nn::Tensor<T>& t, int batch_index = 0) {
  const nn::Shape s = t.shape();
  Image img(s.h, s.w, s.c);
  for (int c = 0; c < s.c; ++c)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) img.at(y, x, c) = static_cast<float>(t.at(batch_index, c, y, x));
  return img;
}

namespace detail {

// Edge-replicates up to the next multiple of m.
inline Image pad_to_multiple(const Image& img, int m) {
  const int h = (img.height() + m - 1) / m * m;
  const int w = (img.width() + m - 1) / m * m;
  if (h == img.height() && w == img.width()) return img;
  Image out(h, w, img.channels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels(); ++c)
        out.at(y, x, c) = img.at(std::min(y, img.height() - 1), std::min(x, img.width() - 1), c);
  return out;
}

inline SoftMask pad_to_multiple(const SoftMask& mask, int m) { return to_mask(pad_to_multiple(to_image(mask), m)); }

}  // namespace detail

// Composites at the input resolution (padding internally to the network's
// size multiple). Output is RGB with values in (0,1).
template <class T>
Image mlf_forward(const MlfNetwork<T>& net, const Image& fg, const SoftMask& fg_mask, const Image& bg,
                  const SoftMask& bg_mask) {
  if (!fg.same_size(bg) || !fg_mask.same_size(fg) || !bg_mask.same_size(fg))
    throw DataError("mlf_forward needs foreground, background and masks of equal dimensions");
  if (fg.channels() != 3 || bg.channels() != 3) throw DataError("mlf_forward needs RGB images");
  const int m = net.config().size_multiple();
  const auto fg_in = stream_tensor<T>(detail::pad_to_multiple(fg, m), detail::pad_to_multiple(fg_mask, m));
  const auto bg_in = stream_tensor<T>(detail::pad_to_multiple(bg, m), detail::pad_to_multiple(bg_mask, m));
  const Image out = tensor_to_image(net.forward(nullptr, {fg_in, bg_in}));
  return out.same_size(fg) ? out : crop(out, 0, 0, fg.height(), fg.width());
}

// Test-time compositing on a square canvas: resize inputs to canvas x canvas,
// composite, resize back. canvas <= 0 composites at native resolution.
template <class T>
Image mlf_composite(const MlfNetwork<T>& net, const Image& fg, const SoftMask& mask, const Image& bg, int canvas) {
  if (canvas <= 0) return mlf_forward(net, fg, mask, bg, invert_mask(mask));
  const Image fg_s = resize_bilinear(fg, canvas, canvas);
  const Image bg_s = resize_bilinear(bg, canvas, canvas);
  const SoftMask m_s = resize_bilinear(mask, canvas, canvas);
  const Image out = mlf_forward(net, fg_s, m_s, bg_s, invert_mask(m_s));
  return resize_bilinear(out, fg.width(), fg.height());
}

template <class T>
SoftMask refine_forward(const RefineNetwork<T>& net, const Image& img, const SoftMask& raw) {
  if (!raw.same_size(img)) throw DataError("refine_forward: image and mask dimensions differ");
  if (net.config().out_channels != 1 || net.config().in_channels != 4 || net.config().streams != 1)
    throw DataError("network is not a mask refiner");
  const int m = net.config().size_multiple();
  const Image rgb = to_rgb(img);
  const auto in = stream_tensor<T>(detail::pad_to_multiple(rgb, m), detail::pad_to_multiple(raw, m));
  const Image out = tensor_to_image(net.forward(nullptr, {in}));
  SoftMask mask = to_mask(out.same_size(img) ? out : crop(out, 0, 0, img.height(), img.width()));
  return mask;
}

template <class T>
Refiner as_refiner(const RefineNetwork<T>& net) {
  return [&net](const Image& img, const SoftMask& raw) { return refine_forward(net, img, raw); };
}

// ---------------------------------------------------------------------------
// Perceptual features

// Frozen two-level conv stack standing in for pretrained classification
// features: relu(conv3x3 3->8) and relu(conv3x3 stride 2, 8->16).
template <class T>
class FeatureExtractor {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5eedf00dULL;

  explicit FeatureExtractor(std::uint64_t seed = kDefaultSeed) {
    std::mt19937_64 rng(seed);
    conv1_ = nn::Conv2d<T>::create(params_, "features.conv1", 3, 8, 3, 1, 1, rng);
    conv2_ = nn::Conv2d<T>::create(params_, "features.conv2", 8, 16, 3, 2, 1, rng);
    freeze();
  }

  FeatureExtractor(FeatureExtractor&&) noexcept = default;

  // Replaces the random weights with externally supplied ones.
  void load(const nn::Checkpoint& ckpt) {
    nn::load_parameters(ckpt, params_);
    freeze();
  }

  const nn::ParameterStore<T>& parameters() const { return params_; }

  std::pair<nn::Tensor<T>, nn::Tensor<T>> features(nn::Tape<T>* tape, const nn::Tensor<T>& x) const {
    if (x.shape().c != 3) throw DataError("feature extractor expects 3-channel input");
    nn::Tensor<T> f1 = nn::relu(tape, conv1_(tape, x));
    nn::Tensor<T> f2 = nn::relu(tape, conv2_(tape, f1));
    return {f1, f2};
  }

 private:
  void freeze() {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].value.set_requires_grad(false);
  }

  nn::ParameterStore<T> params_;
  nn::Conv2d<T> conv1_;
  nn::Conv2d<T> conv2_;
};

// Sum over both feature levels of the mean squared feature difference.
// The target is treated as a constant.
template <class T>
nn::Tensor<T> perceptual_loss(nn::Tape<T>* tape, const FeatureExtractor<T>& extractor, const nn::Tensor<T>& pred,
                              const nn::Tensor<T>& target) {
  if (!(pred.shape() == target.shape()))
    throw DataError("perceptual_loss: shape mismatch " + pred.shape().str() + " vs " + target.shape().str());
  const auto [p1, p2] = extractor.features(tape, pred);
  const auto [t1, t2] = extractor.features(nullptr, target);
  return nn::add(tape, nn::mse_loss(tape, p1, t1), nn::mse_loss(tape, p2, t2));
}

template <class T>
struct LossTerms {
  nn::Tensor<T> total;
  double l1 = 0.0;
  double perceptual = 0.0;
};

// L1 + lambda_p * perceptual.
template <class T>
LossTerms<T> total_loss(nn::Tape<T>* tape, const nn::Tensor<T>& pred, const nn::Tensor<T>& target, double lambda_p,
                        const FeatureExtractor<T>& extractor) {
  if (lambda_p < 0.0) throw UsageError("lambda_p must be non-negative");
  LossTerms<T> out;
  nn::Tensor<T> l1 = nn::l1_loss(tape, pred, target);
  out.l1 = static_cast<double>(l1.item());
  if (lambda_p == 0.0) {
    out.total = l1;
    return out;
  }
  nn::Tensor<T> lp = perceptual_loss(tape, extractor, pred, target);
  out.perceptual = static_cast<double>(lp.item());
  out.total = nn::add(tape, l1, nn::scale(tape, lp, static_cast<T>(lambda_p)));
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

template <class T>
void save_network(const std::filesystem::path& path, const EncoderDecoder<T>& net, const std::string& kind) {
  auto meta = net.config().to_meta();
  meta["kind"] = kind;
  nn::save_checkpoint(path, net.parameters(), meta);
}

template <class T>
EncoderDecoder<T> load_network(const std::filesystem::path& path, const std::string& expected_kind) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  if (ckpt.meta_value("kind") != expected_kind)
    throw DataError("checkpoint " + path.string() + " holds a '" + ckpt.meta_value("kind") + "' network, expected '" +
                    expected_kind + "'");
  EncoderDecoder<T> net(EncoderDecoderConfig::from_meta(ckpt), 0);
  nn::load_parameters(ckpt, net.parameters());
  return net;
}

inline constexpr const char* kMlfKind = "mlf";
inline constexpr const char* kRefinerKind = "refiner";

}  // namespace autocomp
