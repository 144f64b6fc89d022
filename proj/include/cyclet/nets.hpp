#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cyclet/ops.hpp"
#include "cyclet/rng.hpp"
#include "cyclet/tensor.hpp"

namespace cyclet {

/// Named list of every learnable tensor of a net, in declaration order.
struct ParamSet {
  std::vector<std::pair<std::string, Tensor>> items;

  void add(std::string name, const Tensor& t) { items.emplace_back(std::move(name), t); }

  void extend(const ParamSet& other) {
    items.insert(items.end(), other.items.begin(), other.items.end());
  }

  void zero_grad() {
    for (auto& [name, t] : items) t.zero_grad();
  }

  std::int64_t total_size() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : items) n += t.size();
    return n;
  }

  const Tensor& find(const std::string& name) const {
    for (const auto& [n, t] : items)
      if (n == name) return t;
    throw ValueError("ParamSet: no parameter named " + name);
  }
};

namespace detail {

struct ConvParams {
  Tensor kernel, bias;

  static ConvParams make(int cout, int cin, int k) {
    return {Tensor::zeros({cout, cin, k, k}), Tensor::zeros({cout})};
  }
};

struct NormParams {
  Tensor gain, shift;

  static NormParams make(int c) { return {Tensor::zeros({c}), Tensor::zeros({c})}; }
};

inline void collect_conv(ParamSet& ps, const std::string& prefix, const ConvParams& c) {
  ps.add(prefix + ".kernel", c.kernel);
  ps.add(prefix + ".bias", c.bias);
}

inline void collect_norm(ParamSet& ps, const std::string& prefix, const NormParams& n) {
  ps.add(prefix + ".gain", n.gain);
  ps.add(prefix + ".shift", n.shift);
}

}  // namespace detail

inline constexpr double kInstanceNormEps = 1e-5;
inline constexpr double kLeakySlope = 0.2;

/// Encoder / 2 residual blocks / decoder generator for (B,3,H,W) images,
/// H and W even. Output is tanh-bounded to [-1,1] and keeps the input shape.
class GeneratorNet {
 public:
  GeneratorNet()
      : enc1_(detail::ConvParams::make(16, 3, 3)),
        enc1_norm_(detail::NormParams::make(16)),
        enc2_(detail::ConvParams::make(32, 16, 3)),
        enc2_norm_(detail::NormParams::make(32)),
        dec1_(detail::ConvParams::make(16, 32, 3)),
        dec1_norm_(detail::NormParams::make(16)),
        out_(detail::ConvParams::make(3, 16, 3)) {
    for (auto& rb : res_) {
      rb.conv1 = detail::ConvParams::make(32, 32, 3);
      rb.norm1 = detail::NormParams::make(32);
      rb.conv2 = detail::ConvParams::make(32, 32, 3);
      rb.norm2 = detail::NormParams::make(32);
    }
  }

  Tensor forward(const Tensor& x) const {
    check_input(x);
    Tensor h = activation(
        instance_norm(conv2d(x, enc1_.kernel, enc1_.bias, 1, 1), enc1_norm_.gain,
                      enc1_norm_.shift, kInstanceNormEps),
        Act::relu);
    h = activation(instance_norm(conv2d(h, enc2_.kernel, enc2_.bias, 2, 1), enc2_norm_.gain,
                                 enc2_norm_.shift, kInstanceNormEps),
                   Act::relu);
    for (const auto& rb : res_) h = res_forward(rb, h);
    h = upsample_nearest(h, 2);
    h = activation(instance_norm(conv2d(h, dec1_.kernel, dec1_.bias, 1, 1), dec1_norm_.gain,
                                 dec1_norm_.shift, kInstanceNormEps),
                   Act::relu);
    return activation(conv2d(h, out_.kernel, out_.bias, 1, 1), Act::tanh);
  }

  ParamSet params() const {
    ParamSet ps;
    detail::collect_conv(ps, "enc1", enc1_);
    detail::collect_norm(ps, "enc1", enc1_norm_);
    detail::collect_conv(ps, "enc2", enc2_);
    detail::collect_norm(ps, "enc2", enc2_norm_);
    for (int i = 0; i < 2; ++i) {
      const std::string p = "res" + std::to_string(i + 1);
      detail::collect_conv(ps, p + ".c1", res_[static_cast<std::size_t>(i)].conv1);
      detail::collect_norm(ps, p + ".c1", res_[static_cast<std::size_t>(i)].norm1);
      detail::collect_conv(ps, p + ".c2", res_[static_cast<std::size_t>(i)].conv2);
      detail::collect_norm(ps, p + ".c2", res_[static_cast<std::size_t>(i)].norm2);
    }
    detail::collect_conv(ps, "dec1", dec1_);
    detail::collect_norm(ps, "dec1", dec1_norm_);
    detail::collect_conv(ps, "out", out_);
    return ps;
  }

  struct ResBlock {
    detail::ConvParams conv1, conv2;
    detail::NormParams norm1, norm2;
  };

  /// conv + norm + relu + conv + norm with an additive skip.
  static Tensor res_forward(const ResBlock& rb, const Tensor& h) {
    Tensor t = activation(
        instance_norm(conv2d(h, rb.conv1.kernel, rb.conv1.bias, 1, 1), rb.norm1.gain,
                      rb.norm1.shift, kInstanceNormEps),
        Act::relu);
    t = instance_norm(conv2d(t, rb.conv2.kernel, rb.conv2.bias, 1, 1), rb.norm2.gain,
                      rb.norm2.shift, kInstanceNormEps);
    return add(h, t);
  }

  /// Direct access for structural tests (residual identity and friends).
  ResBlock& res_block(int i) { return res_[static_cast<std::size_t>(i)]; }

 private:
  static void check_input(const Tensor& x) {
    if (x.shape().size() != 4 || x.shape()[1] != 3)
      throw ShapeError("generator: input must be [B,3,H,W], got " + shape_str(x.shape()));
    const int h = x.shape()[2], w = x.shape()[3];
    if (h < 4 || w < 4 || h % 2 != 0 || w % 2 != 0)
      throw ShapeError("generator: H and W must be even and >= 4, got " + shape_str(x.shape()));
  }

  detail::ConvParams enc1_;
  detail::NormParams enc1_norm_;
  detail::ConvParams enc2_;
  detail::NormParams enc2_norm_;
  ResBlock res_[2];
  detail::ConvParams dec1_;
  detail::NormParams dec1_norm_;
  detail::ConvParams out_;
};

/// Patch discriminator: three stride-2 convs then a 3x3 score conv. The
/// activations feeding the score conv are exposed as the feature tap.
class DiscriminatorNet {
 public:
  struct Output {
    Tensor scores;    // (B,1,H/8,W/8) raw, unsquashed
    Tensor features;  // (B,64,H/8,W/8) post-activation tap
  };

  DiscriminatorNet()
      : c1_(detail::ConvParams::make(16, 3, 3)),
        c2_(detail::ConvParams::make(32, 16, 3)),
        c2_norm_(detail::NormParams::make(32)),
        c3_(detail::ConvParams::make(64, 32, 3)),
        c3_norm_(detail::NormParams::make(64)),
        score_(detail::ConvParams::make(1, 64, 3)) {}

  /// detach_params routes every parameter through stop_gradient: gradients
  /// still flow to the image (hence to generators) but the discriminator's
  /// own parameters receive exactly zero.
  Output forward(const Tensor& img, bool detach_params = false) const {
    check_input(img);
    auto p = [detach_params](const Tensor& t) { return detach_params ? stop_gradient(t) : t; };
    Tensor h = activation(conv2d(img, p(c1_.kernel), p(c1_.bias), 2, 1), Act::leaky_relu,
                          kLeakySlope);
    h = activation(instance_norm(conv2d(h, p(c2_.kernel), p(c2_.bias), 2, 1), p(c2_norm_.gain),
                                 p(c2_norm_.shift), kInstanceNormEps),
                   Act::leaky_relu, kLeakySlope);
    Tensor feat = activation(
        instance_norm(conv2d(h, p(c3_.kernel), p(c3_.bias), 2, 1), p(c3_norm_.gain),
                      p(c3_norm_.shift), kInstanceNormEps),
        Act::leaky_relu, kLeakySlope);
    Tensor scores = conv2d(feat, p(score_.kernel), p(score_.bias), 1, 1);
    return {scores, feat};
  }

  ParamSet params() const {
    ParamSet ps;
    detail::collect_conv(ps, "c1", c1_);
    detail::collect_conv(ps, "c2", c2_);
    detail::collect_norm(ps, "c2", c2_norm_);
    detail::collect_conv(ps, "c3", c3_);
    detail::collect_norm(ps, "c3", c3_norm_);
    detail::collect_conv(ps, "score", score_);
    return ps;
  }

 private:
  static void check_input(const Tensor& x) {
    if (x.shape().size() != 4 || x.shape()[1] != 3)
      throw ShapeError("discriminator: input must be [B,3,H,W], got " + shape_str(x.shape()));
    const int h = x.shape()[2], w = x.shape()[3];
    // Three stride-2 halvings, and instance norm needs >= 2 px per plane.
    if (h < 16 || w < 16 || h % 8 != 0 || w % 8 != 0)
      throw ShapeError("discriminator: H and W must be multiples of 8 and >= 16, got " +
                       shape_str(x.shape()));
  }

  detail::ConvParams c1_;
  detail::ConvParams c2_;
  detail::NormParams c2_norm_;
  detail::ConvParams c3_;
  detail::NormParams c3_norm_;
  detail::ConvParams score_;
};

/// Number of learnable scalars; frozen architecture constants.
inline constexpr std::int64_t kGeneratorParamCount = 47523;
inline constexpr std::int64_t kDiscriminatorParamCount = 24353;

/// Prefixes every parameter name, e.g. collect_params(g, "G") -> "G.enc1.kernel".
template <typename Net>
ParamSet collect_params(const Net& net, const std::string& prefix) {
  ParamSet ps;
  for (auto& [name, t] : net.params().items) ps.add(prefix + "." + name, t);
  return ps;
}

/// Deep copy: same values in freshly allocated parameter tensors.
template <typename Net>
Net clone_net(const Net& src) {
  Net dst;
  auto s = src.params().items;
  auto d = dst.params().items;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Tensor t = d[i].second;
    std::copy(s[i].second.values().begin(), s[i].second.values().end(),
              t.values_mut().begin());
  }
  return dst;
}

/// Gaussian(0, 0.02) kernels; biases and norm shifts 0; norm gains 1.
/// Deterministic for a given seed.
template <typename Net>
void init_params(Net& net, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (auto& [name, t] : net.params().items) {
    Tensor tensor = t;
    if (name.ends_with(".kernel")) {
      for (auto& v : tensor.values_mut()) v = 0.02 * rng.next_gaussian();
    } else if (name.ends_with(".gain")) {
      for (auto& v : tensor.values_mut()) v = 1.0;
    } else {  // bias, shift
      for (auto& v : tensor.values_mut()) v = 0.0;
    }
    tensor.zero_grad();
  }
}

}  // namespace cyclet
