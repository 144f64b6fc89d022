#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cyclet/tensor.hpp"

namespace cyclet {

namespace detail {

/// Sigmoid kept strictly inside (0, 1) so downstream logs stay finite.
inline double stable_sigmoid(double x) {
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  if (y >= 1.0) y = std::nextafter(1.0, 0.0);
  if (y <= 0.0) y = std::numeric_limits<double>::min();
  return y;
}

/// log(sigmoid(x)) without overflow for large |x|.
inline double stable_log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

struct ConvDims {
  int batch, cin, h, w, cout, kh, kw, ho, wo, stride, pad;
};

inline ConvDims conv_check(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                           int stride, int pad) {
  if (input.shape().size() != 4)
    throw ShapeError("conv2d: input must be rank 4 [B,Cin,H,W], got " + shape_str(input.shape()));
  if (kernel.shape().size() != 4)
    throw ShapeError("conv2d: kernel must be rank 4 [Cout,Cin,Kh,Kw], got " +
                     shape_str(kernel.shape()));
  ConvDims d{};
  d.batch = input.shape()[0];
  d.cin = input.shape()[1];
  d.h = input.shape()[2];
  d.w = input.shape()[3];
  d.cout = kernel.shape()[0];
  d.kh = kernel.shape()[2];
  d.kw = kernel.shape()[3];
  d.stride = stride;
  d.pad = pad;
  if (kernel.shape()[1] != d.cin)
    throw ShapeError("conv2d: input channel dim " + std::to_string(d.cin) +
                     " != kernel channel dim " + std::to_string(kernel.shape()[1]));
  if (bias.shape().size() != 1 || bias.shape()[0] != d.cout)
    throw ShapeError("conv2d: bias dim must be [Cout=" + std::to_string(d.cout) + "], got " +
                     shape_str(bias.shape()));
  if (d.kh % 2 == 0 || d.kw % 2 == 0)
    throw ShapeError("conv2d: kernel extents must be odd, got " + shape_str(kernel.shape()));
  if (stride < 1) throw ValueError("conv2d: stride must be >= 1, got " + std::to_string(stride));
  if (pad < 0) throw ValueError("conv2d: pad must be >= 0, got " + std::to_string(pad));
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  if (d.h + 2 * pad - d.kh < 0 || d.w + 2 * pad - d.kw < 0 || d.ho < 1 || d.wo < 1)
    throw ShapeError("conv2d: spatial dims " + std::to_string(d.h) + "x" + std::to_string(d.w) +
                     " too small for kernel " + std::to_string(d.kh) + "x" + std::to_string(d.kw) +
                     " with pad " + std::to_string(pad));
  return d;
}

// Valid output-column range for a fixed kernel column: iw = ow*stride - pad + kw in [0, W).
inline void conv_col_range(int kw, int pad, int stride, int w, int wo, int& lo, int& hi) {
  int off = kw - pad;
  lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  int max_num = w - 1 - off;
  hi = max_num < 0 ? -1 : std::min(wo - 1, max_num / stride);
}

inline void conv_forward_kernel(const ConvDims& d, const double* in, const double* ker,
                                const double* bias, double* out) {
  const std::int64_t in_plane = static_cast<std::int64_t>(d.h) * d.w;
  const std::int64_t out_plane = static_cast<std::int64_t>(d.ho) * d.wo;
  for (int b = 0; b < d.batch; ++b) {
    for (int co = 0; co < d.cout; ++co) {
      double* op = out + (static_cast<std::int64_t>(b) * d.cout + co) * out_plane;
      std::fill(op, op + out_plane, bias[co]);
      for (int ci = 0; ci < d.cin; ++ci) {
        const double* ip = in + (static_cast<std::int64_t>(b) * d.cin + ci) * in_plane;
        const double* kp = ker + ((static_cast<std::int64_t>(co) * d.cin + ci) * d.kh) * d.kw;
        for (int kh = 0; kh < d.kh; ++kh) {
          for (int kw = 0; kw < d.kw; ++kw) {
            const double k = kp[kh * d.kw + kw];
            int lo, hi;
            conv_col_range(kw, d.pad, d.stride, d.w, d.wo, lo, hi);
            if (hi < lo) continue;
            const int off = kw - d.pad;
            for (int oh = 0; oh < d.ho; ++oh) {
              const int ih = oh * d.stride - d.pad + kh;
              if (ih < 0 || ih >= d.h) continue;
              const double* irow = ip + static_cast<std::int64_t>(ih) * d.w + off;
              double* orow = op + static_cast<std::int64_t>(oh) * d.wo;
              if (d.stride == 1) {
                for (int ow = lo; ow <= hi; ++ow) orow[ow] += k * irow[ow];
              } else {
                for (int ow = lo; ow <= hi; ++ow) orow[ow] += k * irow[ow * d.stride];
              }
            }
          }
        }
      }
    }
  }
}

inline void conv_backward_kernel(const ConvDims& d, const double* in, const double* ker,
                                 const double* gout, double* gin, double* gker, double* gbias) {
  const std::int64_t in_plane = static_cast<std::int64_t>(d.h) * d.w;
  const std::int64_t out_plane = static_cast<std::int64_t>(d.ho) * d.wo;
  for (int b = 0; b < d.batch; ++b) {
    for (int co = 0; co < d.cout; ++co) {
      const double* gop = gout + (static_cast<std::int64_t>(b) * d.cout + co) * out_plane;
      double acc_bias = 0.0;
      for (std::int64_t i = 0; i < out_plane; ++i) acc_bias += gop[i];
      gbias[co] += acc_bias;
      for (int ci = 0; ci < d.cin; ++ci) {
        const double* ip = in + (static_cast<std::int64_t>(b) * d.cin + ci) * in_plane;
        double* gip = gin + (static_cast<std::int64_t>(b) * d.cin + ci) * in_plane;
        const std::int64_t kbase = (static_cast<std::int64_t>(co) * d.cin + ci) * d.kh * d.kw;
        for (int kh = 0; kh < d.kh; ++kh) {
          for (int kw = 0; kw < d.kw; ++kw) {
            const double k = ker[kbase + kh * d.kw + kw];
            double acc_k = 0.0;
            int lo, hi;
            conv_col_range(kw, d.pad, d.stride, d.w, d.wo, lo, hi);
            if (hi < lo) continue;
            const int off = kw - d.pad;
            for (int oh = 0; oh < d.ho; ++oh) {
              const int ih = oh * d.stride - d.pad + kh;
              if (ih < 0 || ih >= d.h) continue;
              const double* irow = ip + static_cast<std::int64_t>(ih) * d.w + off;
              double* girow = gip + static_cast<std::int64_t>(ih) * d.w + off;
              const double* grow = gop + static_cast<std::int64_t>(oh) * d.wo;
              if (d.stride == 1) {
                for (int ow = lo; ow <= hi; ++ow) {
                  girow[ow] += k * grow[ow];
                  acc_k += grow[ow] * irow[ow];
                }
              } else {
                for (int ow = lo; ow <= hi; ++ow) {
                  girow[ow * d.stride] += k * grow[ow];
                  acc_k += grow[ow] * irow[ow * d.stride];
                }
              }
            }
            gker[kbase + kh * d.kw + kw] += acc_k;
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2-d cross-correlation with zero padding. Output extents follow the usual
/// floor convention H' = floor((H + 2*pad - Kh) / stride) + 1.
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
                     int pad) {
  const auto d = detail::conv_check(input, kernel, bias, stride, pad);
  Tensor out = Tensor::zeros({d.batch, d.cout, d.ho, d.wo});
  detail::conv_forward_kernel(d, input.values().data(), kernel.values().data(),
                              bias.values().data(), out.values_mut().data());
  detail::check_finite("conv2d", out.data()->values);
  if (Tape* t = Tape::current()) {
    auto in_d = input.data();
    auto k_d = kernel.data();
    auto b_d = bias.data();
    auto out_d = out.data();
    t->record("conv2d", {in_d, k_d, b_d}, out_d, [=] {
      detail::conv_backward_kernel(d, in_d->values.data(), k_d->values.data(),
                                   out_d->grad.data(), in_d->grad.data(), k_d->grad.data(),
                                   b_d->grad.data());
    });
  }
  return out;
}

/// Nearest-neighbour upsampling by an integer factor; backward sums the
/// gradient over each replicated block.
inline Tensor upsample_nearest(const Tensor& input, int factor) {
  if (factor < 1) throw ValueError("upsample_nearest: factor must be >= 1");
  if (input.shape().size() != 4)
    throw ShapeError("upsample_nearest: input must be rank 4, got " + shape_str(input.shape()));
  const int b = input.shape()[0], c = input.shape()[1], h = input.shape()[2], w = input.shape()[3];
  const int ho = h * factor, wo = w * factor;
  Tensor out = Tensor::zeros({b, c, ho, wo});
  const double* in = input.values().data();
  double* op = out.values_mut().data();
  const std::int64_t planes = static_cast<std::int64_t>(b) * c;
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* ip = in + p * h * w;
    double* o = op + p * static_cast<std::int64_t>(ho) * wo;
    for (int y = 0; y < ho; ++y) {
      const double* irow = ip + static_cast<std::int64_t>(y / factor) * w;
      for (int x = 0; x < wo; ++x) o[static_cast<std::int64_t>(y) * wo + x] = irow[x / factor];
    }
  }
  if (Tape* t = Tape::current()) {
    auto in_d = input.data();
    auto out_d = out.data();
    t->record("upsample_nearest", {in_d}, out_d, [=] {
      const double* g = out_d->grad.data();
      double* gi = in_d->grad.data();
      for (std::int64_t p = 0; p < planes; ++p) {
        const double* gp = g + p * static_cast<std::int64_t>(ho) * wo;
        double* gip = gi + p * h * w;
        for (int y = 0; y < ho; ++y)
          for (int x = 0; x < wo; ++x)
            gip[static_cast<std::int64_t>(y / factor) * w + x / factor] +=
                gp[static_cast<std::int64_t>(y) * wo + x];
      }
    });
  }
  return out;
}

enum class Act { relu, leaky_relu, tanh, sigmoid };

/// Elementwise activation. relu gradient at exactly 0 is 0.
inline Tensor activation(const Tensor& input, Act kind, double slope = 0.0) {
  if (kind == Act::leaky_relu && !(slope > 0.0 && slope < 1.0))
    throw ValueError("activation: leaky_relu slope must be in (0,1), got " + std::to_string(slope));
  Tensor out = Tensor::zeros(input.shape());
  const auto in = input.values();
  auto ov = out.values_mut();
  switch (kind) {
    case Act::relu:
      for (std::int64_t i = 0; i < input.size(); ++i) ov[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case Act::leaky_relu:
      for (std::int64_t i = 0; i < input.size(); ++i) ov[i] = in[i] > 0.0 ? in[i] : slope * in[i];
      break;
    case Act::tanh:
      for (std::int64_t i = 0; i < input.size(); ++i) ov[i] = std::tanh(in[i]);
      break;
    case Act::sigmoid:
      for (std::int64_t i = 0; i < input.size(); ++i) ov[i] = detail::stable_sigmoid(in[i]);
      break;
  }
  detail::check_finite("activation", out.data()->values);
  if (Tape* t = Tape::current()) {
    auto in_d = input.data();
    auto out_d = out.data();
    t->record("activation", {in_d}, out_d, [=] {
      const auto& g = out_d->grad;
      const auto& x = in_d->values;
      const auto& y = out_d->values;
      auto& gi = in_d->grad;
      const std::size_t n = x.size();
      switch (kind) {
        case Act::relu:
          for (std::size_t i = 0; i < n; ++i) gi[i] += x[i] > 0.0 ? g[i] : 0.0;
          break;
        case Act::leaky_relu:
          for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] * (x[i] > 0.0 ? 1.0 : slope);
          break;
        case Act::tanh:
          for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] * (1.0 - y[i] * y[i]);
          break;
        case Act::sigmoid:
          for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] * y[i] * (1.0 - y[i]);
          break;
      }
    });
  }
  return out;
}

/// Per-(batch, channel) plane normalization: subtract plane mean, divide by
/// sqrt(plane variance + eps), scale by gain[c] and add shift[c].
inline Tensor instance_norm(const Tensor& input, const Tensor& gain, const Tensor& shift,
                            double eps) {
  if (input.shape().size() != 4)
    throw ShapeError("instance_norm: input must be rank 4, got " + shape_str(input.shape()));
  const int b = input.shape()[0], c = input.shape()[1], h = input.shape()[2], w = input.shape()[3];
  if (h * w < 2) throw ShapeError("instance_norm: plane needs H*W >= 2, got " +
                                  std::to_string(h) + "x" + std::to_string(w));
  if (gain.shape() != Shape{c} || shift.shape() != Shape{c})
    throw ShapeError("instance_norm: gain/shift must be [C=" + std::to_string(c) + "]");
  if (!(eps > 0.0)) throw ValueError("instance_norm: eps must be > 0");

  const std::int64_t n = h * w;
  const std::int64_t planes = static_cast<std::int64_t>(b) * c;
  Tensor out = Tensor::zeros(input.shape());
  auto mu = std::make_shared<std::vector<double>>(planes);
  auto inv_std = std::make_shared<std::vector<double>>(planes);
  const double* in = input.values().data();
  const double* gv = gain.values().data();
  const double* sv = shift.values().data();
  double* ov = out.values_mut().data();
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* x = in + p * n;
    double m = 0.0;
    for (std::int64_t i = 0; i < n; ++i) m += x[i];
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double d = x[i] - m;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*mu)[p] = m;
    (*inv_std)[p] = is;
    const double g = gv[p % c];
    const double s = sv[p % c];
    double* y = ov + p * n;
    for (std::int64_t i = 0; i < n; ++i) y[i] = g * (x[i] - m) * is + s;
  }
  detail::check_finite("instance_norm", out.data()->values);
  if (Tape* t = Tape::current()) {
    auto in_d = input.data();
    auto g_d = gain.data();
    auto s_d = shift.data();
    auto out_d = out.data();
    t->record("instance_norm", {in_d, g_d, s_d}, out_d, [=] {
      const double* x = in_d->values.data();
      const double* g = out_d->grad.data();
      double* gi = in_d->grad.data();
      for (std::int64_t p = 0; p < planes; ++p) {
        const double m = (*mu)[p];
        const double is = (*inv_std)[p];
        const double gamma = g_d->values[static_cast<std::size_t>(p % c)];
        const double* xp = x + p * n;
        const double* gp = g + p * n;
        double s1 = 0.0, s2 = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
          const double xh = (xp[i] - m) * is;
          s1 += gp[i];
          s2 += gp[i] * xh;
        }
        s_d->grad[static_cast<std::size_t>(p % c)] += s1;
        g_d->grad[static_cast<std::size_t>(p % c)] += s2;
        const double mean_dxh = gamma * s1 / static_cast<double>(n);
        const double mean_dxh_xh = gamma * s2 / static_cast<double>(n);
        double* gip = gi + p * n;
        for (std::int64_t i = 0; i < n; ++i) {
          const double xh = (xp[i] - m) * is;
          gip[i] += is * (gamma * gp[i] - mean_dxh - xh * mean_dxh_xh);
        }
      }
    });
  }
  return out;
}

/// Elementwise sum of two same-shape tensors.
inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out = Tensor::zeros(a.shape());
  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.values_mut();
  for (std::int64_t i = 0; i < a.size(); ++i) ov[i] = av[i] + bv[i];
  detail::check_finite("add", out.data()->values);
  if (Tape* t = Tape::current()) {
    auto a_d = a.data();
    auto b_d = b.data();
    auto out_d = out.data();
    t->record("add", {a_d, b_d}, out_d, [=] {
      const auto& g = out_d->grad;
      for (std::size_t i = 0; i < g.size(); ++i) a_d->grad[i] += g[i];
      for (std::size_t i = 0; i < g.size(); ++i) b_d->grad[i] += g[i];
    });
  }
  return out;
}

/// Elementwise product of two same-shape tensors.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out = Tensor::zeros(a.shape());
  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.values_mut();
  for (std::int64_t i = 0; i < a.size(); ++i) ov[i] = av[i] * bv[i];
  detail::check_finite("mul", out.data()->values);
  if (Tape* t = Tape::current()) {
    auto a_d = a.data();
    auto b_d = b.data();
    auto out_d = out.data();
    t->record("mul", {a_d, b_d}, out_d, [=] {
      const auto& g = out_d->grad;
      for (std::size_t i = 0; i < g.size(); ++i) a_d->grad[i] += g[i] * b_d->values[i];
      for (std::size_t i = 0; i < g.size(); ++i) b_d->grad[i] += g[i] * a_d->values[i];
    });
  }
  return out;
}

/// Multiplies every element by a constant.
inline Tensor scale(const Tensor& a, double factor) {
  Tensor out = Tensor::zeros(a.shape());
  const auto av = a.values();
  auto ov = out.values_mut();
  for (std::int64_t i = 0; i < a.size(); ++i) ov[i] = factor * av[i];
  detail::check_finite("scale", out.data()->values);
  if (Tape* t = Tape::current()) {
    auto a_d = a.data();
    auto out_d = out.data();
    t->record("scale", {a_d}, out_d, [=] {
      const auto& g = out_d->grad;
      for (std::size_t i = 0; i < g.size(); ++i) a_d->grad[i] += factor * g[i];
    });
  }
  return out;
}

/// Sum of all elements, as a scalar tensor.
inline Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (Tape* t = Tape::current()) {
    auto a_d = a.data();
    auto out_d = out.data();
    t->record("sum", {a_d}, out_d, [=] {
      const double g = out_d->grad[0];
      for (auto& gi : a_d->grad) gi += g;
    });
  }
  return out;
}

/// Mean of all elements, as a scalar tensor.
inline Tensor mean(const Tensor& a) {
  const double inv_n = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  Tensor out = Tensor::scalar(acc * inv_n);
  if (Tape* t = Tape::current()) {
    auto a_d = a.data();
    auto out_d = out.data();
    t->record("mean", {a_d}, out_d, [=] {
      const double g = out_d->grad[0] * inv_n;
      for (auto& gi : a_d->grad) gi += g;
    });
  }
  return out;
}

/// Mean over all elements of |a - b|. Subgradient 0 at ties.
inline Tensor mean_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("mean_abs_diff: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const double inv_n = 1.0 / static_cast<double>(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) acc += std::abs(av[i] - bv[i]);
  Tensor out = Tensor::scalar(acc * inv_n);
  if (Tape* t = Tape::current()) {
    auto a_d = a.data();
    auto b_d = b.data();
    auto out_d = out.data();
    t->record("mean_abs_diff", {a_d, b_d}, out_d, [=] {
      const double g = out_d->grad[0] * inv_n;
      for (std::size_t i = 0; i < a_d->values.size(); ++i) {
        const double diff = a_d->values[i] - b_d->values[i];
        const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        a_d->grad[i] += g * s;
        b_d->grad[i] -= g * s;
      }
    });
  }
  return out;
}

/// Mean of (a - target)^2 against a constant target.
inline Tensor mean_square_to(const Tensor& a, double target) {
  const double inv_n = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  for (double v : a.values()) acc += (v - target) * (v - target);
  Tensor out = Tensor::scalar(acc * inv_n);
  if (Tape* t = Tape::current()) {
    auto a_d = a.data();
    auto out_d = out.data();
    t->record("mean_square_to", {a_d}, out_d, [=] {
      const double g = out_d->grad[0] * inv_n;
      for (std::size_t i = 0; i < a_d->values.size(); ++i)
        a_d->grad[i] += g * 2.0 * (a_d->values[i] - target);
    });
  }
  return out;
}

/// Mean of log(sigmoid(a)); building block for the log-form GAN losses.
inline Tensor mean_log_sigmoid(const Tensor& a) {
  const double inv_n = 1.0 / static_cast<double>(a.size());
  double acc = 0.0;
  for (double v : a.values()) acc += detail::stable_log_sigmoid(v);
  Tensor out = Tensor::scalar(acc * inv_n);
  if (Tape* t = Tape::current()) {
    auto a_d = a.data();
    auto out_d = out.data();
    t->record("mean_log_sigmoid", {a_d}, out_d, [=] {
      const double g = out_d->grad[0] * inv_n;
      for (std::size_t i = 0; i < a_d->values.size(); ++i)
        a_d->grad[i] += g * detail::stable_sigmoid(-a_d->values[i]);
    });
  }
  return out;
}

/// Linear combination of scalar tensors: sum of coefficient * term.
inline Tensor weighted_sum(const std::vector<std::pair<double, Tensor>>& terms) {
  double acc = 0.0;
  std::vector<std::shared_ptr<TensorData>> inputs;
  inputs.reserve(terms.size());
  std::vector<double> coeffs;
  coeffs.reserve(terms.size());
  for (const auto& [c, t] : terms) {
    if (!t.is_scalar())
      throw ShapeError("weighted_sum: term must be scalar, got " + shape_str(t.shape()));
    acc += c * t.item();
    inputs.push_back(t.data());
    coeffs.push_back(c);
  }
  Tensor out = Tensor::scalar(acc);
  if (Tape* t = Tape::current()) {
    auto out_d = out.data();
    auto ins = inputs;
    t->record("weighted_sum", std::move(inputs), out_d, [out_d, ins, coeffs] {
      const double g = out_d->grad[0];
      for (std::size_t i = 0; i < ins.size(); ++i) ins[i]->grad[0] += coeffs[i] * g;
    });
  }
  return out;
}

/// Identity on values; contributes exactly zero gradient to its input and
/// everything upstream of it.
inline Tensor stop_gradient(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  std::copy(a.values().begin(), a.values().end(), out.values_mut().begin());
  if (Tape* t = Tape::current()) {
    // Recorded with no inputs: the reverse sweep never crosses this node.
    t->record("stop_gradient", {}, out.data(), nullptr);
  }
  return out;
}

/// Convenience entry point matching the training-code call sites.
inline void backward(const Tensor& loss) {
  Tape* t = Tape::current();
  if (t == nullptr) throw ValueError("backward: no active tape");
  t->backward(loss);
}

}  // namespace cyclet
