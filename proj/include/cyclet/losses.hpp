#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cyclet/nets.hpp"
#include "cyclet/ops.hpp"
#include "cyclet/tensor.hpp"

namespace cyclet {

enum class GanForm { least_squares, log_form };
enum class QualityMode { generated, literal, off };

inline const char* to_string(GanForm f) {
  return f == GanForm::least_squares ? "least_squares" : "log";
}
inline const char* to_string(QualityMode m) {
  switch (m) {
    case QualityMode::generated: return "generated";
    case QualityMode::literal: return "literal";
    default: return "off";
  }
}

struct LossConfig {
  double gamma = 0.0;   // feature-vs-pixel mix in [0,1]
  double lambda = 10.0; // cycle-consistency weight, >= 0
  GanForm gan_form = GanForm::least_squares;
  QualityMode quality_mode = QualityMode::generated;
  /// Verification-only: route cycle features through a parameter-cloned
  /// discriminator instead of stop_gradient. Values and generator gradients
  /// are unchanged; discriminator parameters are structurally unreachable.
  bool shadow_clone_features = false;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0))
      throw ValueError("LossConfig: gamma must be in [0,1], got " + std::to_string(gamma));
    if (!(lambda >= 0.0))
      throw ValueError("LossConfig: lambda must be >= 0, got " + std::to_string(lambda));
  }
};

/// One direction of the cycle loss, decomposed for diagnostics.
/// combined == quality_weight * (gamma*feature + (1-gamma)*pixel);
/// feature_term is left undefined when the caller skipped features (gamma 0).
struct CycleLossBreakdown {
  Tensor pixel_term;
  Tensor feature_term;
  double quality_weight = 1.0;
  Tensor combined;
};

/// Generator-side GAN loss on discriminator scores of generated images.
inline Tensor gan_loss_generator(const Tensor& scores_fake, GanForm form) {
  if (form == GanForm::least_squares) return mean_square_to(scores_fake, 1.0);
  // non-saturating log form: mean of -log sigmoid(s)
  return weighted_sum({{-1.0, mean_log_sigmoid(scores_fake)}});
}

/// Discriminator-side GAN loss: real scores toward 1, fake scores toward 0,
/// halved so its scale matches the generator term.
inline Tensor gan_loss_discriminator(const Tensor& scores_real, const Tensor& scores_fake,
                                     GanForm form) {
  if (form == GanForm::least_squares)
    return weighted_sum(
        {{0.5, mean_square_to(scores_real, 1.0)}, {0.5, mean_square_to(scores_fake, 0.0)}});
  return weighted_sum({{-0.5, mean_log_sigmoid(scores_real)},
                       {-0.5, mean_log_sigmoid(scale(scores_fake, -1.0))}});
}

/// Pixel-level cycle loss: mean |reconstruction - original|.
inline Tensor cycle_loss_pixel(const Tensor& x, const Tensor& x_reconstructed) {
  return mean_abs_diff(x_reconstructed, x);
}

/// Feature tap of a discriminator with its parameters stop-gradiented:
/// values match a live forward bitwise, but no gradient reaches the
/// discriminator. The cycle constraint trains generators only.
inline Tensor cycle_features(const DiscriminatorNet& d, const Tensor& img) {
  return d.forward(img, /*detach_params=*/true).features;
}

/// Mix of feature-level and pixel-level cycle distances.
inline CycleLossBreakdown cycle_loss_mixed(const Tensor& x, const Tensor& x_recon,
                                           const Tensor& feat_x, const Tensor& feat_recon,
                                           double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw ValueError("cycle_loss_mixed: gamma must be in [0,1], got " + std::to_string(gamma));
  CycleLossBreakdown b;
  b.pixel_term = cycle_loss_pixel(x, x_recon);
  b.feature_term = mean_abs_diff(feat_recon, feat_x);
  b.quality_weight = 1.0;
  b.combined = weighted_sum({{gamma, b.feature_term}, {1.0 - gamma, b.pixel_term}});
  return b;
}

/// Mixed cycle loss scaled by a detached quality weight in [0,1].
inline CycleLossBreakdown cycle_loss_weighted(const Tensor& x, const Tensor& x_recon,
                                              const Tensor& feat_x, const Tensor& feat_recon,
                                              double gamma, double weight) {
  if (!(weight >= 0.0 && weight <= 1.0))
    throw ValueError("cycle_loss_weighted: weight must be in [0,1], got " +
                     std::to_string(weight));
  CycleLossBreakdown b = cycle_loss_mixed(x, x_recon, feat_x, feat_recon, gamma);
  b.quality_weight = weight;
  b.combined =
      weighted_sum({{weight * gamma, b.feature_term}, {weight * (1.0 - gamma), b.pixel_term}});
  return b;
}

namespace detail {

inline double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace detail

/// Detached scalar in [0,1] estimating how realistic the cycle's generated
/// image is. "generated" judges G(x) with the target-domain discriminator;
/// "literal" scores the real input x with its own discriminator.
inline double quality_weight(const DiscriminatorNet& dx, const DiscriminatorNet& dy,
                             const Tensor& x, const Tensor& gx, QualityMode mode) {
  if (mode == QualityMode::off) return 1.0;
  NoTape guard;
  if (mode == QualityMode::literal)
    return detail::clamp01(detail::mean_of(dx.forward(x).scores.values()));
  return detail::clamp01(detail::mean_of(dy.forward(gx).scores.values()));
}

struct CycleDiag {
  double pixel = 0.0;
  double feature = 0.0;
  double weight = 1.0;
  double combined = 0.0;
};

struct Diagnostics {
  double gan_gen_ab = 0.0;
  double gan_gen_ba = 0.0;
  double disc_x = 0.0;
  double disc_y = 0.0;
  CycleDiag cyc_x, cyc_y;
  double score_real_x = 0.0, score_fake_x = 0.0;
  double score_real_y = 0.0, score_fake_y = 0.0;
};

/// Generator-phase objective: both GAN terms plus both weighted cycle terms.
struct GeneratorObjective {
  Tensor gen_loss;
  Tensor gan_ab, gan_ba;
  CycleLossBreakdown cyc_x, cyc_y;
  Tensor fake_y, fake_x;
};

namespace detail {

/// One cycle direction: reconstruction already computed; features and
/// quality weight resolved according to cfg.
inline CycleLossBreakdown build_cycle_term(const DiscriminatorNet& d_features,
                                           const Tensor& original, const Tensor& recon,
                                           double quality, const LossConfig& cfg) {
  if (cfg.gamma == 0.0) {
    // Pixel-only path; feature forwards skipped entirely.
    CycleLossBreakdown b;
    b.pixel_term = cycle_loss_pixel(original, recon);
    b.quality_weight = quality;
    b.combined = weighted_sum({{quality * (1.0 - cfg.gamma), b.pixel_term}});
    return b;
  }
  Tensor feat_orig, feat_recon;
  if (cfg.shadow_clone_features) {
    DiscriminatorNet ghost = clone_net(d_features);
    feat_orig = ghost.forward(original).features;
    feat_recon = ghost.forward(recon).features;
  } else {
    feat_orig = cycle_features(d_features, original);
    feat_recon = cycle_features(d_features, recon);
  }
  return cycle_loss_weighted(original, recon, feat_orig, feat_recon, cfg.gamma, quality);
}

}  // namespace detail

inline GeneratorObjective generator_objective(const GeneratorNet& g, const GeneratorNet& f,
                                              const DiscriminatorNet& dx,
                                              const DiscriminatorNet& dy, const Tensor& batch_x,
                                              const Tensor& batch_y, const LossConfig& cfg) {
  cfg.validate();
  GeneratorObjective obj;
  obj.fake_y = g.forward(batch_x);
  obj.fake_x = f.forward(batch_y);
  Tensor recon_x = f.forward(obj.fake_y);
  Tensor recon_y = g.forward(obj.fake_x);

  Tensor scores_fake_y = dy.forward(obj.fake_y).scores;
  Tensor scores_fake_x = dx.forward(obj.fake_x).scores;
  obj.gan_ab = gan_loss_generator(scores_fake_y, cfg.gan_form);
  obj.gan_ba = gan_loss_generator(scores_fake_x, cfg.gan_form);

  double quality_x = 1.0, quality_y = 1.0;
  if (cfg.quality_mode == QualityMode::generated) {
    quality_x = detail::clamp01(detail::mean_of(scores_fake_y.values()));
    quality_y = detail::clamp01(detail::mean_of(scores_fake_x.values()));
  } else if (cfg.quality_mode == QualityMode::literal) {
    NoTape guard;
    quality_x = detail::clamp01(detail::mean_of(dx.forward(batch_x).scores.values()));
    quality_y = detail::clamp01(detail::mean_of(dy.forward(batch_y).scores.values()));
  }

  obj.cyc_x = detail::build_cycle_term(dx, batch_x, recon_x, quality_x, cfg);
  obj.cyc_y = detail::build_cycle_term(dy, batch_y, recon_y, quality_y, cfg);

  obj.gen_loss = weighted_sum({{1.0, obj.gan_ab},
                               {1.0, obj.gan_ba},
                               {cfg.lambda, obj.cyc_x.combined},
                               {cfg.lambda, obj.cyc_y.combined}});
  return obj;
}

/// Discriminator-phase objective on detached fakes.
struct DiscriminatorObjective {
  Tensor dx_loss, dy_loss;
  double score_real_x = 0.0, score_fake_x = 0.0;
  double score_real_y = 0.0, score_fake_y = 0.0;
};

inline DiscriminatorObjective discriminator_objective(const DiscriminatorNet& dx,
                                                      const DiscriminatorNet& dy,
                                                      const Tensor& batch_x,
                                                      const Tensor& batch_y,
                                                      const Tensor& fake_x_detached,
                                                      const Tensor& fake_y_detached,
                                                      const LossConfig& cfg) {
  DiscriminatorObjective obj;
  Tensor real_x = dx.forward(batch_x).scores;
  Tensor fake_x = dx.forward(fake_x_detached).scores;
  Tensor real_y = dy.forward(batch_y).scores;
  Tensor fake_y = dy.forward(fake_y_detached).scores;
  obj.dx_loss = gan_loss_discriminator(real_x, fake_x, cfg.gan_form);
  obj.dy_loss = gan_loss_discriminator(real_y, fake_y, cfg.gan_form);
  obj.score_real_x = detail::mean_of(real_x.values());
  obj.score_fake_x = detail::mean_of(fake_x.values());
  obj.score_real_y = detail::mean_of(real_y.values());
  obj.score_fake_y = detail::mean_of(fake_y.values());
  return obj;
}

/// The complete per-epoch objective with lambda and gamma already resolved.
struct FullObjective {
  Tensor gen_loss, dx_loss, dy_loss;
  Diagnostics diag;
};

inline FullObjective full_objective(const GeneratorNet& g, const GeneratorNet& f,
                                    const DiscriminatorNet& dx, const DiscriminatorNet& dy,
                                    const Tensor& batch_x, const Tensor& batch_y,
                                    const LossConfig& cfg) {
  GeneratorObjective gen = generator_objective(g, f, dx, dy, batch_x, batch_y, cfg);
  DiscriminatorObjective disc = discriminator_objective(
      dx, dy, batch_x, batch_y, gen.fake_x.detach(), gen.fake_y.detach(), cfg);

  FullObjective out;
  out.gen_loss = gen.gen_loss;
  out.dx_loss = disc.dx_loss;
  out.dy_loss = disc.dy_loss;
  out.diag.gan_gen_ab = gen.gan_ab.item();
  out.diag.gan_gen_ba = gen.gan_ba.item();
  out.diag.disc_x = disc.dx_loss.item();
  out.diag.disc_y = disc.dy_loss.item();
  auto fill = [](const CycleLossBreakdown& b) {
    CycleDiag d;
    d.pixel = b.pixel_term.item();
    d.feature = b.feature_term.defined() ? b.feature_term.item() : 0.0;
    d.weight = b.quality_weight;
    d.combined = b.combined.item();
    return d;
  };
  out.diag.cyc_x = fill(gen.cyc_x);
  out.diag.cyc_y = fill(gen.cyc_y);
  out.diag.score_real_x = disc.score_real_x;
  out.diag.score_fake_x = disc.score_fake_x;
  out.diag.score_real_y = disc.score_real_y;
  out.diag.score_fake_y = disc.score_fake_y;
  return out;
}

}  // namespace cyclet
