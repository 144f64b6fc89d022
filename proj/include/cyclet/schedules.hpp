#pragma once

#include <string>

#include "cyclet/errors.hpp"

namespace cyclet {

/// Epoch-indexed linear schedules: the cycle weight decays but never reaches
/// zero, the feature-mix ratio rises but never reaches one, and the learning
/// rate holds constant then decays linearly to zero.
struct ScheduleConfig {
  int total_epochs = 200;
  double lambda_start = 10.0;
  double lambda_end = 1.0;  // must stay > 0
  double gamma_start = 0.0;
  double gamma_end = 0.9;  // must stay < 1
  double lr_base = 2e-4;
  int lr_constant_epochs = 100;
  // Ramp spans; -1 end means "total_epochs".
  int lambda_ramp_start = 0;
  int lambda_ramp_end = -1;
  int gamma_ramp_start = 0;
  int gamma_ramp_end = -1;

  int lambda_span_end() const { return lambda_ramp_end < 0 ? total_epochs : lambda_ramp_end; }
  int gamma_span_end() const { return gamma_ramp_end < 0 ? total_epochs : gamma_ramp_end; }

  void validate() const {
    if (total_epochs < 1)
      throw ValueError("schedule: total_epochs must be >= 1, got " + std::to_string(total_epochs));
    if (!(lambda_end > 0.0))
      throw ValueError("schedule: lambda_end must be > 0, got " + std::to_string(lambda_end));
    if (!(lambda_end <= lambda_start))
      throw ValueError("schedule: need lambda_end <= lambda_start");
    if (!(gamma_start >= 0.0 && gamma_start <= gamma_end && gamma_end < 1.0))
      throw ValueError("schedule: need 0 <= gamma_start <= gamma_end < 1");
    if (lr_constant_epochs < 0 || lr_constant_epochs > total_epochs)
      throw ValueError("schedule: lr_constant_epochs must be in [0, total_epochs]");
    if (!(lr_base >= 0.0)) throw ValueError("schedule: lr_base must be >= 0");
    for (int v : {lambda_ramp_start, gamma_ramp_start})
      if (v < 0 || v > total_epochs) throw ValueError("schedule: ramp start out of range");
    for (int v : {lambda_span_end(), gamma_span_end()})
      if (v < 0 || v > total_epochs) throw ValueError("schedule: ramp end out of range");
    if (lambda_span_end() < lambda_ramp_start || gamma_span_end() < gamma_ramp_start)
      throw ValueError("schedule: ramp end precedes ramp start");
  }
};

namespace detail {

inline void check_epoch(const ScheduleConfig& cfg, int t) {
  if (t < 0 || t > cfg.total_epochs)
    throw ValueError("schedule: epoch " + std::to_string(t) + " outside [0, " +
                     std::to_string(cfg.total_epochs) + "]");
}

/// Linear ramp clamped at its endpoints; a degenerate span steps at the
/// endpoint with no division by zero.
inline double ramp(int t, int start, int end, double v0, double v1) {
  if (t >= end) return v1;
  if (t <= start) return v0;
  const double u = static_cast<double>(t - start) / static_cast<double>(end - start);
  return v0 + (v1 - v0) * u;
}

}  // namespace detail

/// Cycle-consistency weight at epoch t; always >= lambda_end > 0.
inline double lambda_at(const ScheduleConfig& cfg, int t) {
  detail::check_epoch(cfg, t);
  return detail::ramp(t, cfg.lambda_ramp_start, cfg.lambda_span_end(), cfg.lambda_start,
                      cfg.lambda_end);
}

/// Feature-level mix ratio at epoch t; always <= gamma_end < 1.
inline double gamma_at(const ScheduleConfig& cfg, int t) {
  detail::check_epoch(cfg, t);
  return detail::ramp(t, cfg.gamma_ramp_start, cfg.gamma_span_end(), cfg.gamma_start,
                      cfg.gamma_end);
}

/// Learning rate: lr_base for t < lr_constant_epochs, then linear to 0 at
/// total_epochs.
inline double lr_at(const ScheduleConfig& cfg, int t) {
  detail::check_epoch(cfg, t);
  if (t < cfg.lr_constant_epochs) return cfg.lr_base;
  if (cfg.total_epochs == cfg.lr_constant_epochs) return cfg.lr_base;
  const double remain = static_cast<double>(cfg.total_epochs - t) /
                        static_cast<double>(cfg.total_epochs - cfg.lr_constant_epochs);
  return cfg.lr_base * remain;
}

}  // namespace cyclet
