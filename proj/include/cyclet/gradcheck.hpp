#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cyclet/ops.hpp"
#include "cyclet/rng.hpp"
#include "cyclet/tensor.hpp"

namespace cyclet {

/// Central-difference gradient estimate of a deterministic scalar function.
inline Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                   double h) {
  if (!(h > 0.0)) throw ValueError("finite_diff_gradient: h must be > 0");
  Tensor probe = x.detach();
  Tensor out = Tensor::zeros(x.shape());
  auto pv = probe.values_mut();
  auto ov = out.values_mut();
  NoTape guard;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double keep = pv[i];
    pv[i] = keep + h;
    const double fp = f(probe);
    pv[i] = keep - h;
    const double fm = f(probe);
    pv[i] = keep;
    ov[i] = (fp - fm) / (2.0 * h);
  }
  return out;
}

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  /// Relative-error denominator floor; differences below floor*tol are noise.
  double floor = 1e-6;
  /// Fraction of entries allowed to be excluded as kink-contaminated.
  double exclusion_cap = 0.05;
  /// Elementwise entries to probe per tensor; 0 means all.
  std::int64_t max_elements = 0;
};

struct GradCheckReport {
  std::string component;
  double max_rel_err = 0.0;
  std::int64_t worst_index = -1;
  std::int64_t checked = 0;
  std::int64_t excluded = 0;
  bool ok = true;
};

namespace detail {

inline double rel_err(double a, double b, double floor) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

inline double eval_scalar(const std::function<Tensor()>& build_loss) {
  NoTape guard;
  return build_loss().item();
}

/// FD estimate from values perturbed in place at flat index i.
inline double fd_at(const std::function<Tensor()>& build_loss, Tensor& x, std::int64_t i,
                    double h) {
  auto v = x.values_mut();
  const double keep = v[i];
  v[i] = keep + h;
  const double fp = eval_scalar(build_loss);
  v[i] = keep - h;
  const double fm = eval_scalar(build_loss);
  v[i] = keep;
  return (fp - fm) / (2.0 * h);
}

/// An estimate is kink-contaminated when halving h moves it materially;
/// central differences across a |.| or relu corner are not trustworthy.
inline bool fd_unstable(const std::function<Tensor()>& build_loss, Tensor& x, std::int64_t i,
                        double fd_h, const GradCheckOptions& opts) {
  const double fd_half = fd_at(build_loss, x, i, opts.h / 2.0);
  return rel_err(fd_h, fd_half, opts.floor) > opts.tol / 2.0;
}

inline void finish_report(GradCheckReport& r, const GradCheckOptions& opts) {
  const double cap = opts.exclusion_cap * static_cast<double>(r.checked + r.excluded);
  r.ok = r.max_rel_err <= opts.tol && static_cast<double>(r.excluded) <= std::max(cap, 1.0);
}

}  // namespace detail

/// Compares the tape gradient of build_loss() wrt x against central finite
/// differences, element by element (optionally on a random subsample).
/// x must be a leaf referenced inside build_loss.
inline GradCheckReport check_gradient_elementwise(const std::string& name,
                                                  const std::function<Tensor()>& build_loss,
                                                  Tensor x, SplitMix64& rng,
                                                  GradCheckOptions opts = {}) {
  GradCheckReport report;
  report.component = name;

  x.zero_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    Tensor loss = build_loss();
    tape.backward(loss);
    analytic.assign(x.grad().begin(), x.grad().end());
  }

  std::vector<std::int64_t> indices;
  if (opts.max_elements > 0 && x.size() > opts.max_elements) {
    for (std::int64_t k = 0; k < opts.max_elements; ++k)
      indices.push_back(static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(x.size())));
  } else {
    indices.resize(static_cast<std::size_t>(x.size()));
    for (std::int64_t i = 0; i < x.size(); ++i) indices[static_cast<std::size_t>(i)] = i;
  }

  for (std::int64_t i : indices) {
    const double fd = detail::fd_at(build_loss, x, i, opts.h);
    const double err = detail::rel_err(analytic[static_cast<std::size_t>(i)], fd, opts.floor);
    if (err > opts.tol && detail::fd_unstable(build_loss, x, i, fd, opts)) {
      ++report.excluded;
      continue;
    }
    ++report.checked;
    if (err > report.max_rel_err) {
      report.max_rel_err = err;
      report.worst_index = i;
    }
  }
  detail::finish_report(report, opts);
  return report;
}

/// Directional-derivative probe: every element of x participates through a
/// random +-1 direction, so a wrong backward rule in any element shows up.
inline GradCheckReport check_gradient_directional(const std::string& name,
                                                  const std::function<Tensor()>& build_loss,
                                                  Tensor x, SplitMix64& rng,
                                                  GradCheckOptions opts = {}) {
  GradCheckReport report;
  report.component = name;

  x.zero_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    Tensor loss = build_loss();
    tape.backward(loss);
    analytic.assign(x.grad().begin(), x.grad().end());
  }

  std::vector<double> direction(static_cast<std::size_t>(x.size()));
  for (auto& d : direction) d = rng.next_u64() & 1 ? 1.0 : -1.0;

  double analytic_dir = 0.0;
  for (std::size_t i = 0; i < direction.size(); ++i) analytic_dir += analytic[i] * direction[i];

  auto fd_dir = [&](double h) {
    auto v = x.values_mut();
    std::vector<double> keep(v.begin(), v.end());
    for (std::size_t i = 0; i < direction.size(); ++i) v[i] = keep[i] + h * direction[i];
    const double fp = detail::eval_scalar(build_loss);
    for (std::size_t i = 0; i < direction.size(); ++i) v[i] = keep[i] - h * direction[i];
    const double fm = detail::eval_scalar(build_loss);
    std::copy(keep.begin(), keep.end(), v.begin());
    return (fp - fm) / (2.0 * h);
  };

  const double fd = fd_dir(opts.h);
  double err = detail::rel_err(analytic_dir, fd, opts.floor);
  if (err > opts.tol) {
    const double fd_half = fd_dir(opts.h / 2.0);
    if (detail::rel_err(fd, fd_half, opts.floor) > opts.tol / 2.0) {
      ++report.excluded;
      err = 0.0;
    }
  }
  if (err > 0.0 || report.excluded == 0) {
    ++report.checked;
    report.max_rel_err = err;
    report.worst_index = err > opts.tol ? 0 : -1;
  }
  detail::finish_report(report, opts);
  return report;
}

/// Folds a sub-report into a suite-level report, keeping the worst entry.
inline void merge_reports(GradCheckReport& total, const GradCheckReport& part) {
  total.checked += part.checked;
  total.excluded += part.excluded;
  if (part.max_rel_err > total.max_rel_err) {
    total.max_rel_err = part.max_rel_err;
    total.worst_index = part.worst_index;
  }
  total.ok = total.ok && part.ok;
}

}  // namespace cyclet
