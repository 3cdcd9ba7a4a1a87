// Copyright 2026 The NeRG Authors
// SPDX-License-Identifier: Apache-2.0
//
// Saliency losses between ground-truth densities y and predictions yhat:
// Kullback-Leibler divergence, linear correlation coefficient and mean
// absolute error, plus their analytic gradients with respect to yhat.
//
// KLD compares the sample-normalized distributions p = y / sum(y) and
// q = max(yhat, eps) / sum(max(yhat, eps)); entries with y <= eps add
// nothing (0 log 0 := 0). CC is zero when either input has standard
// deviation below 1e-12. The training objective is KLD + MAE + (1 - CC).
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "nerg/error.hpp"

namespace nerg {

inline constexpr double kKldEpsilon = 1e-8;
inline constexpr double kCcDegenerateStd = 1e-12;

struct LossTerms {
  double kld = 0.0;
  double cc = 0.0;
  double mae = 0.0;
  double total = 0.0;
};

namespace detail {

inline void check_lengths(std::span<const double> y, std::span<const double> yhat, std::size_t min_len) {
  if (y.size() != yhat.size()) throw DomainError("loss inputs differ in length");
  if (y.size() < min_len) throw DomainError("loss inputs are too short");
}

/// Writes d(KLD)/d(yhat) into grad (accumulating) when grad is non-empty.
inline double kld_impl(std::span<const double> y, std::span<const double> yhat, std::span<double> grad, double scale) {
  double y_sum = 0.0;
  double q_sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    y_sum += y[i];
    q_sum += std::max(yhat[i], kKldEpsilon);
  }
  if (!(y_sum > 0.0)) return 0.0;
  double kld = 0.0;
  double p_active = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] <= kKldEpsilon) continue;
    const double p = y[i] / y_sum;
    const double q = std::max(yhat[i], kKldEpsilon) / q_sum;
    kld += p * std::log(p / q);
    p_active += p;
  }
  if (!grad.empty()) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (yhat[i] <= kKldEpsilon) continue;  // clamped: flat
      double g = p_active / q_sum;
      if (y[i] > kKldEpsilon) g -= (y[i] / y_sum) / yhat[i];
      grad[i] += scale * g;
    }
  }
  return kld;
}

inline double cc_impl(std::span<const double> y, std::span<const double> yhat, std::span<double> grad, double scale) {
  const double n = static_cast<double>(y.size());
  double my = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    my += y[i];
    mh += yhat[i];
  }
  my /= n;
  mh /= n;
  double syy = 0.0, shh = 0.0, syh = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = y[i] - my, b = yhat[i] - mh;
    syy += a * a;
    shh += b * b;
    syh += a * b;
  }
  if (std::sqrt(syy / n) < kCcDegenerateStd || std::sqrt(shh / n) < kCcDegenerateStd) return 0.0;
  const double denom = std::sqrt(syy * shh);
  const double cc = std::clamp(syh / denom, -1.0, 1.0);
  if (!grad.empty()) {
    // Centering terms vanish because deviations sum to zero.
    for (std::size_t i = 0; i < y.size(); ++i)
      grad[i] += scale * ((y[i] - my) / denom - (syh / denom) * (yhat[i] - mh) / shh);
  }
  return cc;
}

inline double mae_impl(std::span<const double> y, std::span<const double> yhat, std::span<double> grad, double scale) {
  const double n = static_cast<double>(y.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = yhat[i] - y[i];
    acc += std::abs(d);
    if (!grad.empty() && d != 0.0) grad[i] += scale * (d > 0.0 ? 1.0 : -1.0) / n;
  }
  return acc / n;
}

}  // namespace detail

inline double loss_kld(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat, 1);
  return detail::kld_impl(y, yhat, {}, 0.0);
}

inline double loss_cc(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat, 2);
  return detail::cc_impl(y, yhat, {}, 0.0);
}

inline double loss_mae(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat, 1);
  return detail::mae_impl(y, yhat, {}, 0.0);
}

/// All three metrics and their combination. Single-element inputs score
/// CC as degenerate (0).
inline LossTerms loss_terms(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat, 1);
  LossTerms t;
  t.kld = detail::kld_impl(y, yhat, {}, 0.0);
  t.cc = y.size() >= 2 ? detail::cc_impl(y, yhat, {}, 0.0) : 0.0;
  t.mae = detail::mae_impl(y, yhat, {}, 0.0);
  t.total = t.kld + t.mae + (1.0 - t.cc);
  return t;
}

inline double total_loss(std::span<const double> y, std::span<const double> yhat) { return loss_terms(y, yhat).total; }

/// loss_terms plus d(total)/d(yhat), written to `grad` (overwritten).
inline LossTerms loss_terms_with_gradient(std::span<const double> y, std::span<const double> yhat, std::span<double> grad) {
  detail::check_lengths(y, yhat, 1);
  if (grad.size() != y.size()) throw DomainError("gradient buffer has the wrong length");
  std::fill(grad.begin(), grad.end(), 0.0);
  LossTerms t;
  t.kld = detail::kld_impl(y, yhat, grad, 1.0);
  t.cc = y.size() >= 2 ? detail::cc_impl(y, yhat, grad, -1.0) : 0.0;
  t.mae = detail::mae_impl(y, yhat, grad, 1.0);
  t.total = t.kld + t.mae + (1.0 - t.cc);
  return t;
}

}  // namespace nerg
