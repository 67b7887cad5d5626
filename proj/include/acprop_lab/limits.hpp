#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace acprop_lab {

/// Which mean the centered accumulator subtracts.
///
/// kCurrentMean is (g_t - m_t)^2, the rule the optimizers apply.
/// kPreviousMean is (g_t - m_{t-1})^2, the rule under which the long-form
/// closed expression for lim S_kP holds. Since g_t - m_t = beta1 (g_t - m_{t-1}),
/// the two accumulators differ by exactly a factor beta1^2.
enum class Centering { kCurrentMean, kPreviousMean };

namespace detail {

/// 1 - beta^n without cancellation for beta near 1.
inline double one_minus_pow(double beta, double n) {
  if (beta <= 0.0) return 1.0;
  return -std::expm1(n * std::log(beta));
}

inline void require_period(int P, int min_p) {
  if (P < min_p) throw std::invalid_argument("period P too small");
}

inline void require_open_unit(double beta, const char* name) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument(std::string(name) + " must lie in (0, 1)");
}

inline void require_half_open_unit(double beta, const char* name) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1)");
}

}  // namespace detail

/// Gradients of one period of the periodic problem, at phases 1..P.
inline std::vector<double> problem1_period_gradients(int P) {
  detail::require_period(P, 3);
  std::vector<double> g(static_cast<std::size_t>(P), -1.0);
  g[0] = P;
  return g;
}

inline std::vector<double> problem2_period_gradients(int P) {
  detail::require_period(P, 4);
  std::vector<double> g(static_cast<std::size_t>(P), 0.0);
  g[0] = P / 2.0;
  g[static_cast<std::size_t>(P - 3)] = -1.0;
  return g;
}

/// lim m_kP for the periodic problem:
/// ((P+1) b1^(P-1) - P b1^P - 1) / (1 - b1^P).
inline double limit_m_problem1(int P, double beta1) {
  detail::require_period(P, 3);
  detail::require_half_open_unit(beta1, "beta1");
  const double b_pm1 = std::pow(beta1, P - 1);
  const double b_p = b_pm1 * beta1;
  return ((P + 1) * b_pm1 - P * b_p - 1.0) / detail::one_minus_pow(beta1, P);
}

/// sum_{j=0}^{n-1} r^j, with the removable singularity at r = 1 handled.
inline double geometric_sum(double r, int n) {
  if (r == 1.0) return n;
  if (std::abs(1.0 - r) < 1e-3) {
    double acc = 0.0;
    double term = 1.0;
    for (int j = 0; j < n; ++j) {
      acc += term;
      term *= r;
    }
    return acc;
  }
  return (1.0 - std::pow(r, n)) / (1.0 - r);
}

/// lim S_kP for the periodic problem in closed form.
///
/// With m = lim m_kP the previous-mean limit is
///   (1-b2)/(1-b2^P) [ b2^(P-1) (P-m)^2 + (b1 (P-m) - (P+1))^2 b2^(P-2) G ],
/// G = (1 - (b1^2/b2)^(P-1)) / (1 - b1^2/b2), which degenerates to P-1 when
/// b1^2 = b2. The current-mean limit is b1^2 times that.
inline double limit_S_problem1(int P, double beta1, double beta2, Centering centering = Centering::kCurrentMean) {
  detail::require_period(P, 3);
  detail::require_half_open_unit(beta1, "beta1");
  detail::require_open_unit(beta2, "beta2");
  const double m = limit_m_problem1(P, beta1);
  const double spike = P - m;
  const double after_spike = beta1 * spike - (P + 1.0);
  const double G = geometric_sum(beta1 * beta1 / beta2, P - 1);
  const double bracket =
      std::pow(beta2, P - 1) * spike * spike + after_spike * after_spike * std::pow(beta2, P - 2) * G;
  const double lagged = (1.0 - beta2) / detail::one_minus_pow(beta2, P) * bracket;
  return centering == Centering::kPreviousMean ? lagged : beta1 * beta1 * lagged;
}

struct Problem1Limits {
  int P = 0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double m_inf = 0.0;
  double S_inf = 0.0;
};

inline Problem1Limits limits_problem1(int P, double beta1, double beta2, Centering c = Centering::kCurrentMean) {
  return {P, beta1, beta2, limit_m_problem1(P, beta1), limit_S_problem1(P, beta1, beta2, c)};
}

struct EmaSnapshot {
  double m = 0.0;
  double v = 0.0;
  double s = 0.0;
};

/// Advances (m, v, s) by one gradient.
inline EmaSnapshot ema_advance(const EmaSnapshot& prev, double g, double beta1, double beta2, Centering c) {
  EmaSnapshot next;
  next.m = beta1 * prev.m + (1.0 - beta1) * g;
  next.v = beta2 * prev.v + (1.0 - beta2) * g * g;
  const double innovation = g - (c == Centering::kCurrentMean ? next.m : prev.m);
  next.s = beta2 * prev.s + (1.0 - beta2) * innovation * innovation;
  return next;
}

/// Exact fixed point of the EMA recursions under a P-periodic gradient stream.
///
/// `phase[j]` holds the limit of (m, v, s) at steps kP + j for j = 0..P;
/// phase[P] equals phase[0]. Each phase-0 limit is a finite geometric sum over
/// one period divided by (1 - beta^P).
struct PeriodicEmaLimit {
  std::vector<EmaSnapshot> phase;
};

inline PeriodicEmaLimit periodic_ema_limit(std::span<const double> period_grads, double beta1, double beta2,
                                           Centering c = Centering::kCurrentMean) {
  const int P = static_cast<int>(period_grads.size());
  if (P < 1) throw std::invalid_argument("empty gradient period");
  detail::require_half_open_unit(beta1, "beta1");
  detail::require_half_open_unit(beta2, "beta2");

  double m_acc = 0.0;
  double v_acc = 0.0;
  for (double g : period_grads) {
    m_acc = beta1 * m_acc + (1.0 - beta1) * g;
    v_acc = beta2 * v_acc + (1.0 - beta2) * g * g;
  }
  EmaSnapshot start;
  start.m = m_acc / detail::one_minus_pow(beta1, P);
  start.v = v_acc / detail::one_minus_pow(beta2, P);

  // s needs the in-period means, known once m is at its fixed point.
  EmaSnapshot zero_s = start;
  zero_s.s = 0.0;
  for (double g : period_grads) zero_s = ema_advance(zero_s, g, beta1, beta2, c);
  start.s = zero_s.s / detail::one_minus_pow(beta2, P);

  PeriodicEmaLimit out;
  out.phase.reserve(static_cast<std::size_t>(P) + 1);
  out.phase.push_back(start);
  for (double g : period_grads) out.phase.push_back(ema_advance(out.phase.back(), g, beta1, beta2, c));
  out.phase.back() = start;
  return out;
}

/// Limits for the sparse periodic problem.
///
/// s_plus/v_plus are the accumulators seen by the step with the positive spike
/// (limits at kP); s_minus/v_minus those seen by the step with the negative
/// gradient (limits at kP - 3).
struct Problem2Limits {
  int P = 0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double m_kP = 0.0;
  double v_kP = 0.0;
  double s_kP = 0.0;
  double s_plus = 0.0;
  double s_minus = 0.0;
  double v_plus = 0.0;
  double v_minus = 0.0;
};

inline Problem2Limits limits_problem2(int P, double beta1, double beta2) {
  detail::require_period(P, 4);
  detail::require_half_open_unit(beta1, "beta1");
  detail::require_open_unit(beta2, "beta2");

  Problem2Limits r;
  r.P = P;
  r.beta1 = beta1;
  r.beta2 = beta2;
  r.m_kP = (1.0 - beta1) / detail::one_minus_pow(beta1, P) * (P / 2.0 * std::pow(beta1, P - 1) - beta1 * beta1);
  r.v_kP = (1.0 - beta2) / detail::one_minus_pow(beta2, P) *
           (P * P / 4.0 * std::pow(beta2, P - 1) + beta2 * beta2);

  const auto grads = problem2_period_gradients(P);
  EmaSnapshot cur{r.m_kP, r.v_kP, 0.0};
  for (double g : grads) cur = ema_advance(cur, g, beta1, beta2, Centering::kCurrentMean);
  r.s_kP = cur.s / detail::one_minus_pow(beta2, P);

  // Forward from kP to kP + P - 3, the step before the negative gradient.
  cur = {r.m_kP, r.v_kP, r.s_kP};
  for (int j = 0; j < P - 3; ++j) cur = ema_advance(cur, grads[static_cast<std::size_t>(j)], beta1, beta2,
                                                    Centering::kCurrentMean);
  r.s_plus = r.s_kP;
  r.v_plus = r.v_kP;
  r.s_minus = cur.s;
  r.v_minus = cur.v;
  return r;
}

/// Limits at kP-1, kP-2, kP-3 obtained by inverting the recursions backwards
/// from kP. Divides by beta2 (and beta1) three times, so it loses all accuracy
/// once beta2^3 approaches the size of the values; limits_problem2 evolves
/// forward instead.
struct BacksolvedProblem2 {
  double m_km1 = 0.0, m_km2 = 0.0, m_km3 = 0.0;
  double v_km1 = 0.0, v_km2 = 0.0, v_km3 = 0.0;
  double s_km1 = 0.0, s_km2 = 0.0, s_km3 = 0.0;
};

inline BacksolvedProblem2 backsolve_problem2(const Problem2Limits& r) {
  const double b1 = r.beta1;
  const double b2 = r.beta2;
  if (b1 == 0.0 || b2 == 0.0) throw std::domain_error("back-solve divides by beta1 and beta2");
  BacksolvedProblem2 b;
  b.m_km1 = r.m_kP / b1;
  b.m_km2 = b.m_km1 / b1;
  b.m_km3 = (b.m_km2 + (1.0 - b1)) / b1;
  b.v_km1 = r.v_kP / b2;
  b.v_km2 = b.v_km1 / b2;
  b.v_km3 = (b.v_km2 - (1.0 - b2)) / b2;
  b.s_km1 = (r.s_kP - (1.0 - b2) * r.m_kP * r.m_kP) / b2;
  b.s_km2 = (b.s_km1 - (1.0 - b2) * b.m_km1 * b.m_km1) / b2;
  b.s_km3 = (b.s_km2 - (1.0 - b2) * (b.m_km2 + 1.0) * (b.m_km2 + 1.0)) / b2;
  return b;
}

/// Net progress per period needs P/(2 sqrt(a+)) > 1/sqrt(a-), i.e. a+/a- < P^2/4.
struct RatioTest {
  double ratio_s = 0.0;
  double ratio_v = 0.0;
  bool s_ok = false;
  bool v_ok = false;
};

inline RatioTest convergence_ratio_test(const Problem2Limits& r) {
  const double threshold = r.P * r.P / 4.0;
  const auto ratio = [](double plus, double minus) {
    return minus > 0.0 ? plus / minus : std::numeric_limits<double>::infinity();
  };
  RatioTest t;
  t.ratio_s = ratio(r.s_plus, r.s_minus);
  t.ratio_v = ratio(r.v_plus, r.v_minus);
  t.s_ok = std::isfinite(t.ratio_s) && t.ratio_s < threshold;
  t.v_ok = std::isfinite(t.ratio_v) && t.ratio_v < threshold;
  return t;
}

/// Brute-force oracle: runs the raw EMA recursions from zero until the
/// remaining distance to the limit, estimated from two successive period
/// snapshots, drops below `tol` (or `max_periods` pass), then records one
/// more period.
struct SimulatedEma {
  std::vector<EmaSnapshot> phase;
  std::int64_t periods = 0;
  bool converged = false;
};

inline SimulatedEma simulate_ema_limits(std::span<const double> period_grads, double beta1, double beta2,
                                        Centering c = Centering::kCurrentMean, std::int64_t max_periods = 100000,
                                        double tol = 1e-12) {
  if (period_grads.empty()) throw std::invalid_argument("empty gradient period");
  SimulatedEma out;
  // Per-period contraction is max(beta)^P; the gap to the limit is diff / (1 - that).
  const double gap_scale =
      detail::one_minus_pow(std::max(beta1, beta2), static_cast<double>(period_grads.size()));
  EmaSnapshot cur;
  EmaSnapshot prev_snapshot{std::numeric_limits<double>::infinity(), 0.0, 0.0};
  for (out.periods = 0; out.periods < max_periods;) {
    for (double g : period_grads) cur = ema_advance(cur, g, beta1, beta2, c);
    ++out.periods;
    const double diff = std::max({std::abs(cur.m - prev_snapshot.m), std::abs(cur.v - prev_snapshot.v),
                                  std::abs(cur.s - prev_snapshot.s)});
    prev_snapshot = cur;
    if (diff < tol * gap_scale) {
      out.converged = true;
      break;
    }
  }
  out.phase.push_back(cur);
  for (double g : period_grads) out.phase.push_back(ema_advance(out.phase.back(), g, beta1, beta2, c));
  return out;
}

}  // namespace acprop_lab
