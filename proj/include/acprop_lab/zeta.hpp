#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "acprop_lab/kahan.hpp"

namespace acprop_lab {

namespace detail {

inline void require_zeta_arg(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("zeta argument must be positive");
  if (std::abs(s - 1.0) < 1e-6) throw std::domain_error("zeta argument too close to the pole at 1");
}

}  // namespace detail

/// Dirichlet eta via the Euler transform of the alternating series:
///   eta(s) = sum_n 2^-(n+1) sum_{k<=n} (-1)^k C(n,k) (k+1)^-s.
/// The outer terms shrink roughly like 2^-n.
inline double eta_accelerated(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("eta argument must be positive");
  constexpr int kMaxTerms = 400;
  KahanSum<double> total;
  double scale = 0.5;
  int quiet = 0;
  for (int n = 0; n < kMaxTerms; ++n) {
    KahanSum<double> diff;
    double binom = 1.0;
    for (int k = 0; k <= n; ++k) {
      const double term = binom * std::pow(k + 1.0, -s);
      diff += (k % 2 == 0) ? term : -term;
      binom = binom * (n - k) / (k + 1);
    }
    const double outer = scale * diff.value();
    total += outer;
    scale *= 0.5;
    // Require a few consecutive negligible terms before stopping.
    quiet = std::abs(outer) < 1e-18 ? quiet + 1 : 0;
    if (quiet >= 3) break;
  }
  return total.value();
}

/// Partial alternating sum of `terms` terms, compensated, plus half of the
/// next term. The half-term estimate takes the O(N^-s) truncation error down
/// to O(N^-(s+1)).
inline double eta_direct(double s, std::int64_t terms) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("eta argument must be positive");
  if (terms < 1) throw std::invalid_argument("terms must be >= 1");
  KahanSum<double> total;
  for (std::int64_t k = 1; k <= terms; ++k) {
    const double term = std::pow(static_cast<double>(k), -s);
    total += (k % 2 == 1) ? term : -term;
  }
  const double next = std::pow(static_cast<double>(terms + 1), -s);
  total += ((terms + 1) % 2 == 1 ? next : -next) / 2.0;
  return total.value();
}

/// zeta(s) = eta(s) / (1 - 2^(1-s)).
inline double zeta(double s) {
  detail::require_zeta_arg(s);
  return eta_accelerated(s) / -std::expm1((1.0 - s) * std::log(2.0));
}

/// sum_{k=1}^N k^-s, compensated. Summed from the small end.
inline double harmonic_sum(std::int64_t N, double s) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  KahanSum<double> total;
  for (std::int64_t k = N; k >= 1; --k) total += std::pow(static_cast<double>(k), -s);
  return total.value();
}

/// zeta(s) + N^(1-s)/(1-s) + N^-s / 2.
inline double harmonic_approx(std::int64_t N, double s) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  const double n = static_cast<double>(N);
  return zeta(s) + std::pow(n, 1.0 - s) / (1.0 - s) + std::pow(n, -s) / 2.0;
}

struct HarmonicCheck {
  std::int64_t N = 0;
  double eta = 0.0;
  double exact = 0.0;
  double approx = 0.0;
  double abs_err = 0.0;
  double rel_err() const { return abs_err / std::abs(exact); }
};

inline HarmonicCheck harmonic_sum_check(std::int64_t N, double eta) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  if (!(eta >= 0.5 && eta < 1.0)) throw std::invalid_argument("eta must lie in [0.5, 1)");
  HarmonicCheck c;
  c.N = N;
  c.eta = eta;
  c.exact = harmonic_sum(N, eta);
  c.approx = harmonic_approx(N, eta);
  c.abs_err = std::abs(c.exact - c.approx);
  return c;
}

}  // namespace acprop_lab
