#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "acprop_lab/optimizer.hpp"
#include "acprop_lab/problems.hpp"
#include "acprop_lab/rng.hpp"
#include "acprop_lab/trajectory.hpp"

namespace acprop_lab {

/// Least-squares slope of log(y) against log(x).
inline double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs >= 2 matching points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::domain_error("log-log fit needs positive data");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw std::domain_error("slope fit needs distinct x values");
  return sxy / sxx;
}

/// Distinct integers, log-spaced over [lo, hi], hi always included.
inline std::vector<std::int64_t> log_spaced_steps(std::int64_t lo, std::int64_t hi, int n) {
  if (lo < 1 || hi < lo || n < 1) throw std::invalid_argument("bad log-spaced step range");
  std::vector<std::int64_t> out;
  const double a = std::log(static_cast<double>(lo));
  const double b = std::log(static_cast<double>(hi));
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 1.0 : static_cast<double>(i) / (n - 1);
    auto T = static_cast<std::int64_t>(std::exp(a + (b - a) * f));
    T = std::clamp(T, lo, hi);
    if (out.empty() || T > out.back()) out.push_back(T);
  }
  if (out.back() != hi) out.push_back(hi);
  return out;
}

struct RateOptions {
  double x0 = 0.5;
  std::int64_t T_min = 100;
  int num_T = 25;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  bool skip_cold_async_step = true;
};

struct RateReport {
  Variant variant = Variant::kAcProp;
  double sigma = 0.0;
  int dims = 0;
  int seeds = 0;
  std::vector<std::int64_t> T_values;
  /// (1/T) sum_{t<=T} ||grad f(x_t)||^2, averaged over seeds.
  std::vector<double> mean_grad_sq;
  double fitted_slope = 0.0;
  /// Extremes of the diagonal preconditioner 1/denominator over all applied steps.
  double C_l_est = 0.0;
  double C_u_est = 0.0;
  /// Largest accumulator value a denominator was built from.
  double max_second = 0.0;
};

namespace detail {

struct SeedRun {
  std::vector<double> mean_grad_sq;
  double max_denom = 0.0;
  double min_denom = std::numeric_limits<double>::infinity();
};

inline double accumulator_from_denominator(double denom, const HyperParams& hp) {
  if (hp.eps_inside_sqrt) return std::max(0.0, denom * denom - hp.eps);
  const double r = std::max(0.0, denom - hp.eps);
  return r * r;
}

}  // namespace detail

/// Runs `variant` on the noisy quadratic f(x) = ||x||^2/2 from x0 * ones and
/// records the running mean of the true squared gradient norm ||x_t||^2.
inline RateReport measure_rate(Variant variant, HyperParams hp, double sigma, int dims, std::int64_t T_max,
                               int seeds, const RateOptions& opt = {}) {
  hp.variant = variant;
  hp.validate();
  if (T_max < 1000) throw std::invalid_argument("T_max must be >= 1000");
  if (seeds < 1) throw std::invalid_argument("seeds must be >= 1");
  const ProblemSpec problem = ProblemSpec::noisy_quadratic(dims, sigma);
  const std::vector<double> x0(static_cast<std::size_t>(dims), opt.x0);

  RateReport rep;
  rep.variant = variant;
  rep.sigma = sigma;
  rep.dims = dims;
  rep.seeds = seeds;
  rep.T_values = log_spaced_steps(std::min(opt.T_min, T_max), T_max, opt.num_T);

  std::vector<detail::SeedRun> runs(static_cast<std::size_t>(seeds));
  auto run_one = [&](std::size_t k) {
    detail::SeedRun& r = runs[k];
    RunOptions ro;
    ro.skip_cold_async_step = opt.skip_cold_async_step;
    double acc = 0.0;
    std::size_t next_T = 0;
    simulate(
        hp, problem, x0, T_max, derive_seed(opt.seed, k),
        [&](const OptimizerState& s, const GradSample&, double) {
          double sq = 0.0;
          for (double xi : s.x) sq += xi * xi;
          if (!std::isfinite(sq)) throw std::domain_error("trajectory became non-finite");
          acc += sq;
          const bool applied = !(ro.skip_cold_async_step && s.t == 1 && is_async(hp.variant));
          if (applied) {
            for (double d : s.denom) {
              r.max_denom = std::max(r.max_denom, d);
              r.min_denom = std::min(r.min_denom, d);
            }
          }
          if (next_T < rep.T_values.size() && s.t == rep.T_values[next_T]) {
            r.mean_grad_sq.push_back(acc / static_cast<double>(s.t));
            ++next_T;
          }
        },
        ro);
  };

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < runs.size(); k = next++) {
      try {
        run_one(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    const std::size_t n_workers =
        std::min(opt.workers > 0 ? opt.workers : std::max(1u, std::thread::hardware_concurrency()), runs.size());
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  // Aggregate in seed order so the result does not depend on scheduling.
  rep.mean_grad_sq.assign(rep.T_values.size(), 0.0);
  double max_denom = 0.0;
  double min_denom = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < rep.T_values.size(); ++i) rep.mean_grad_sq[i] += r.mean_grad_sq[i] / seeds;
    max_denom = std::max(max_denom, r.max_denom);
    min_denom = std::min(min_denom, r.min_denom);
  }
  std::vector<double> Ts(rep.T_values.begin(), rep.T_values.end());
  rep.fitted_slope = fit_loglog_slope(Ts, rep.mean_grad_sq);
  rep.C_l_est = 1.0 / max_denom;
  rep.C_u_est = 1.0 / min_denom;
  rep.max_second = detail::accumulator_from_denominator(max_denom, hp);
  return rep;
}

/// Defaults used for the rate experiment.
inline HyperParams default_rate_hyperparams() {
  HyperParams hp;
  hp.variant = Variant::kAcProp;
  hp.alpha0 = 0.01;
  hp.beta1 = 0.9;
  hp.beta2 = 0.999;
  hp.eps = 1e-8;
  hp.eta = 0.5;
  hp.bias_correction = true;
  return hp;
}

/// 1/C_l under the stationary approximation: sqrt(mu^2 + sigma^2) + eps for
/// the uncentered accumulator, sqrt(sigma^2) + eps for the centered one.
struct ConstantsComparison {
  double inv_Cl_uncentered = 0.0;
  double inv_Cl_centered = 0.0;
};

inline ConstantsComparison constants_compare(double sigma, double mu, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  return {std::sqrt(mu * mu + sigma * sigma) + eps, std::abs(sigma) + eps};
}

struct StationaryMeans {
  double mean_v = 0.0;
  double mean_s = 0.0;
};

/// Time averages of v and s after `burn_in` steps of i.i.d. N(mu, sigma^2)
/// gradients. E[v] = mu^2 + sigma^2; E[s] is sigma^2 * 2 beta1^2 / (1 + beta1)
/// because m_t itself absorbs part of each draw.
inline StationaryMeans stationary_accumulator_means(double mu, double sigma, double beta1, double beta2,
                                                    std::int64_t steps, std::int64_t burn_in, std::uint64_t seed) {
  if (steps <= burn_in || burn_in < 0) throw std::invalid_argument("steps must exceed burn_in");
  Rng rng(seed);
  double m = 0.0, v = 0.0, s = 0.0;
  double sum_v = 0.0, sum_s = 0.0;
  for (std::int64_t t = 1; t <= steps; ++t) {
    const double g = mu + sigma * rng.normal();
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    s = beta2 * s + (1.0 - beta2) * (g - m) * (g - m);
    if (t > burn_in) {
      sum_v += v;
      sum_s += s;
    }
  }
  const double n = static_cast<double>(steps - burn_in);
  return {sum_v / n, sum_s / n};
}

inline double expected_stationary_s(double sigma, double beta1) {
  return sigma * sigma * 2.0 * beta1 * beta1 / (1.0 + beta1);
}

}  // namespace acprop_lab
