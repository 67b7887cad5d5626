#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "acprop_lab/optimizer.hpp"
#include "acprop_lab/problems.hpp"
#include "acprop_lab/rng.hpp"

namespace acprop_lab {

struct RunOptions {
  /// Keep every stride-th step (plus the last one) in the record.
  std::int64_t stride = 1;
  /// Discard the x update of an async variant's very first step, whose
  /// denominator has seen no gradient yet. Accumulators still update.
  bool skip_cold_async_step = false;
};

/// Drives `steps` optimizer steps on `problem`, calling
/// `observer(const OptimizerState&, const GradSample&, double lr)` after each.
///
/// Deterministic in (hp, problem, x0, steps, seed). Errors from step() propagate.
template <typename Observer>
OptimizerState simulate(const HyperParams& hp, const ProblemSpec& problem, std::span<const double> x0,
                        std::int64_t steps, std::uint64_t seed, Observer&& observer,
                        const RunOptions& options = {}) {
  hp.validate();
  problem.validate();
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (x0.size() != problem.dim()) throw std::invalid_argument("x0 dimension does not match problem");

  Rng rng(seed);
  OptimizerState state = OptimizerState::init(x0, hp);
  for (std::int64_t t = 1; t <= steps; ++t) {
    const GradSample sample = sample_gradient(problem, t, state.x, rng);
    if (options.skip_cold_async_step && t == 1 && is_async(hp.variant)) {
      std::vector<double> x_keep = state.x;
      state = step(std::move(state), sample.g, hp, problem.box);
      state.x = std::move(x_keep);
      std::fill(state.update.begin(), state.update.end(), 0.0);
    } else {
      state = step(std::move(state), sample.g, hp, problem.box);
    }
    observer(static_cast<const OptimizerState&>(state), sample, hp.learning_rate(t));
  }
  return state;
}

struct TrajectoryRow {
  std::int64_t t = 0;
  std::vector<double> x;
  std::vector<double> g;
  std::vector<double> denom;
  double lr = 0.0;
  /// ||x_t - x_{t-1}||
  double step_size = 0.0;
};

struct TrajectoryRecord {
  std::vector<TrajectoryRow> rows;
  OptimizerState final_state;
  std::uint64_t seed = 0;
};

inline double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double e : v) acc += e * e;
  return std::sqrt(acc);
}

inline TrajectoryRecord run_trajectory(const HyperParams& hp, const ProblemSpec& problem,
                                       std::span<const double> x0, std::int64_t steps, std::uint64_t seed,
                                       const RunOptions& options = {}) {
  if (options.stride < 1) throw std::invalid_argument("stride must be >= 1");
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.final_state = simulate(
      hp, problem, x0, steps, seed,
      [&](const OptimizerState& s, const GradSample& sample, double lr) {
        if (s.t % options.stride != 0 && s.t != steps) return;
        rec.rows.push_back({s.t, s.x, sample.g, s.denom, lr, l2_norm(s.update)});
      },
      options);
  return rec;
}

/// Mean distance to the optimum over the last `tail` steps of a run.
inline double tail_mean_distance(const HyperParams& hp, const ProblemSpec& problem, std::span<const double> x0,
                                 std::int64_t steps, std::int64_t tail, std::uint64_t seed) {
  if (tail < 1 || tail > steps) throw std::invalid_argument("tail must lie in [1, steps]");
  double acc = 0.0;
  simulate(hp, problem, x0, steps, seed, [&](const OptimizerState& s, const GradSample&, double) {
    if (s.t > steps - tail) acc += distance_to_optimum(problem, s.x);
  });
  return acc / static_cast<double>(tail);
}

/// Sign-change analysis of a one-dimensional run.
struct CrossingReport {
  /// First t where x_t lies on the other side of x* than x_{t-1}; -1 if never.
  std::int64_t first_cross = -1;
  /// Largest |x_t - x_{t-1}| over steps 1..first_cross.
  double max_step_before = 0.0;
  /// Largest |x_t - x_{t-1}| over the `window` steps after first_cross.
  double max_step_after = 0.0;
  bool all_finite = true;
};

/// Needs a record with stride 1.
inline CrossingReport analyze_crossing(const TrajectoryRecord& rec, double x0, double x_star, std::int64_t window) {
  CrossingReport r;
  double prev = x0 - x_star;
  for (const auto& row : rec.rows) {
    const double cur = row.x[0] - x_star;
    if (!std::isfinite(row.x[0]) || !std::isfinite(row.step_size)) r.all_finite = false;
    if (r.first_cross < 0) {
      r.max_step_before = std::max(r.max_step_before, row.step_size);
      if ((prev > 0.0 && cur <= 0.0) || (prev < 0.0 && cur >= 0.0)) r.first_cross = row.t;
    } else if (row.t <= r.first_cross + window) {
      r.max_step_after = std::max(r.max_step_after, row.step_size);
    }
    prev = cur;
  }
  return r;
}

}  // namespace acprop_lab
