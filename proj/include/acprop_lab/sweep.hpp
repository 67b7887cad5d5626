#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "acprop_lab/optimizer.hpp"
#include "acprop_lab/problems.hpp"
#include "acprop_lab/rng.hpp"
#include "acprop_lab/trajectory.hpp"

namespace acprop_lab {

/// n points log-spaced from lo to hi inclusive (lo, hi > 0).
inline std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0 && hi >= lo)) throw std::invalid_argument("log_grid needs 0 < lo <= hi");
  if (n < 1) throw std::invalid_argument("log_grid needs n >= 1");
  if (n == 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(n));
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

enum class Verdict { kConverge, kDiverge };

inline std::string_view to_string(Verdict v) { return v == Verdict::kConverge ? "converge" : "diverge"; }

struct SweepGrid {
  ProblemKind problem = ProblemKind::kPeriodic1;
  std::vector<int> P_values = {3, 5, 7, 9, 11};
  std::vector<double> beta2_values = log_grid(0.1, 0.999, 20);
  double beta1 = 0.9;
  std::vector<double> lr_candidates = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::int64_t steps = 10000;
  std::int64_t tail = 1000;
  double tol = 0.01;
  std::vector<Variant> optimizers = {Variant::kAcProp};
  std::uint64_t seed = 0;
  /// Stochastic problem only.
  double delta = 0.1;
  int stochastic_seeds = 5;
  /// Everything except variant, alpha0, beta1 and beta2 is taken from here.
  HyperParams base;

  /// Defaults for a problem kind; the sparse problem needs P > 3.
  static SweepGrid defaults(ProblemKind kind) {
    SweepGrid g;
    g.problem = kind;
    if (kind == ProblemKind::kSparse2) g.P_values = {5, 7, 9, 11, 13, 15, 17, 19, 21};
    return g;
  }

  void validate() const {
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (!(tail >= 1 && tail < steps)) throw std::invalid_argument("tail must lie in [1, steps)");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (lr_candidates.empty()) throw std::invalid_argument("lr_candidates must be non-empty");
    if (stochastic_seeds < 1) throw std::invalid_argument("stochastic_seeds must be >= 1");
    if (problem != ProblemKind::kPeriodic1 && problem != ProblemKind::kStochastic1 &&
        problem != ProblemKind::kSparse2) {
      throw std::invalid_argument("sweeps run on the periodic, stochastic and sparse problems only");
    }
    for (int P : P_values) make_problem(P).validate();
    for (double b2 : beta2_values) hyper(Variant::kAcProp, 1.0, b2).validate();
    for (double lr : lr_candidates) hyper(Variant::kAcProp, lr, 0.5).validate();
  }

  ProblemSpec make_problem(int P) const {
    switch (problem) {
      case ProblemKind::kStochastic1: return ProblemSpec::stochastic1(P, delta);
      case ProblemKind::kSparse2: return ProblemSpec::sparse2(P);
      default: return ProblemSpec::periodic1(P);
    }
  }

  HyperParams hyper(Variant v, double lr, double beta2) const {
    HyperParams hp = base;
    hp.variant = v;
    hp.alpha0 = lr;
    hp.beta1 = beta1;
    hp.beta2 = beta2;
    return hp;
  }
};

struct CellVerdict {
  Variant variant = Variant::kAcProp;
  int P = 0;
  double beta2 = 0.0;
  double beta1 = 0.0;
  /// Absent when every candidate diverged numerically.
  std::optional<double> best_lr;
  /// Smallest tail-mean distance across lr candidates; +inf if none finished.
  double tail_error = std::numeric_limits<double>::infinity();
  Verdict verdict = Verdict::kDiverge;
};

namespace detail {

/// Tail-mean distance for one lr, averaged over seeds for stochastic cells.
/// Any numerical failure maps to +inf.
inline double cell_tail_error(const SweepGrid& grid, const ProblemSpec& problem, const HyperParams& hp) {
  const int runs = problem.kind == ProblemKind::kStochastic1 ? grid.stochastic_seeds : 1;
  double acc = 0.0;
  for (int k = 0; k < runs; ++k) {
    double e;
    try {
      e = tail_mean_distance(hp, problem, problem.x0_default, grid.steps, grid.tail,
                             derive_seed(grid.seed, static_cast<std::uint64_t>(k)));
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
    acc += e;
  }
  return acc / runs;
}

}  // namespace detail

/// Runs every lr candidate on one (variant, P, beta2) cell and keeps the best.
inline CellVerdict judge_cell(const SweepGrid& grid, int P, double beta2, Variant variant) {
  const ProblemSpec problem = grid.make_problem(P);
  CellVerdict cell;
  cell.variant = variant;
  cell.P = P;
  cell.beta2 = beta2;
  cell.beta1 = grid.beta1;
  for (double lr : grid.lr_candidates) {
    const double e = detail::cell_tail_error(grid, problem, grid.hyper(variant, lr, beta2));
    if (e < cell.tail_error) {
      cell.tail_error = e;
      cell.best_lr = lr;
    }
  }
  cell.verdict = cell.tail_error < grid.tol ? Verdict::kConverge : Verdict::kDiverge;
  return cell;
}

inline std::size_t resolve_workers(std::size_t workers) {
  if (workers > 0) return workers;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Judges every cell. Output order is (variant as listed, P as listed,
/// beta2 as listed) whatever the worker count.
inline std::vector<CellVerdict> run_sweep(const SweepGrid& grid, std::size_t workers = 0) {
  grid.validate();
  struct Task {
    Variant variant;
    int P;
    double beta2;
  };
  std::vector<Task> tasks;
  for (Variant v : grid.optimizers) {
    for (int P : grid.P_values) {
      for (double b2 : grid.beta2_values) tasks.push_back({v, P, b2});
    }
  }
  std::vector<CellVerdict> out(tasks.size());
  if (tasks.empty()) return out;

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        out[i] = judge_cell(grid, tasks[i].P, tasks[i].beta2, tasks[i].variant);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(resolve_workers(workers), tasks.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

struct BoundaryPoint {
  Variant variant = Variant::kAcProp;
  int P = 0;
  /// Smallest grid beta2 at and above which every cell converges.
  std::optional<double> beta2_star;
};

/// Per (variant, P) convergence threshold in beta2, ordered by variant then P.
inline std::vector<BoundaryPoint> boundary_extract(const std::vector<CellVerdict>& verdicts) {
  std::map<std::pair<Variant, int>, std::vector<const CellVerdict*>> rows;
  for (const auto& c : verdicts) rows[{c.variant, c.P}].push_back(&c);
  std::vector<BoundaryPoint> out;
  for (auto& [key, cells] : rows) {
    std::sort(cells.begin(), cells.end(), [](const auto* a, const auto* b) { return a->beta2 < b->beta2; });
    BoundaryPoint bp{key.first, key.second, std::nullopt};
    for (auto it = cells.rbegin(); it != cells.rend() && (*it)->verdict == Verdict::kConverge; ++it) {
      bp.beta2_star = (*it)->beta2;
    }
    out.push_back(bp);
  }
  return out;
}

inline std::size_t count_converged(const std::vector<CellVerdict>& verdicts) {
  return static_cast<std::size_t>(std::count_if(verdicts.begin(), verdicts.end(),
                                                [](const CellVerdict& c) { return c.verdict == Verdict::kConverge; }));
}

}  // namespace acprop_lab
