// Acceptance checks. Prints one "[PASS]" or "[FAIL]" line per criterion and
// exits non-zero if any selected criterion fails.
//
//   acceptance                 run all criteria
//   acceptance --criterion N   run criterion N only

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "acprop_lab/acprop_lab.hpp"

using namespace acprop_lab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SweepGrid problem1_slice(double beta1, std::vector<Variant> optimizers) {
  SweepGrid g = SweepGrid::defaults(ProblemKind::kPeriodic1);
  g.beta1 = beta1;
  g.optimizers = std::move(optimizers);
  return g;
}

constexpr double kProblem1Beta1[] = {0.5, 0.7, 0.9};

Outcome always_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t total = 0, converged = 0;
  std::string per_slice;
  for (double b1 : kProblem1Beta1) {
    SweepGrid g = problem1_slice(b1, {Variant::kAcProp, Variant::kAdaShift});
    g.base.delay_n = 1;
    const auto cells = run_sweep(g);
    total += cells.size();
    const std::size_t c = count_converged(cells);
    converged += c;
    per_slice += fmt(" beta1=%.1f:%zu/%zu", b1, c, cells.size());
  }
  const double wall = seconds_since(t0);
  return {converged == total && wall < 300.0,
          fmt("acprop+adashift(n=1) converge %zu/%zu cells;%s; %.1fs", converged, total, per_slice.c_str(), wall)};
}

Outcome sync_divergence() {
  bool rms_diverges = false, adam_diverges = false, monotone = true;
  std::string thresholds;
  for (double b1 : kProblem1Beta1) {
    const auto cells = run_sweep(problem1_slice(b1, {Variant::kRmsProp, Variant::kAdam}));
    std::vector<CellVerdict> rms;
    for (const auto& c : cells) {
      if (c.verdict == Verdict::kDiverge) {
        (c.variant == Variant::kRmsProp ? rms_diverges : adam_diverges) = true;
      }
      if (c.variant == Variant::kRmsProp) rms.push_back(c);
    }
    // A P with no converging tail counts as threshold +inf.
    double prev = -std::numeric_limits<double>::infinity();
    thresholds += fmt(" beta1=%.1f[", b1);
    for (const auto& bp : boundary_extract(rms)) {
      const double star = bp.beta2_star.value_or(std::numeric_limits<double>::infinity());
      if (star < prev) monotone = false;
      prev = star;
      thresholds += bp.beta2_star ? fmt(" P%d:%.3f", bp.P, *bp.beta2_star) : fmt(" P%d:none", bp.P);
    }
    thresholds += " ]";
  }
  return {rms_diverges && adam_diverges && monotone,
          fmt("rmsprop diverge cell=%s adam diverge cell=%s rmsprop thresholds non-decreasing=%s;%s",
              rms_diverges ? "yes" : "no", adam_diverges ? "yes" : "no", monotone ? "yes" : "no",
              thresholds.c_str())};
}

Outcome closed_form_limits() {
  Rng rng(20240601);
  double worst1 = 0.0, worst2 = 0.0;
  std::int64_t max_periods = 0;
  bool all_converged = true;
  const int tuples = 25;
  for (int i = 0; i < tuples; ++i) {
    const int P = 3 + static_cast<int>(rng.next_u64() % 18);
    const double b1 = 0.95 * rng.uniform();
    const double b2 = 0.1 + 0.899 * rng.uniform();
    const auto sim = simulate_ema_limits(problem1_period_gradients(P), b1, b2);
    all_converged = all_converged && sim.converged;
    max_periods = std::max(max_periods, sim.periods);
    worst1 = std::max({worst1, std::abs(sim.phase[0].m - limit_m_problem1(P, b1)),
                       std::abs(sim.phase[0].s - limit_S_problem1(P, b1, b2))});

    const int P2 = 4 + static_cast<int>(rng.next_u64() % 30);
    const auto lim = limits_problem2(P2, b1, b2);
    const auto sim2 = simulate_ema_limits(problem2_period_gradients(P2), b1, b2);
    all_converged = all_converged && sim2.converged;
    max_periods = std::max(max_periods, sim2.periods);
    const auto& minus = sim2.phase[static_cast<std::size_t>(P2 - 3)];
    worst2 = std::max({worst2, std::abs(sim2.phase[0].m - lim.m_kP), std::abs(sim2.phase[0].v - lim.v_kP),
                       std::abs(sim2.phase[0].s - lim.s_kP), std::abs(minus.s - lim.s_minus),
                       std::abs(minus.v - lim.v_minus)});
  }
  return {all_converged && worst1 < 1e-8 && worst2 < 1e-6,
          fmt("%d tuples per problem; problem1 max |diff|=%.2e (<1e-8); problem2 max |diff|=%.2e (<1e-6); "
              "max periods=%lld",
              tuples, worst1, worst2, static_cast<long long>(max_periods))};
}

Outcome dominance() {
  std::size_t tuples = 0, sign_violations = 0, gap_points = 0, reverse_points = 0;
  double worst = -std::numeric_limits<double>::infinity();
  std::string worst_at;
  for (double b1 : {0.2, 0.9}) {
    for (int P = 5; P <= 101; ++P) {
      for (double b2 : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99}) {
        const auto t = convergence_ratio_test(limits_problem2(P, b1, b2));
        ++tuples;
        const double diff = t.ratio_s - t.ratio_v;
        if (diff > 0.0) ++sign_violations;
        if (diff > worst) {
          worst = diff;
          worst_at = fmt("P=%d beta1=%.1f beta2=%.2f", P, b1, b2);
        }
        if (t.s_ok && !t.v_ok) ++gap_points;
        if (t.v_ok && !t.s_ok) ++reverse_points;
      }
    }
  }
  return {tuples >= 500 && sign_violations == 0 && gap_points > 0 && reverse_points == 0,
          fmt("%zu tuples; s+/s- - v+/v- > 0 at %zu points (max %.4g at %s); s_ok&!v_ok at %zu; v_ok&!s_ok at %zu",
              tuples, sign_violations, worst, worst_at.c_str(), gap_points, reverse_points)};
}

Outcome problem2_sweep() {
  bool pass = true;
  std::string detail;
  for (double b1 : {0.85, 0.9, 0.95}) {
    SweepGrid g = SweepGrid::defaults(ProblemKind::kSparse2);
    g.beta1 = b1;
    g.optimizers = {Variant::kAcProp, Variant::kAdaShift};
    g.base.delay_n = 1;
    const auto cells = run_sweep(g);
    std::size_t acprop = 0, adashift = 0;
    for (const auto& c : cells) {
      if (c.verdict != Verdict::kConverge) continue;
      ++(c.variant == Variant::kAcProp ? acprop : adashift);
    }
    pass = pass && acprop > adashift;
    detail += fmt("beta1=%.2f acprop=%zu adashift=%zu of %zu; ", b1, acprop, adashift, cells.size() / 2);
  }
  return {pass, detail};
}

Outcome stochastic_counterexample() {
  SweepGrid g = SweepGrid::defaults(ProblemKind::kStochastic1);
  g.delta = 0.1;
  g.stochastic_seeds = 5;
  const auto cell = judge_cell(g, 10, 0.999, Variant::kAcProp);
  return {cell.tail_error < 0.05,
          fmt("P=10 delta=0.1 beta1=0.9 beta2=0.999, 5 seeds: tail-1000 mean |x+1|=%.4g (<0.05) at lr=%g",
              cell.tail_error, cell.best_lr.value_or(std::nan("")))};
}

Outcome harmonic_zeta() {
  double worst_rel = 0.0, worst_eta = 0.0;
  for (double e : {0.5, 0.7, 0.9, 0.99}) {
    for (std::int64_t N : {1000, 10000, 100000, 1000000}) worst_rel = std::max(worst_rel, harmonic_sum_check(N, e).rel_err());
    worst_eta = std::max(worst_eta, std::abs(eta_accelerated(e) - eta_direct(e, 10000000)));
  }
  return {worst_rel < 1e-6 && worst_eta < 1e-9,
          fmt("max harmonic rel err=%.2e (<1e-6); max |eta_accel - eta_direct(1e7)|=%.2e (<1e-9)", worst_rel,
              worst_eta)};
}

Outcome numerical_stability() {
  const ProblemSpec problem = ProblemSpec::absvalue(100.0);
  bool pass = true;
  std::string detail;
  for (double lr : {1e-5, 1e-2}) {
    HyperParams hp;
    hp.alpha0 = lr;
    const auto rec = run_trajectory(hp, problem, problem.x0_default, 100000, 0);
    const auto c = analyze_crossing(rec, 100.0, 0.0, 1000);
    const bool ok = c.all_finite && std::isfinite(rec.final_state.x[0]) && c.first_cross > 0 &&
                    c.max_step_after < c.max_step_before;
    pass = pass && ok;
    detail += fmt("lr=%g: finite=%s first crossing t=%lld max step before=%.4g after(1000)=%.4g; ", lr,
                  c.all_finite ? "yes" : "no", static_cast<long long>(c.first_cross), c.max_step_before,
                  c.max_step_after);
  }
  return {pass, detail};
}

Outcome accumulator_ordering() {
  MlpConfig cfg;
  cfg.record_gradients = true;
  const auto trace = train_mlp(cfg, Variant::kAcProp);
  const auto replay = replay_accumulators(trace.gradients, cfg.hp.beta1, cfg.hp.beta2);
  const auto n = static_cast<std::size_t>(trace.steps_per_epoch);
  const double v_bar = mean_of(std::span(replay.mean_v).first(n));
  const double s_bar = mean_of(std::span(replay.mean_s).first(n));

  const double mu = 3.0, sigma = 1.0, eps = 1e-8;
  const auto st = stationary_accumulator_means(mu, sigma, 0.9, 0.999, 1000000, 10000, 0);
  const auto bound = constants_compare(sigma, mu, eps);
  const double s_denom = std::sqrt(st.mean_s) + eps;
  const double v_denom = std::sqrt(st.mean_v) + eps;
  const double s_rel = std::abs(s_denom - bound.inv_Cl_centered) / bound.inv_Cl_centered;
  const double v_rel = std::abs(v_denom - bound.inv_Cl_uncentered) / bound.inv_Cl_uncentered;
  const bool pass = !trace.diverged && s_bar <= v_bar && s_denom < v_denom && s_rel < 0.1 && v_rel < 0.1;
  return {pass, fmt("replay first epoch s=%.4g <= v=%.4g; N(3,1): sqrt(E s)+eps=%.4f vs %.4f (%.1f%%), "
                    "sqrt(E v)+eps=%.4f vs %.4f (%.1f%%)",
                    s_bar, v_bar, s_denom, bound.inv_Cl_centered, 100 * s_rel, v_denom, bound.inv_Cl_uncentered,
                    100 * v_rel)};
}

/// Trials (out of `trials`) where the step-t denominator ignored g_t.
int independent_trials(Variant v, int trials) {
  Rng rng(1000 + static_cast<std::uint64_t>(v));
  int independent = 0;
  for (int i = 0; i < trials; ++i) {
    HyperParams hp;
    hp.variant = v;
    hp.alpha0 = 0.01;
    hp.beta1 = 0.95 * rng.uniform();
    hp.beta2 = 0.05 + 0.94 * rng.uniform();
    hp.delay_n = 1 + static_cast<int>(rng.next_u64() % 3);
    const std::size_t d = 1 + rng.next_u64() % 4;
    std::vector<double> x0(d);
    for (double& x : x0) x = rng.normal();
    OptimizerState s = OptimizerState::init(x0, hp);
    const int warm = 1 + static_cast<int>(rng.next_u64() % 30);
    std::vector<double> g(d);
    for (int k = 0; k < warm; ++k) {
      for (double& gi : g) gi = 2.0 * rng.normal();
      s = step(std::move(s), g, hp, BoxConstraint::unbounded());
    }
    std::vector<double> g1(d), g2(d);
    for (std::size_t k = 0; k < d; ++k) {
      g1[k] = 2.0 * rng.normal();
      g2[k] = g1[k] + 0.5 + 4.0 * rng.uniform();
    }
    if (peek_denominator(s, g1, hp) == peek_denominator(s, g2, hp)) ++independent;
  }
  return independent;
}

Outcome decorrelation() {
  const int trials = 1000;
  bool pass = true;
  std::string detail;
  for (Variant v : {Variant::kAcProp, Variant::kAdaShift}) {
    const int k = independent_trials(v, trials);
    pass = pass && k == trials;
    detail += fmt("%s independent %d/%d; ", std::string(to_string(v)).c_str(), k, trials);
  }
  for (Variant v : {Variant::kAdam, Variant::kRmsProp, Variant::kAdaBelief}) {
    const int k = independent_trials(v, trials);
    pass = pass && k == 0;
    detail += fmt("%s independent %d/%d; ", std::string(to_string(v)).c_str(), k, trials);
  }
  return {pass, detail};
}

Outcome rate_shape() {
  RateOptions opt;
  const auto rep = measure_rate(Variant::kAcProp, default_rate_hyperparams(), 1.0, 10, 100000, 5, opt);
  return {rep.fitted_slope >= -0.8 && rep.fitted_slope <= -0.3,
          fmt("eta=0.5 noisy quadratic (dims=10 sigma=1 T_max=1e5, 5 seeds): slope=%.4f in [-0.8,-0.3]; "
              "C_l=%.4g C_u=%.4g",
              rep.fitted_slope, rep.C_l_est, rep.C_u_est)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> kAll = {
      {1, "always-convergence on problem 1", always_convergence},
      {2, "sync optimizers diverge on problem 1", sync_divergence},
      {3, "closed-form EMA limits", closed_form_limits},
      {4, "centered ratio dominance on problem 2", dominance},
      {5, "problem 2 sweep: acprop beats adashift", problem2_sweep},
      {6, "stochastic problem 1", stochastic_counterexample},
      {7, "harmonic sum and zeta", harmonic_zeta},
      {8, "numerical stability on |x|", numerical_stability},
      {9, "accumulator ordering", accumulator_ordering},
      {10, "denominator decorrelation", decorrelation},
      {11, "rate shape", rate_shape},
  };
  return kAll;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  if (only != 0 && (only < 1 || only > static_cast<int>(criteria().size()))) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  int failures = 0;
  for (const auto& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] criterion %d: %s -- %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
