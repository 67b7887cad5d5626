#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acprop_lab/limits.hpp"
#include "acprop_lab/mlp.hpp"
#include "acprop_lab/optimizer.hpp"
#include "acprop_lab/problems.hpp"
#include "acprop_lab/rate.hpp"
#include "acprop_lab/report.hpp"
#include "acprop_lab/svg.hpp"
#include "acprop_lab/sweep.hpp"
#include "acprop_lab/trajectory.hpp"
#include "acprop_lab/zeta.hpp"

namespace acprop_lab {

/// Bad configuration; maps to exit status 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitCompute = 1;
inline constexpr int kExitUsage = 2;

inline const std::vector<std::string>& experiment_commands() {
  static const std::vector<std::string> kCommands = {"sweep", "trajectory", "limits", "rate", "mlp", "harmonic"};
  return kCommands;
}

/// Config keys accepted by each command; flags carry the same names.
inline const std::vector<std::string>& command_keys(const std::string& command) {
  static const std::vector<std::string> kHyper = {"beta1", "beta2", "eps", "eta", "delay_n", "bias_correction",
                                                  "eps_inside_sqrt"};
  auto with_hyper = [](std::vector<std::string> keys) {
    keys.insert(keys.end(), kHyper.begin(), kHyper.end());
    return keys;
  };
  static const std::map<std::string, std::vector<std::string>> kKeys = {
      {"sweep", with_hyper({"problem", "optimizer", "P", "lr", "steps", "tail", "tol", "delta", "stochastic_seeds",
                            "beta2_min", "beta2_max", "beta2_points"})},
      {"trajectory", with_hyper({"problem", "optimizer", "P", "lr", "steps", "stride", "x0", "delta", "sigma", "dims",
                                 "skip_cold_async_step"})},
      {"limits", {"problem", "P", "beta1", "beta2"}},
      {"rate", with_hyper({"optimizer", "lr", "sigma", "dims", "T_max", "T_min", "num_T", "seeds", "x0",
                           "skip_cold_async_step"})},
      {"mlp", with_hyper({"optimizer", "lr", "in_dim", "hidden_dim", "out_dim", "n_samples", "epochs", "batch",
                          "separation"})},
      {"harmonic", {"N", "eta", "zeta_terms"}},
  };
  const auto it = kKeys.find(command);
  if (it == kKeys.end()) throw UsageError("unknown command '" + command + "'");
  return it->second;
}

struct ExperimentConfig {
  std::string command;
  /// Flat key/value parameters; values are JSON scalars, arrays, or
  /// comma-separated strings as they arrive from flags.
  nlohmann::json params = nlohmann::json::object();
  std::filesystem::path output_dir = "results";
  std::uint64_t seed = 0;
  std::size_t workers = 0;
};

namespace detail {

inline std::uint64_t parse_seed(const std::string& s, const char* source) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw UsageError(std::string("invalid seed from ") + source + ": '" + s + "'");
  }
  return v;
}

}  // namespace detail

/// Flag, then config file, then ACPROP_LAB_SEED, then 0.
inline std::uint64_t resolve_seed(const std::optional<std::string>& flag, const nlohmann::json& file,
                                  const char* env_value) {
  if (flag) return detail::parse_seed(*flag, "--seed");
  if (file.contains("seed")) {
    const auto& s = file.at("seed");
    if (s.is_number_unsigned()) return s.get<std::uint64_t>();
    if (s.is_number_integer() && s.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(s.get<std::int64_t>());
    if (s.is_string()) return detail::parse_seed(s.get<std::string>(), "config file");
    throw UsageError("config seed must be a non-negative integer");
  }
  if (env_value != nullptr && *env_value != '\0') return detail::parse_seed(env_value, "ACPROP_LAB_SEED");
  return 0;
}

/// Builds a config from an optional JSON file and flag values (flags win).
/// Reserved file keys: command, seed, output_dir, workers.
inline ExperimentConfig make_config(const std::string& command, const std::optional<std::filesystem::path>& file,
                                    const std::map<std::string, std::string>& flags,
                                    const std::optional<std::string>& seed_flag,
                                    const std::optional<std::string>& output_dir_flag,
                                    const std::optional<std::size_t>& workers_flag,
                                    const char* env_seed = std::getenv("ACPROP_LAB_SEED")) {
  nlohmann::json loaded = nlohmann::json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw UsageError("cannot open config file '" + file->string() + "'");
    try {
      loaded = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!loaded.is_object()) throw UsageError("config file must hold a flat JSON object");
  }
  if (loaded.contains("command") && loaded.at("command") != command) {
    throw UsageError("config file is for command '" + loaded.at("command").dump() + "'");
  }
  ExperimentConfig cfg;
  cfg.command = command;
  const auto& keys = command_keys(command);
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : loaded.items()) {
    if (k == "command" || k == "seed" || k == "output_dir" || k == "workers") continue;
    if (!allowed.count(k)) throw UsageError("unknown config key '" + k + "' for " + command);
    if (v.is_object()) throw UsageError("config key '" + k + "' must be a scalar or a list");
    cfg.params[k] = v;
  }
  for (const auto& [k, v] : flags) {
    if (!allowed.count(k)) throw UsageError("unknown option --" + k + " for " + command);
    cfg.params[k] = v;
  }
  cfg.seed = resolve_seed(seed_flag, loaded, env_seed);
  if (output_dir_flag) {
    cfg.output_dir = *output_dir_flag;
  } else if (loaded.contains("output_dir")) {
    cfg.output_dir = loaded.at("output_dir").get<std::string>();
  }
  if (workers_flag) {
    cfg.workers = *workers_flag;
  } else if (loaded.contains("workers")) {
    cfg.workers = loaded.at("workers").get<std::size_t>();
  }
  return cfg;
}

/// Typed access to flat parameters. Every lookup records the effective value
/// so the resolved config can be echoed into artifacts.
class Params {
 public:
  explicit Params(const nlohmann::json& raw) : raw_(raw) {}

  double real(const std::string& key, double def) { return note(key, scalar<double>(key, def)); }
  std::int64_t integer(const std::string& key, std::int64_t def) {
    return note(key, scalar<std::int64_t>(key, def));
  }
  bool flag(const std::string& key, bool def) {
    if (!raw_.contains(key)) return note(key, def);
    const auto& v = raw_.at(key);
    if (v.is_boolean()) return note(key, v.get<bool>());
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "true" || s == "1") return note(key, true);
      if (s == "false" || s == "0") return note(key, false);
    }
    throw UsageError("'" + key + "' must be true or false");
  }
  std::string text(const std::string& key, const std::string& def) {
    if (!raw_.contains(key)) return note(key, def);
    const auto& v = raw_.at(key);
    if (!v.is_string()) throw UsageError("'" + key + "' must be a string");
    return note(key, v.get<std::string>());
  }
  std::vector<double> reals(const std::string& key, std::vector<double> def) {
    return note(key, list<double>(key, std::move(def)));
  }
  std::vector<std::int64_t> integers(const std::string& key, std::vector<std::int64_t> def) {
    return note(key, list<std::int64_t>(key, std::move(def)));
  }
  std::vector<std::string> texts(const std::string& key, std::vector<std::string> def) {
    if (!raw_.contains(key)) return note(key, def);
    const auto& v = raw_.at(key);
    std::vector<std::string> out;
    if (v.is_string()) {
      for (auto& s : split(v.get<std::string>(), ',')) {
        if (!s.empty()) out.push_back(s);
      }
    } else if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_string()) throw UsageError("'" + key + "' must be a list of strings");
        out.push_back(e.get<std::string>());
      }
    } else {
      throw UsageError("'" + key + "' must be a string list");
    }
    return note(key, out);
  }

  bool has(const std::string& key) const { return raw_.contains(key); }
  /// Echo a derived value into the resolved config.
  void record(const std::string& key, nlohmann::json value) { resolved_[key] = std::move(value); }
  const nlohmann::json& resolved() const { return resolved_; }

 private:
  template <typename T>
  static T convert(const nlohmann::json& v, const std::string& key) {
    if (v.is_number()) {
      if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) {
          const double d = v.get<double>();
          if (d != std::floor(d)) throw UsageError("'" + key + "' must be an integer");
          return static_cast<T>(d);
        }
      }
      return v.get<T>();
    }
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      double d;
      try {
        d = parse_double(s);
      } catch (const std::invalid_argument&) {
        throw UsageError("'" + key + "' must be numeric, got '" + s + "'");
      }
      if constexpr (std::is_integral_v<T>) {
        if (!std::isfinite(d) || d != std::floor(d)) throw UsageError("'" + key + "' must be an integer");
      }
      return static_cast<T>(d);
    }
    throw UsageError("'" + key + "' must be numeric");
  }

  template <typename T>
  T scalar(const std::string& key, T def) const {
    if (!raw_.contains(key)) return def;
    const auto& v = raw_.at(key);
    if (v.is_string() && v.get<std::string>().find(',') != std::string::npos) {
      throw UsageError("'" + key + "' takes a single value");
    }
    if (v.is_array()) throw UsageError("'" + key + "' takes a single value");
    return convert<T>(v, key);
  }

  template <typename T>
  std::vector<T> list(const std::string& key, std::vector<T> def) const {
    if (!raw_.contains(key)) return def;
    const auto& v = raw_.at(key);
    std::vector<T> out;
    if (v.is_array()) {
      for (const auto& e : v) out.push_back(convert<T>(e, key));
    } else if (v.is_string()) {
      for (const auto& s : split(v.get<std::string>(), ',')) {
        if (!s.empty()) out.push_back(convert<T>(nlohmann::json(s), key));
      }
    } else {
      out.push_back(convert<T>(v, key));
    }
    if (out.empty()) throw UsageError("'" + key + "' must not be empty");
    return out;
  }

  template <typename T>
  T note(const std::string& key, T value) {
    resolved_[key] = value;
    return value;
  }

  const nlohmann::json& raw_;
  nlohmann::json resolved_ = nlohmann::json::object();
};

/// Where a run writes, plus the list of files it produced.
struct RunContext {
  std::filesystem::path dir;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::vector<std::string> outputs;

  void write_text(const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + (dir / name).string() + "'");
    outputs.push_back(name);
  }

  /// CSV plus the SVG rendered from that same CSV text.
  void write_artifact(const std::string& stem, const CsvTable& table) {
    const std::string csv = to_csv_string(table);
    write_text(stem + ".csv", csv);
    std::istringstream back(csv);
    write_text(stem + ".svg", svg::render(read_csv(back)));
  }
};

namespace detail {

inline HyperParams read_hyper(Params& p, Variant v, double alpha0_default) {
  HyperParams hp;
  hp.variant = v;
  hp.alpha0 = p.real("lr", alpha0_default);
  hp.beta1 = p.real("beta1", hp.beta1);
  hp.beta2 = p.real("beta2", hp.beta2);
  hp.eps = p.real("eps", hp.eps);
  hp.eta = p.real("eta", hp.eta);
  hp.delay_n = static_cast<int>(p.integer("delay_n", hp.delay_n));
  hp.bias_correction = p.flag("bias_correction", hp.bias_correction);
  hp.eps_inside_sqrt = p.flag("eps_inside_sqrt", hp.eps_inside_sqrt);
  return hp;
}

inline Variant read_variant(const std::string& name) {
  try {
    return parse_variant(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline std::vector<Variant> read_variants(Params& p, std::vector<std::string> def) {
  std::vector<Variant> out;
  for (const auto& n : p.texts("optimizer", std::move(def))) out.push_back(read_variant(n));
  return out;
}

inline ProblemKind read_problem(Params& p, const std::string& def) {
  try {
    return parse_problem_kind(p.text("problem", def));
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

/// Turns precondition failures found while resolving into usage errors.
template <typename F>
auto validated(F&& f) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

template <typename T>
std::vector<int> to_ints(const std::vector<T>& v) {
  return {v.begin(), v.end()};
}

// Each command: resolve and validate everything, then compute.

inline nlohmann::json cmd_sweep(Params& p, RunContext& ctx) {
  struct Plan {
    std::vector<SweepGrid> slices;
  };
  const Plan plan = validated([&] {
    const ProblemKind kind = read_problem(p, "periodic1");
    SweepGrid g = SweepGrid::defaults(kind);
    g.optimizers = read_variants(p, {"acprop", "adashift", "rmsprop", "adam"});
    std::vector<std::int64_t> P_def(g.P_values.begin(), g.P_values.end());
    g.P_values = to_ints(p.integers("P", P_def));
    g.lr_candidates = p.reals("lr", g.lr_candidates);
    g.steps = p.integer("steps", g.steps);
    g.tail = p.integer("tail", g.tail);
    g.tol = p.real("tol", g.tol);
    g.delta = p.real("delta", g.delta);
    g.stochastic_seeds = static_cast<int>(p.integer("stochastic_seeds", g.stochastic_seeds));
    const double lo = p.real("beta2_min", 0.1);
    const double hi = p.real("beta2_max", 0.999);
    const int n = static_cast<int>(p.integer("beta2_points", 20));
    g.beta2_values = p.has("beta2") ? p.reals("beta2", {}) : log_grid(lo, hi, n);
    p.record("beta2", g.beta2_values);
    const std::vector<double> b1_def =
        kind == ProblemKind::kSparse2 ? std::vector<double>{0.85, 0.9, 0.95} : std::vector<double>{0.5, 0.7, 0.9};
    const auto beta1s = p.reals("beta1", b1_def);
    g.base.eps = p.real("eps", g.base.eps);
    g.base.eta = p.real("eta", g.base.eta);
    g.base.delay_n = static_cast<int>(p.integer("delay_n", g.base.delay_n));
    g.base.bias_correction = p.flag("bias_correction", g.base.bias_correction);
    g.base.eps_inside_sqrt = p.flag("eps_inside_sqrt", g.base.eps_inside_sqrt);
    g.seed = ctx.seed;
    Plan out;
    for (double b1 : beta1s) {
      g.beta1 = b1;
      g.validate();
      out.slices.push_back(g);
    }
    return out;
  });

  std::vector<CellVerdict> all;
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& g : plan.slices) {
    auto cells = run_sweep(g, ctx.workers);
    for (Variant v : g.optimizers) {
      std::vector<CellVerdict> mine;
      for (const auto& c : cells) {
        if (c.variant == v) mine.push_back(c);
      }
      nlohmann::json thresholds = nlohmann::json::object();
      for (const auto& bp : boundary_extract(mine)) {
        thresholds[std::to_string(bp.P)] = bp.beta2_star ? nlohmann::json(*bp.beta2_star) : nlohmann::json(nullptr);
      }
      summary.push_back({{"variant", std::string(to_string(v))},
                         {"beta1", g.beta1},
                         {"converged", count_converged(mine)},
                         {"cells", mine.size()},
                         {"beta2_threshold", thresholds}});
    }
    all.insert(all.end(), cells.begin(), cells.end());
  }
  ctx.write_artifact("sweep", sweep_table(all, artifact_meta("sweep", p.resolved(), ctx.seed)));
  return summary;
}

inline nlohmann::json cmd_trajectory(Params& p, RunContext& ctx) {
  struct Plan {
    HyperParams hp;
    ProblemSpec problem;
    std::vector<double> x0;
    std::int64_t steps;
    RunOptions options;
  };
  const Plan plan = validated([&] {
    Plan out;
    const ProblemKind kind = read_problem(p, "periodic1");
    const auto variants = read_variants(p, {"acprop"});
    if (variants.size() != 1) throw UsageError("trajectory takes exactly one optimizer");
    out.hp = read_hyper(p, variants.front(), 1e-2);
    switch (kind) {
      case ProblemKind::kPeriodic1: out.problem = ProblemSpec::periodic1(static_cast<int>(p.integer("P", 3))); break;
      case ProblemKind::kStochastic1:
        out.problem = ProblemSpec::stochastic1(static_cast<int>(p.integer("P", 10)), p.real("delta", 0.1));
        break;
      case ProblemKind::kSparse2: out.problem = ProblemSpec::sparse2(static_cast<int>(p.integer("P", 11))); break;
      case ProblemKind::kAbsValue: out.problem = ProblemSpec::absvalue(p.real("x0", 100.0)); break;
      case ProblemKind::kNoisyQuadratic:
        out.problem = ProblemSpec::noisy_quadratic(static_cast<int>(p.integer("dims", 10)), p.real("sigma", 1.0));
        break;
    }
    out.x0 = out.problem.x0_default;
    if (kind != ProblemKind::kAbsValue && p.has("x0")) {
      const auto xs = p.reals("x0", {});
      if (xs.size() == 1) {
        std::fill(out.x0.begin(), out.x0.end(), xs.front());
      } else {
        out.x0 = xs;
      }
    }
    if (out.x0.size() != out.problem.dim()) throw UsageError("x0 has the wrong dimension");
    out.steps = p.integer("steps", 20000);
    out.options.stride = p.integer("stride", 1);
    out.options.skip_cold_async_step = p.flag("skip_cold_async_step", false);
    out.hp.validate();
    if (out.steps < 1) throw UsageError("steps must be >= 1");
    if (out.options.stride < 1) throw UsageError("stride must be >= 1");
    return out;
  });

  const auto rec = run_trajectory(plan.hp, plan.problem, plan.x0, plan.steps, ctx.seed, plan.options);
  ctx.write_artifact("trajectory", trajectory_table(rec, artifact_meta("trajectory", p.resolved(), ctx.seed)));
  double max_step = 0.0;
  for (const auto& r : rec.rows) max_step = std::max(max_step, r.step_size);
  nlohmann::json summary = {{"final_x", rec.final_state.x},
                             {"final_distance", distance_to_optimum(plan.problem, rec.final_state.x)},
                             {"max_step", max_step},
                             {"rows", rec.rows.size()}};
  if (plan.problem.dim() == 1 && plan.options.stride == 1) {
    const auto c = analyze_crossing(rec, plan.x0[0], plan.problem.x_star[0], 1000);
    summary["first_crossing"] = c.first_cross;
    summary["max_step_before_crossing"] = c.max_step_before;
    summary["max_step_after_crossing"] = c.max_step_after;
  }
  return summary;
}

inline nlohmann::json cmd_limits(Params& p, RunContext& ctx, std::ostream& out) {
  struct Plan {
    ProblemKind kind;
    int P;
    double b1, b2;
  };
  const Plan plan = validated([&] {
    Plan pl;
    pl.kind = read_problem(p, "periodic1");
    if (pl.kind != ProblemKind::kPeriodic1 && pl.kind != ProblemKind::kSparse2) {
      throw UsageError("limits are defined for periodic1 and sparse2");
    }
    pl.P = static_cast<int>(p.integer("P", pl.kind == ProblemKind::kSparse2 ? 11 : 3));
    pl.b1 = p.real("beta1", 0.9);
    pl.b2 = p.real("beta2", 0.9);
    if (pl.kind == ProblemKind::kPeriodic1) {
      limits_problem1(pl.P, pl.b1, pl.b2);
    } else {
      limits_problem2(pl.P, pl.b1, pl.b2);
    }
    return pl;
  });
  const auto rows = plan.kind == ProblemKind::kPeriodic1 ? limit_rows_problem1(plan.P, plan.b1, plan.b2)
                                                         : limit_rows_problem2(plan.P, plan.b1, plan.b2);
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& r : rows) {
    out << r.quantity << " closed_form=" << format_double(r.closed_form) << " simulated=" << format_double(r.simulated)
        << " delta=" << format_double(std::abs(r.closed_form - r.simulated)) << '\n';
    summary[r.quantity] = {{"closed_form", r.closed_form}, {"simulated", r.simulated}};
  }
  if (plan.kind == ProblemKind::kSparse2) {
    const auto t = convergence_ratio_test(limits_problem2(plan.P, plan.b1, plan.b2));
    summary["s_ok"] = t.s_ok;
    summary["v_ok"] = t.v_ok;
  }
  ctx.write_artifact("limits", limits_table(rows, artifact_meta("limits", p.resolved(), ctx.seed)));
  return summary;
}

inline nlohmann::json cmd_rate(Params& p, RunContext& ctx) {
  struct Plan {
    Variant variant;
    HyperParams hp;
    std::vector<double> sigmas;
    int dims, seeds;
    std::int64_t T_max;
    RateOptions opt;
  };
  const Plan plan = validated([&] {
    Plan pl;
    const auto vs = read_variants(p, {"acprop"});
    if (vs.size() != 1) throw UsageError("rate takes exactly one optimizer");
    pl.variant = vs.front();
    const HyperParams d = default_rate_hyperparams();
    pl.hp = d;
    pl.hp.variant = pl.variant;
    pl.hp.alpha0 = p.real("lr", d.alpha0);
    pl.hp.beta1 = p.real("beta1", d.beta1);
    pl.hp.beta2 = p.real("beta2", d.beta2);
    pl.hp.eps = p.real("eps", d.eps);
    pl.hp.eta = p.real("eta", d.eta);
    pl.hp.delay_n = static_cast<int>(p.integer("delay_n", d.delay_n));
    pl.hp.bias_correction = p.flag("bias_correction", d.bias_correction);
    pl.hp.eps_inside_sqrt = p.flag("eps_inside_sqrt", d.eps_inside_sqrt);
    pl.sigmas = p.reals("sigma", {1.0, 0.0});
    pl.dims = static_cast<int>(p.integer("dims", 10));
    pl.T_max = p.integer("T_max", 100000);
    pl.seeds = static_cast<int>(p.integer("seeds", 5));
    pl.opt.x0 = p.real("x0", 0.5);
    pl.opt.T_min = p.integer("T_min", 100);
    pl.opt.num_T = static_cast<int>(p.integer("num_T", 25));
    pl.opt.skip_cold_async_step = p.flag("skip_cold_async_step", true);
    pl.opt.seed = ctx.seed;
    pl.opt.workers = ctx.workers;
    pl.hp.validate();
    if (pl.T_max < 1000) throw UsageError("T_max must be >= 1000");
    if (pl.seeds < 1) throw UsageError("seeds must be >= 1");
    if (pl.dims < 1) throw UsageError("dims must be >= 1");
    if (pl.opt.num_T < 2) throw UsageError("num_T must be >= 2");
    for (double s : pl.sigmas) {
      if (!(s >= 0.0)) throw UsageError("sigma must be non-negative");
    }
    return pl;
  });
  std::vector<RateReport> reports;
  nlohmann::json summary = nlohmann::json::array();
  for (double s : plan.sigmas) {
    reports.push_back(measure_rate(plan.variant, plan.hp, s, plan.dims, plan.T_max, plan.seeds, plan.opt));
    summary.push_back(rate_summary_json(reports.back()));
  }
  ctx.write_artifact("rate", rate_table(reports, artifact_meta("rate", p.resolved(), ctx.seed)));
  nlohmann::json doc = artifact_meta("rate", p.resolved(), ctx.seed);
  doc["reports"] = summary;
  ctx.write_text("rate.json", doc.dump(2) + "\n");
  return summary;
}

inline nlohmann::json cmd_mlp(Params& p, RunContext& ctx) {
  struct Plan {
    MlpConfig cfg;
    std::vector<Variant> variants;
  };
  const Plan plan = validated([&] {
    Plan pl;
    pl.variants = read_variants(p, {"acprop", "adashift", "adam", "adabelief"});
    MlpConfig& c = pl.cfg;
    c.hp = read_hyper(p, Variant::kAcProp, 1e-3);
    c.hp.bias_correction = p.flag("bias_correction", true);
    c.in_dim = static_cast<int>(p.integer("in_dim", c.in_dim));
    c.hidden_dim = static_cast<int>(p.integer("hidden_dim", c.hidden_dim));
    c.out_dim = static_cast<int>(p.integer("out_dim", c.out_dim));
    c.n_samples = static_cast<int>(p.integer("n_samples", c.n_samples));
    c.epochs = static_cast<int>(p.integer("epochs", c.epochs));
    c.batch = static_cast<int>(p.integer("batch", c.batch));
    c.separation = p.real("separation", c.separation);
    c.seed = ctx.seed;
    c.record_gradients = true;
    c.validate();
    return pl;
  });
  std::vector<DenomTrace> traces;
  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json runs = nlohmann::json::array();
  for (Variant v : plan.variants) {
    traces.push_back(train_mlp(plan.cfg, v));
    auto& tr = traces.back();
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(tr.steps_per_epoch), tr.loss.size());
    runs.push_back({{"variant", std::string(to_string(v))},
                    {"diverged", tr.diverged},
                    {"first_epoch_loss", mean_of(std::span(tr.loss).first(n))},
                    {"last_epoch_loss", mean_of(std::span(tr.loss).last(n))}});
    if (v == plan.variants.front()) {
      const auto rp = replay_accumulators(tr.gradients, plan.cfg.hp.beta1, plan.cfg.hp.beta2);
      const std::size_t m = std::min(n, rp.mean_v.size());
      summary["replay"] = {{"source", std::string(to_string(v))},
                           {"first_epoch_mean_v", mean_of(std::span(rp.mean_v).first(m))},
                           {"first_epoch_mean_s", mean_of(std::span(rp.mean_s).first(m))}};
    }
    tr.gradients.clear();
  }
  summary["runs"] = runs;
  ctx.write_artifact("denom", denom_table(traces, artifact_meta("denom", p.resolved(), ctx.seed)));
  return summary;
}

inline nlohmann::json cmd_harmonic(Params& p, RunContext& ctx) {
  struct Plan {
    std::vector<std::int64_t> Ns;
    std::vector<double> etas;
    std::int64_t zeta_terms;
  };
  const Plan plan = validated([&] {
    Plan pl;
    pl.Ns = p.integers("N", {1000, 10000, 100000, 1000000});
    pl.etas = p.reals("eta", {0.5, 0.7, 0.9, 0.99});
    pl.zeta_terms = p.integer("zeta_terms", 10000000);
    for (auto N : pl.Ns) {
      if (N < 1) throw UsageError("N must be >= 1");
    }
    for (double e : pl.etas) {
      if (!(e >= 0.5 && e < 1.0)) throw UsageError("eta must lie in [0.5, 1)");
    }
    if (pl.zeta_terms < 1) throw UsageError("zeta_terms must be >= 1");
    return pl;
  });
  std::vector<HarmonicCheck> checks;
  for (double e : plan.etas) {
    for (auto N : plan.Ns) checks.push_back(harmonic_sum_check(N, e));
  }
  ctx.write_artifact("harmonic", harmonic_table(checks, artifact_meta("harmonic", p.resolved(), ctx.seed)));
  nlohmann::json consistency = nlohmann::json::array();
  for (double e : plan.etas) {
    const double a = eta_accelerated(e);
    const double d = eta_direct(e, plan.zeta_terms);
    consistency.push_back({{"s", e}, {"zeta", zeta(e)}, {"eta_accelerated", a}, {"eta_direct", d},
                           {"abs_diff", std::abs(a - d)}});
  }
  double worst = 0.0;
  for (const auto& c : checks) worst = std::max(worst, c.rel_err());
  return {{"max_rel_err", worst}, {"eta_consistency", consistency}};
}

inline void write_error(std::ostream& err, const char* kind, const std::string& message) {
  err << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace detail

/// Runs one experiment. Writes artifacts under cfg.output_dir plus
/// run_meta.json; returns 0, 1 (compute failure) or 2 (usage error). Errors
/// go to `err` as one JSON object per line.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  RunContext ctx;
  ctx.dir = cfg.output_dir;
  ctx.seed = cfg.seed;
  ctx.workers = cfg.workers;
  Params params(cfg.params);
  nlohmann::json summary;
  try {
    command_keys(cfg.command);
    std::error_code ec;
    std::filesystem::create_directories(ctx.dir, ec);
    if (ec || !std::filesystem::is_directory(ctx.dir)) {
      throw UsageError("output_dir '" + ctx.dir.string() + "' is not writable");
    }
    if (cfg.command == "sweep") {
      summary = detail::cmd_sweep(params, ctx);
    } else if (cfg.command == "trajectory") {
      summary = detail::cmd_trajectory(params, ctx);
    } else if (cfg.command == "limits") {
      summary = detail::cmd_limits(params, ctx, out);
    } else if (cfg.command == "rate") {
      summary = detail::cmd_rate(params, ctx);
    } else if (cfg.command == "mlp") {
      summary = detail::cmd_mlp(params, ctx);
    } else {
      summary = detail::cmd_harmonic(params, ctx);
    }
  } catch (const UsageError& e) {
    detail::write_error(err, "usage", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    detail::write_error(err, "compute", e.what());
    return kExitCompute;
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  nlohmann::json meta = artifact_meta("run_meta", params.resolved(), cfg.seed);
  meta["command"] = cfg.command;
  meta["wall_time_s"] = wall;
  meta["outputs"] = ctx.outputs;
  meta["summary"] = summary;
  try {
    ctx.write_text("run_meta.json", meta.dump(2) + "\n");
  } catch (const std::exception& e) {
    detail::write_error(err, "compute", e.what());
    return kExitCompute;
  }
  out << summary.dump(2) << '\n';
  return kExitOk;
}

/// Re-renders an SVG from a CSV artifact on disk.
inline void render_file(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + csv_path.string() + "'");
  const CsvTable t = read_csv(in);
  std::ofstream o(svg_path, std::ios::binary);
  if (!o) throw std::runtime_error("cannot write '" + svg_path.string() + "'");
  o << svg::render(t);
}

}  // namespace acprop_lab
