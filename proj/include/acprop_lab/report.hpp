#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "acprop_lab/limits.hpp"
#include "acprop_lab/mlp.hpp"
#include "acprop_lab/rate.hpp"
#include "acprop_lab/rng.hpp"
#include "acprop_lab/sweep.hpp"
#include "acprop_lab/trajectory.hpp"
#include "acprop_lab/zeta.hpp"

namespace acprop_lab {

inline constexpr int kSchemaVersion = 1;

/// Shortest text that reads back to the same double; "inf", "-inf", "nan" otherwise.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return {buf, res.ptr};
}

inline std::string format_int(std::int64_t v) { return std::to_string(v); }

inline double parse_double(std::string_view s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  return v;
}

/// A CSV artifact: a '#'-prefixed JSON metadata line, a header, rows of text.
/// No field ever contains a comma, so no quoting is needed.
struct CsvTable {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw std::invalid_argument("CSV has no column '" + std::string(name) + "'");
  }

  bool has_column(std::string_view name) const {
    for (const auto& h : header) {
      if (h == name) return true;
    }
    return false;
  }

  void add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw std::logic_error("CSV row width does not match header");
    rows.push_back(std::move(row));
  }
};

inline void write_csv(std::ostream& os, const CsvTable& t) {
  os << "# " << t.meta.dump() << '\n';
  for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  }
}

inline std::string to_csv_string(const CsvTable& t) {
  std::ostringstream os;
  write_csv(os, t);
  return os.str();
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = std::string_view(line).substr(1);
      t.meta = nlohmann::json::parse(body);
      continue;
    }
    auto fields = split(line, ',');
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != t.header.size()) throw std::runtime_error("ragged CSV row");
      t.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw std::runtime_error("CSV has no header");
  return t;
}

/// Metadata stamped into every artifact.
inline nlohmann::json artifact_meta(std::string_view kind, const nlohmann::json& config, std::uint64_t seed) {
  return {{"artifact", std::string(kind)},
          {"schema_version", kSchemaVersion},
          {"rng", std::string(Rng::kName)},
          {"seed", seed},
          {"config", config}};
}

inline std::string join_values(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += format_double(v[i]);
  }
  return out;
}

// Table builders, one per artifact.

inline CsvTable sweep_table(const std::vector<CellVerdict>& cells, nlohmann::json meta) {
  CsvTable t;
  t.meta = std::move(meta);
  t.header = {"variant", "P", "beta2", "beta1", "best_lr", "tail_error", "verdict"};
  for (const auto& c : cells) {
    t.add_row({std::string(to_string(c.variant)), format_int(c.P), format_double(c.beta2), format_double(c.beta1),
               c.best_lr ? format_double(*c.best_lr) : std::string(), format_double(c.tail_error),
               std::string(to_string(c.verdict))});
  }
  return t;
}

/// Multi-dimensional x, g and denominator are written ';'-joined.
inline CsvTable trajectory_table(const TrajectoryRecord& rec, nlohmann::json meta) {
  CsvTable t;
  t.meta = std::move(meta);
  t.header = {"t", "x", "g", "denominator", "lr", "step"};
  for (const auto& r : rec.rows) {
    t.add_row({format_int(r.t), join_values(r.x), join_values(r.g), join_values(r.denom), format_double(r.lr),
               format_double(r.step_size)});
  }
  return t;
}

/// One row per limit quantity: closed form next to the long-run simulation.
struct LimitRow {
  std::string problem;
  int P = 0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  std::string quantity;
  double closed_form = 0.0;
  double simulated = 0.0;
};

inline std::vector<LimitRow> limit_rows_problem1(int P, double beta1, double beta2) {
  const auto lim = limits_problem1(P, beta1, beta2);
  const auto sim = simulate_ema_limits(problem1_period_gradients(P), beta1, beta2);
  return {{"periodic1", P, beta1, beta2, "m_kP", lim.m_inf, sim.phase[0].m},
          {"periodic1", P, beta1, beta2, "S_kP", lim.S_inf, sim.phase[0].s}};
}

inline std::vector<LimitRow> limit_rows_problem2(int P, double beta1, double beta2) {
  const auto lim = limits_problem2(P, beta1, beta2);
  const auto sim = simulate_ema_limits(problem2_period_gradients(P), beta1, beta2);
  const auto& at_kP = sim.phase[0];
  const auto& at_minus = sim.phase[static_cast<std::size_t>(P - 3)];
  const auto ratio = convergence_ratio_test(lim);
  const std::string name = "sparse2";
  return {{name, P, beta1, beta2, "m_kP", lim.m_kP, at_kP.m},
          {name, P, beta1, beta2, "v_kP", lim.v_kP, at_kP.v},
          {name, P, beta1, beta2, "s_kP", lim.s_kP, at_kP.s},
          {name, P, beta1, beta2, "s_plus", lim.s_plus, at_kP.s},
          {name, P, beta1, beta2, "s_minus", lim.s_minus, at_minus.s},
          {name, P, beta1, beta2, "v_plus", lim.v_plus, at_kP.v},
          {name, P, beta1, beta2, "v_minus", lim.v_minus, at_minus.v},
          {name, P, beta1, beta2, "ratio_s", ratio.ratio_s, at_kP.s / at_minus.s},
          {name, P, beta1, beta2, "ratio_v", ratio.ratio_v, at_kP.v / at_minus.v}};
}

inline CsvTable limits_table(const std::vector<LimitRow>& rows, nlohmann::json meta) {
  CsvTable t;
  t.meta = std::move(meta);
  t.header = {"problem", "P", "beta1", "beta2", "quantity", "closed_form", "simulated", "abs_diff"};
  for (const auto& r : rows) {
    t.add_row({r.problem, format_int(r.P), format_double(r.beta1), format_double(r.beta2), r.quantity,
               format_double(r.closed_form), format_double(r.simulated),
               format_double(std::abs(r.closed_form - r.simulated))});
  }
  return t;
}

inline CsvTable rate_table(const std::vector<RateReport>& reports, nlohmann::json meta) {
  CsvTable t;
  t.meta = std::move(meta);
  t.header = {"variant", "sigma", "T", "mean_grad_sq"};
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.T_values.size(); ++i) {
      t.add_row({std::string(to_string(r.variant)), format_double(r.sigma), format_int(r.T_values[i]),
                 format_double(r.mean_grad_sq[i])});
    }
  }
  return t;
}

inline nlohmann::json rate_summary_json(const RateReport& r) {
  return {{"variant", std::string(to_string(r.variant))},
          {"sigma", r.sigma},
          {"dims", r.dims},
          {"seeds", r.seeds},
          {"fitted_slope", r.fitted_slope},
          {"C_l_est", r.C_l_est},
          {"C_u_est", r.C_u_est},
          {"max_second", r.max_second},
          {"T_values", r.T_values},
          {"mean_grad_sq", r.mean_grad_sq}};
}

inline CsvTable denom_table(const std::vector<DenomTrace>& traces, nlohmann::json meta) {
  CsvTable t;
  t.meta = std::move(meta);
  t.header = {"step", "mean_second", "loss", "variant"};
  for (const auto& tr : traces) {
    for (std::size_t i = 0; i < tr.mean_second.size(); ++i) {
      t.add_row({format_int(static_cast<std::int64_t>(i + 1)), format_double(tr.mean_second[i]),
                 format_double(tr.loss[i]), std::string(to_string(tr.variant))});
    }
  }
  return t;
}

inline CsvTable harmonic_table(const std::vector<HarmonicCheck>& checks, nlohmann::json meta) {
  CsvTable t;
  t.meta = std::move(meta);
  t.header = {"N", "eta", "exact", "approx", "abs_err", "rel_err"};
  for (const auto& c : checks) {
    t.add_row({format_int(c.N), format_double(c.eta), format_double(c.exact), format_double(c.approx),
               format_double(c.abs_err), format_double(c.rel_err())});
  }
  return t;
}

}  // namespace acprop_lab
