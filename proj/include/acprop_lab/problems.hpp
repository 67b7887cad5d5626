#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "acprop_lab/optimizer.hpp"
#include "acprop_lab/rng.hpp"

namespace acprop_lab {

enum class ProblemKind { kPeriodic1, kStochastic1, kSparse2, kAbsValue, kNoisyQuadratic };

inline std::string_view to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::kPeriodic1: return "periodic1";
    case ProblemKind::kStochastic1: return "stochastic1";
    case ProblemKind::kSparse2: return "sparse2";
    case ProblemKind::kAbsValue: return "absvalue";
    case ProblemKind::kNoisyQuadratic: return "noisy_quadratic";
  }
  return "unknown";
}

inline ProblemKind parse_problem_kind(std::string_view name) {
  for (auto k : {ProblemKind::kPeriodic1, ProblemKind::kStochastic1, ProblemKind::kSparse2,
                 ProblemKind::kAbsValue, ProblemKind::kNoisyQuadratic}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown problem '" + std::string(name) + "'");
}

// Gradient oracles. The piecewise-linear problems have gradients that do not
// depend on x; the x argument is kept so every oracle has the same shape.
// Step indices start at 1, so "t mod P == 1" is the first step of a period.

/// f_t(x) = P x if t mod P == 1, else -x; box [-1, 1], optimum -1.
inline double grad_periodic1(std::int64_t t, double /*x*/, int P) {
  if (P < 3) throw std::invalid_argument("periodic problem requires P >= 3");
  if (t < 1) throw std::invalid_argument("step index must be >= 1");
  return t % P == 1 ? static_cast<double>(P) : -1.0;
}

/// P with probability (1 + delta)/(P + 1), else -1; expectation delta.
inline double grad_stochastic1(double /*x*/, int P, double delta, Rng& rng) {
  if (P < 3) throw std::invalid_argument("stochastic problem requires P >= 3");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  const double p = (1.0 + delta) / (P + 1.0);
  return rng.bernoulli(p) ? static_cast<double>(P) : -1.0;
}

/// P/2 if t mod P == 1, -1 if t mod P == P - 2, else 0; box [0, 1], optimum 0.
inline double grad_sparse2(std::int64_t t, double /*x*/, int P) {
  if (P <= 3) throw std::invalid_argument("sparse problem requires P > 3");
  if (t < 1) throw std::invalid_argument("step index must be >= 1");
  const std::int64_t r = t % P;
  if (r == 1) return P / 2.0;
  if (r == P - 2) return -1.0;
  return 0.0;
}

/// Subgradient of |x|, choosing 0 at the kink.
inline double grad_absvalue(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Unbiased noisy gradient of f(x) = ||x||^2 / 2.
inline std::vector<double> grad_noisy_quadratic(std::span<const double> x, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  std::vector<double> g(x.begin(), x.end());
  if (sigma > 0.0) {
    for (double& gi : g) gi += sigma * rng.normal();
  }
  return g;
}

struct GradSample {
  std::vector<double> g;
  std::int64_t t = 0;
  double f_value = 0.0;
};

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kPeriodic1;
  int P = 3;
  double delta = 0.1;
  double noise_sigma = 0.0;
  int dims = 1;
  BoxConstraint box;
  std::vector<double> x_star;
  std::vector<double> x0_default;

  static ProblemSpec periodic1(int P) {
    ProblemSpec p;
    p.kind = ProblemKind::kPeriodic1;
    p.P = P;
    p.box = BoxConstraint::uniform(-1.0, 1.0);
    p.x_star = {-1.0};
    p.x0_default = {0.0};
    p.validate();
    return p;
  }

  static ProblemSpec stochastic1(int P, double delta) {
    ProblemSpec p = periodic1(P);
    p.kind = ProblemKind::kStochastic1;
    p.delta = delta;
    p.validate();
    return p;
  }

  static ProblemSpec sparse2(int P) {
    ProblemSpec p;
    p.kind = ProblemKind::kSparse2;
    p.P = P;
    p.box = BoxConstraint::uniform(0.0, 1.0);
    p.x_star = {0.0};
    p.x0_default = {0.5};
    p.validate();
    return p;
  }

  static ProblemSpec absvalue(double x0 = 100.0) {
    ProblemSpec p;
    p.kind = ProblemKind::kAbsValue;
    p.x_star = {0.0};
    p.x0_default = {x0};
    return p;
  }

  static ProblemSpec noisy_quadratic(int dims, double sigma) {
    ProblemSpec p;
    p.kind = ProblemKind::kNoisyQuadratic;
    p.dims = dims;
    p.noise_sigma = sigma;
    p.x_star.assign(static_cast<std::size_t>(dims), 0.0);
    p.x0_default.assign(static_cast<std::size_t>(dims), 0.5);
    p.validate();
    return p;
  }

  std::size_t dim() const { return x_star.size(); }

  void validate() const {
    switch (kind) {
      case ProblemKind::kPeriodic1:
      case ProblemKind::kStochastic1:
        if (P < 3) throw std::invalid_argument("periodic problems require P >= 3");
        break;
      case ProblemKind::kSparse2:
        if (P <= 3) throw std::invalid_argument("sparse problem requires P > 3");
        break;
      default: break;
    }
    if (kind == ProblemKind::kStochastic1 && !(delta > 0.0 && delta < 1.0)) {
      throw std::invalid_argument("delta must lie in (0, 1)");
    }
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
    if (dims < 1) throw std::invalid_argument("dims must be >= 1");
    if (x_star.empty()) throw std::invalid_argument("x_star must be set");
    if (x0_default.size() != x_star.size()) throw std::invalid_argument("x0_default dimension mismatch");
    box.check_dim(x_star.size());
    if (!box.contains(x_star)) throw std::invalid_argument("x_star lies outside the box");
  }
};

/// Gradient and loss of the problem at step t (t >= 1) and point x.
inline GradSample sample_gradient(const ProblemSpec& p, std::int64_t t, std::span<const double> x, Rng& rng) {
  GradSample s;
  s.t = t;
  switch (p.kind) {
    case ProblemKind::kPeriodic1: {
      const double g = grad_periodic1(t, x[0], p.P);
      s.g = {g};
      s.f_value = g * x[0];
      break;
    }
    case ProblemKind::kStochastic1: {
      const double g = grad_stochastic1(x[0], p.P, p.delta, rng);
      s.g = {g};
      s.f_value = g * x[0];
      break;
    }
    case ProblemKind::kSparse2: {
      const double g = grad_sparse2(t, x[0], p.P);
      s.g = {g};
      s.f_value = g * x[0];
      break;
    }
    case ProblemKind::kAbsValue:
      s.g = {grad_absvalue(x[0])};
      s.f_value = std::abs(x[0]);
      break;
    case ProblemKind::kNoisyQuadratic: {
      s.g = grad_noisy_quadratic(x, p.noise_sigma, rng);
      double f = 0.0;
      for (double xi : x) f += 0.5 * xi * xi;
      s.f_value = f;
      break;
    }
  }
  return s;
}

/// Euclidean distance to the known optimum.
inline double distance_to_optimum(const ProblemSpec& p, std::span<const double> x) {
  if (x.size() == 1) return std::abs(x[0] - p.x_star[0]);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - p.x_star[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// JSON form: {"kind", "P", "delta", "noise_sigma", "dims", "box": {"lo", "hi"},
// "x_star", "x0_default"}. Infinite bounds are written as null.

namespace detail {

inline nlohmann::json bounds_to_json(const std::vector<double>& v) {
  auto arr = nlohmann::json::array();
  for (double b : v) {
    if (std::isfinite(b)) {
      arr.push_back(b);
    } else {
      arr.push_back(nullptr);
    }
  }
  return arr;
}

inline std::vector<double> bounds_from_json(const nlohmann::json& j, double infinite) {
  std::vector<double> v;
  for (const auto& e : j) v.push_back(e.is_null() ? infinite : e.get<double>());
  return v;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const ProblemSpec& p) {
  j = nlohmann::json{{"kind", std::string(to_string(p.kind))},
                     {"P", p.P},
                     {"delta", p.delta},
                     {"noise_sigma", p.noise_sigma},
                     {"dims", p.dims},
                     {"box", {{"lo", detail::bounds_to_json(p.box.lo())}, {"hi", detail::bounds_to_json(p.box.hi())}}},
                     {"x_star", p.x_star},
                     {"x0_default", p.x0_default}};
}

inline void from_json(const nlohmann::json& j, ProblemSpec& p) {
  p.kind = parse_problem_kind(j.at("kind").get<std::string>());
  p.P = j.value("P", 3);
  p.delta = j.value("delta", 0.1);
  p.noise_sigma = j.value("noise_sigma", 0.0);
  p.dims = j.value("dims", 1);
  if (j.contains("box")) {
    const auto& b = j.at("box");
    p.box = BoxConstraint(detail::bounds_from_json(b.value("lo", nlohmann::json::array()),
                                                   -std::numeric_limits<double>::infinity()),
                          detail::bounds_from_json(b.value("hi", nlohmann::json::array()),
                                                   std::numeric_limits<double>::infinity()));
  } else {
    p.box = BoxConstraint::unbounded();
  }
  p.x_star = j.at("x_star").get<std::vector<double>>();
  p.x0_default = j.at("x0_default").get<std::vector<double>>();
  p.validate();
}

}  // namespace acprop_lab
