#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace acprop_lab {

enum class Variant { kSgdm, kRmsProp, kAdam, kAmsGrad, kAdaBelief, kAdaShift, kAcProp };

inline constexpr std::array<Variant, 7> kAllVariants = {
    Variant::kSgdm,      Variant::kRmsProp,  Variant::kAdam,  Variant::kAmsGrad,
    Variant::kAdaBelief, Variant::kAdaShift, Variant::kAcProp};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kSgdm: return "sgdm";
    case Variant::kRmsProp: return "rmsprop";
    case Variant::kAdam: return "adam";
    case Variant::kAmsGrad: return "amsgrad";
    case Variant::kAdaBelief: return "adabelief";
    case Variant::kAdaShift: return "adashift";
    case Variant::kAcProp: return "acprop";
  }
  return "unknown";
}

inline Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

/// Async variants never let g_t touch the denominator of step t.
constexpr bool is_async(Variant v) { return v == Variant::kAdaShift || v == Variant::kAcProp; }

/// Centered variants keep an EMA of (g - m)^2 instead of g^2.
constexpr bool is_centered(Variant v) { return v == Variant::kAdaBelief || v == Variant::kAcProp; }

struct HyperParams {
  Variant variant = Variant::kAcProp;
  double alpha0 = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Learning-rate decay exponent: lr_t = alpha0 * t^(-eta), t counted from 1.
  double eta = 0.5;
  /// AdaShift only.
  int delay_n = 1;
  bool bias_correction = false;
  bool eps_inside_sqrt = false;

  void validate() const {
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw std::invalid_argument("alpha0 must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in [0, 1)");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be positive");
    if (!(eta >= 0.5 && eta < 1.0)) throw std::invalid_argument("eta must lie in [0.5, 1)");
    if (delay_n < 1) throw std::invalid_argument("delay_n must be >= 1");
  }

  double learning_rate(std::int64_t t) const {
    return alpha0 * std::pow(static_cast<double>(t), -eta);
  }
};

/// Element-wise box; an empty bound vector means unbounded, a single entry broadcasts.
class BoxConstraint {
 public:
  BoxConstraint() = default;
  BoxConstraint(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    const std::size_t n = std::max(lo_.size(), hi_.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (lower(i) > upper(i)) throw std::invalid_argument("box lower bound exceeds upper bound");
    }
  }

  static BoxConstraint unbounded() { return {}; }
  static BoxConstraint uniform(double lo, double hi) { return BoxConstraint({lo}, {hi}); }

  double lower(std::size_t i) const { return bound(lo_, i, -std::numeric_limits<double>::infinity()); }
  double upper(std::size_t i) const { return bound(hi_, i, std::numeric_limits<double>::infinity()); }

  bool contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < lower(i) || x[i] > upper(i)) return false;
    }
    return true;
  }

  void project(std::span<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower(i), upper(i));
  }

  /// Bounds must broadcast to `dim` coordinates.
  void check_dim(std::size_t dim) const {
    for (const auto* v : {&lo_, &hi_}) {
      if (v->size() > 1 && v->size() != dim) throw std::invalid_argument("box dimension does not match parameter");
    }
  }

  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }

 private:
  static double bound(const std::vector<double>& v, std::size_t i, double fallback) {
    if (v.empty()) return fallback;
    return v.size() == 1 ? v[0] : v[i];
  }

  std::vector<double> lo_;
  std::vector<double> hi_;
};

/// Ring buffer holding the last `capacity` gradient vectors (AdaShift).
class DelayBuffer {
 public:
  DelayBuffer() = default;
  DelayBuffer(std::size_t capacity, std::size_t dim) : capacity_(capacity), dim_(dim), data_(capacity * dim) {}

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return size_ == capacity_; }

  /// Oldest buffered gradient; buffer must be non-empty.
  std::span<const double> oldest() const { return {data_.data() + head_ * dim_, dim_}; }

  /// Drops the oldest entry; buffer must be non-empty.
  void pop_oldest() {
    head_ = (head_ + 1) % capacity_;
    --size_;
  }

  /// Appends g; buffer must not be full.
  void push(std::span<const double> g) {
    const std::size_t slot = (head_ + size_) % capacity_;
    std::copy(g.begin(), g.end(), data_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
    ++size_;
  }

 private:
  std::size_t capacity_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

struct OptimizerState {
  std::vector<double> x;
  std::vector<double> m;
  /// v_t for uncentered variants, s_t for centered ones.
  std::vector<double> second;
  /// AMSGrad running element-wise max of v.
  std::vector<double> second_max;
  DelayBuffer delay;
  /// Denominator applied at the most recent step (1 for SGDM).
  std::vector<double> denom;
  /// x_t - x_{t-1} after projection.
  std::vector<double> update;
  std::int64_t t = 0;
  /// Number of gradients folded into `second`; drives its bias correction.
  std::int64_t second_count = 0;

  std::size_t dim() const { return x.size(); }

  static OptimizerState init(std::span<const double> x0, const HyperParams& hp) {
    OptimizerState s;
    const std::size_t d = x0.size();
    s.x.assign(x0.begin(), x0.end());
    s.m.assign(d, 0.0);
    s.second.assign(d, 0.0);
    s.second_max.assign(d, 0.0);
    s.denom.assign(d, 0.0);
    s.update.assign(d, 0.0);
    if (hp.variant == Variant::kAdaShift) s.delay = DelayBuffer(static_cast<std::size_t>(hp.delay_n), d);
    return s;
  }
};

inline double denominator(double accumulator, const HyperParams& hp) {
  return hp.eps_inside_sqrt ? std::sqrt(accumulator + hp.eps) : std::sqrt(accumulator) + hp.eps;
}

namespace detail {

inline double correction(double beta, std::int64_t count, bool enabled) {
  if (!enabled || count <= 0) return 1.0;
  return 1.0 - std::pow(beta, static_cast<double>(count));
}

}  // namespace detail

/// One optimizer step: consumes the state and returns it advanced by one.
///
/// Every variant updates m_t first. The rest follows the variant's line order;
/// for ACProp the x update divides by s_{t-1} and only afterwards folds
/// (g_t - m_t)^2 into s. AdaShift folds a gradient into v only once it leaves
/// the delay buffer, and leaves x untouched until the buffer holds delay_n
/// gradients.
inline OptimizerState step(OptimizerState state, std::span<const double> g, const HyperParams& hp,
                           const BoxConstraint& box) {
  const std::size_t d = state.dim();
  if (g.size() != d) throw std::invalid_argument("gradient dimension does not match parameter dimension");
  box.check_dim(d);
  for (double gi : g) {
    if (!std::isfinite(gi)) throw std::domain_error("non-finite gradient");
  }

  const std::int64_t t = state.t + 1;
  const double lr = hp.learning_rate(t);
  const double b1 = hp.beta1;
  const double b2 = hp.beta2;
  const double m_corr = detail::correction(b1, t, hp.bias_correction);

  std::copy(state.x.begin(), state.x.end(), state.update.begin());
  for (std::size_t i = 0; i < d; ++i) state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];

  switch (hp.variant) {
    case Variant::kSgdm:
      for (std::size_t i = 0; i < d; ++i) {
        state.denom[i] = 1.0;
        state.x[i] -= lr * state.m[i] / m_corr;
      }
      break;

    case Variant::kRmsProp:
    case Variant::kAdam:
    case Variant::kAmsGrad:
    case Variant::kAdaBelief: {
      const bool centered = hp.variant == Variant::kAdaBelief;
      const double v_corr = detail::correction(b2, t, hp.bias_correction);
      for (std::size_t i = 0; i < d; ++i) {
        const double innovation = centered ? g[i] - state.m[i] : g[i];
        state.second[i] = b2 * state.second[i] + (1.0 - b2) * innovation * innovation;
        double acc = state.second[i];
        if (hp.variant == Variant::kAmsGrad) {
          state.second_max[i] = std::max(state.second_max[i], state.second[i]);
          acc = state.second_max[i];
        }
        state.denom[i] = denominator(acc / v_corr, hp);
        const double numer = hp.variant == Variant::kRmsProp ? g[i] : state.m[i] / m_corr;
        state.x[i] -= lr * numer / state.denom[i];
      }
      state.second_count = t;
      break;
    }

    case Variant::kAdaShift: {
      if (state.delay.capacity() != static_cast<std::size_t>(hp.delay_n)) {
        throw std::invalid_argument("state was not initialised for AdaShift with this delay_n");
      }
      if (state.delay.full()) {
        const auto evicted = state.delay.oldest();
        for (std::size_t i = 0; i < d; ++i) {
          state.second[i] = b2 * state.second[i] + (1.0 - b2) * evicted[i] * evicted[i];
        }
        state.delay.pop_oldest();
        ++state.second_count;
      }
      state.delay.push(g);
      const double v_corr = detail::correction(b2, state.second_count, hp.bias_correction);
      const bool warm = state.delay.full();
      const auto numer = state.delay.oldest();
      for (std::size_t i = 0; i < d; ++i) {
        state.denom[i] = denominator(state.second[i] / v_corr, hp);
        if (warm) state.x[i] -= lr * numer[i] / state.denom[i];
      }
      break;
    }

    case Variant::kAcProp: {
      const double s_corr = detail::correction(b2, state.second_count, hp.bias_correction);
      for (std::size_t i = 0; i < d; ++i) {
        state.denom[i] = denominator(state.second[i] / s_corr, hp);
        state.x[i] -= lr * g[i] / state.denom[i];
        const double innovation = g[i] - state.m[i];
        state.second[i] = b2 * state.second[i] + (1.0 - b2) * innovation * innovation;
      }
      ++state.second_count;
      break;
    }
  }

  box.project(state.x);
  for (std::size_t i = 0; i < d; ++i) state.update[i] = state.x[i] - state.update[i];
  state.t = t;
  return state;
}

/// Denominator that step t+1 would apply if it saw gradient `g`, without
/// committing the step.
inline std::vector<double> peek_denominator(const OptimizerState& state, std::span<const double> g,
                                            const HyperParams& hp) {
  return step(state, g, hp, BoxConstraint::unbounded()).denom;
}

}  // namespace acprop_lab
