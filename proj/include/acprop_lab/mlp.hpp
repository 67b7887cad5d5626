#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "acprop_lab/optimizer.hpp"
#include "acprop_lab/rng.hpp"

namespace acprop_lab {

struct MlpConfig {
  int in_dim = 20;
  int hidden_dim = 32;
  int out_dim = 2;
  int n_samples = 2000;
  int epochs = 5;
  int batch = 50;
  std::uint64_t seed = 0;
  /// Distance scale between class centres.
  double separation = 2.0;
  HyperParams hp = [] {
    HyperParams h;
    h.alpha0 = 1e-3;
    h.bias_correction = true;
    return h;
  }();
  bool skip_cold_async_step = true;
  bool record_gradients = false;

  void validate() const {
    if (in_dim < 1 || hidden_dim < 1 || out_dim < 2) throw std::invalid_argument("MLP dimensions too small");
    if (n_samples < 1 || epochs < 1) throw std::invalid_argument("n_samples and epochs must be >= 1");
    if (batch < 1 || batch > n_samples) throw std::invalid_argument("batch must lie in [1, n_samples]");
    if (!(separation >= 0.0)) throw std::invalid_argument("separation must be non-negative");
    hp.validate();
  }
};

/// Row-major features with integer labels.
struct Dataset {
  int dim = 0;
  int classes = 0;
  std::vector<double> X;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return {X.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

/// Balanced Gaussian mixture: class centres ~ N(0, separation^2 / dim) per
/// coordinate, unit isotropic noise around them.
inline Dataset make_gaussian_mixture(int dim, int classes, int n, double separation, std::uint64_t seed) {
  Rng rng(seed);
  const double centre_scale = separation / std::sqrt(static_cast<double>(dim));
  std::vector<double> centres(static_cast<std::size_t>(classes * dim));
  for (double& c : centres) c = centre_scale * rng.normal();
  Dataset d;
  d.dim = dim;
  d.classes = classes;
  d.X.resize(static_cast<std::size_t>(n) * dim);
  d.y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;
    d.y[static_cast<std::size_t>(i)] = c;
    for (int j = 0; j < dim; ++j) {
      d.X[static_cast<std::size_t>(i) * dim + j] = centres[static_cast<std::size_t>(c * dim + j)] + rng.normal();
    }
  }
  return d;
}

/// in -> ReLU(hidden) -> softmax(out), cross-entropy loss. Parameters live in
/// one flat vector laid out as [W1 (hidden x in), b1, W2 (out x hidden), b2].
class TwoLayerMlp {
 public:
  TwoLayerMlp(int in_dim, int hidden_dim, int out_dim) : in_(in_dim), hid_(hidden_dim), out_(out_dim) {
    if (in_ < 1 || hid_ < 1 || out_ < 1) throw std::invalid_argument("MLP dimensions must be >= 1");
  }

  std::size_t param_count() const { return w1_size() + hid() + w2_size() + out(); }

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return w1_size(); }
  std::size_t w2_offset() const { return b1_offset() + hid(); }
  std::size_t b2_offset() const { return w2_offset() + w2_size(); }

  /// Weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  std::vector<double> init_params(std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<double> p(param_count(), 0.0);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(in_));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hid_));
    for (std::size_t i = 0; i < w1_size(); ++i) p[w1_offset() + i] = a1 * (2.0 * rng.uniform() - 1.0);
    for (std::size_t i = 0; i < w2_size(); ++i) p[w2_offset() + i] = a2 * (2.0 * rng.uniform() - 1.0);
    return p;
  }

  /// Mean loss over `idx`; writes the gradient into `grad` if it is non-empty.
  double loss_and_grad(std::span<const double> params, const Dataset& data, std::span<const std::size_t> idx,
                       std::span<double> grad) const {
    if (params.size() != param_count()) throw std::invalid_argument("parameter vector has the wrong size");
    if (data.dim != in_ || data.classes != out_) throw std::invalid_argument("dataset does not match network");
    if (idx.empty()) throw std::invalid_argument("empty batch");
    const bool want_grad = !grad.empty();
    if (want_grad) {
      if (grad.size() != param_count()) throw std::invalid_argument("gradient buffer has the wrong size");
      std::fill(grad.begin(), grad.end(), 0.0);
    }
    const double inv_b = 1.0 / static_cast<double>(idx.size());
    const double* W1 = params.data() + w1_offset();
    const double* b1 = params.data() + b1_offset();
    const double* W2 = params.data() + w2_offset();
    const double* b2 = params.data() + b2_offset();

    std::vector<double> pre(hid()), h(hid()), z(out()), dz(out()), dh(hid());
    double loss = 0.0;
    for (std::size_t n : idx) {
      const auto x = data.row(n);
      for (std::size_t j = 0; j < hid(); ++j) {
        double a = b1[j];
        for (std::size_t i = 0; i < in(); ++i) a += W1[j * in() + i] * x[i];
        pre[j] = a;
        h[j] = a > 0.0 ? a : 0.0;
      }
      double zmax = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < out(); ++k) {
        double a = b2[k];
        for (std::size_t j = 0; j < hid(); ++j) a += W2[k * hid() + j] * h[j];
        z[k] = a;
        zmax = std::max(zmax, a);
      }
      double norm = 0.0;
      for (std::size_t k = 0; k < out(); ++k) norm += std::exp(z[k] - zmax);
      const double log_norm = zmax + std::log(norm);
      const auto label = static_cast<std::size_t>(data.y[n]);
      loss += log_norm - z[label];
      if (!want_grad) continue;

      for (std::size_t k = 0; k < out(); ++k) dz[k] = (std::exp(z[k] - log_norm) - (k == label ? 1.0 : 0.0)) * inv_b;
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t k = 0; k < out(); ++k) {
        grad[b2_offset() + k] += dz[k];
        for (std::size_t j = 0; j < hid(); ++j) {
          grad[w2_offset() + k * hid() + j] += dz[k] * h[j];
          dh[j] += W2[k * hid() + j] * dz[k];
        }
      }
      for (std::size_t j = 0; j < hid(); ++j) {
        if (pre[j] <= 0.0) continue;
        grad[b1_offset() + j] += dh[j];
        for (std::size_t i = 0; i < in(); ++i) grad[w1_offset() + j * in() + i] += dh[j] * x[i];
      }
    }
    return loss * inv_b;
  }

  double loss(std::span<const double> params, const Dataset& data, std::span<const std::size_t> idx) const {
    return loss_and_grad(params, data, idx, {});
  }

 private:
  std::size_t in() const { return static_cast<std::size_t>(in_); }
  std::size_t hid() const { return static_cast<std::size_t>(hid_); }
  std::size_t out() const { return static_cast<std::size_t>(out_); }
  std::size_t w1_size() const { return hid() * in(); }
  std::size_t w2_size() const { return out() * hid(); }

  int in_, hid_, out_;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_err = 0.0;
};

/// Central differences on `per_layer` random coordinates of each of the four
/// parameter blocks. Relative error is |a - n| / max(|a|, |n|, floor); the
/// floor keeps near-zero gradients from turning round-off into huge ratios.
inline GradCheckReport gradient_check(const TwoLayerMlp& net, std::span<const double> params, const Dataset& data,
                                      std::span<const std::size_t> idx, int per_layer = 10, double h = 1e-5,
                                      std::uint64_t seed = 0, double floor = 1e-4) {
  std::vector<double> grad(net.param_count());
  net.loss_and_grad(params, data, idx, grad);
  std::vector<double> p(params.begin(), params.end());
  Rng rng(seed);
  const std::size_t bounds[5] = {net.w1_offset(), net.b1_offset(), net.w2_offset(), net.b2_offset(),
                                 net.param_count()};
  GradCheckReport rep;
  for (int layer = 0; layer < 4; ++layer) {
    const std::size_t lo = bounds[layer];
    const std::size_t width = bounds[layer + 1] - lo;
    for (int c = 0; c < per_layer; ++c) {
      const std::size_t i = lo + static_cast<std::size_t>(rng.next_u64() % width);
      const double keep = p[i];
      p[i] = keep + h;
      const double up = net.loss(p, data, idx);
      p[i] = keep - h;
      const double down = net.loss(p, data, idx);
      p[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(grad[i] - numeric) / std::max({std::abs(grad[i]), std::abs(numeric), floor});
      rep.max_rel_err = std::max(rep.max_rel_err, err);
      ++rep.checked;
    }
  }
  return rep;
}

struct DenomTrace {
  Variant variant = Variant::kAcProp;
  /// Mean over parameters of the second-moment accumulator after each step.
  std::vector<double> mean_second;
  /// Mini-batch loss at each step, before the update.
  std::vector<double> loss;
  /// Mini-batch gradients, only when requested.
  std::vector<std::vector<double>> gradients;
  int steps_per_epoch = 0;
  bool diverged = false;
};

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Mini-batch training with optimizer `variant`; the rest of the optimizer
/// settings come from cfg.hp. A non-finite loss stops training and sets
/// `diverged`.
inline DenomTrace train_mlp(const MlpConfig& cfg, Variant variant) {
  cfg.validate();
  const Dataset data = make_gaussian_mixture(cfg.in_dim, cfg.out_dim, cfg.n_samples, cfg.separation,
                                             derive_seed(cfg.seed, 0));
  const TwoLayerMlp net(cfg.in_dim, cfg.hidden_dim, cfg.out_dim);
  HyperParams hp = cfg.hp;
  hp.variant = variant;

  OptimizerState state = OptimizerState::init(net.init_params(derive_seed(cfg.seed, 1)), hp);
  Rng shuffle_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(net.param_count());
  const BoxConstraint box = BoxConstraint::unbounded();

  DenomTrace trace;
  trace.variant = variant;
  trace.steps_per_epoch = cfg.n_samples / cfg.batch;
  for (int epoch = 0; epoch < cfg.epochs && !trace.diverged; ++epoch) {
    // Fisher-Yates with our own generator for portability.
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(shuffle_rng.next_u64() % (i + 1))]);
    }
    for (int b = 0; b < trace.steps_per_epoch; ++b) {
      const std::span<const std::size_t> idx(order.data() + static_cast<std::size_t>(b) * cfg.batch,
                                             static_cast<std::size_t>(cfg.batch));
      const double loss = net.loss_and_grad(state.x, data, idx, grad);
      if (!std::isfinite(loss)) {
        trace.diverged = true;
        break;
      }
      if (cfg.record_gradients) trace.gradients.push_back(grad);
      const bool cold = cfg.skip_cold_async_step && state.t == 0 && is_async(variant);
      std::vector<double> keep;
      if (cold) keep = state.x;
      try {
        state = step(std::move(state), grad, hp, box);
      } catch (const std::domain_error&) {
        trace.diverged = true;
        break;
      }
      if (cold) state.x = std::move(keep);
      trace.loss.push_back(loss);
      trace.mean_second.push_back(mean_of(state.second));
    }
  }
  return trace;
}

/// Uncentered and centered accumulators fed the same gradient stream.
struct ReplayTrace {
  std::vector<double> mean_v;
  std::vector<double> mean_s;
};

inline ReplayTrace replay_accumulators(const std::vector<std::vector<double>>& gradients, double beta1,
                                       double beta2) {
  ReplayTrace out;
  if (gradients.empty()) return out;
  const std::size_t d = gradients.front().size();
  std::vector<double> m(d, 0.0), v(d, 0.0), s(d, 0.0);
  for (const auto& g : gradients) {
    if (g.size() != d) throw std::invalid_argument("gradient stream changes dimension");
    for (std::size_t i = 0; i < d; ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double c = g[i] - m[i];
      s[i] = beta2 * s[i] + (1.0 - beta2) * c * c;
    }
    out.mean_v.push_back(mean_of(v));
    out.mean_s.push_back(mean_of(s));
  }
  return out;
}

}  // namespace acprop_lab
