#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "acprop_lab/mlp.hpp"

using namespace acprop_lab;

namespace {

MlpConfig small_config() {
  MlpConfig cfg;
  cfg.n_samples = 400;
  cfg.epochs = 3;
  cfg.batch = 40;
  cfg.seed = 3;
  return cfg;
}

double first_epoch_mean(const std::vector<double>& v, int steps) {
  return mean_of(std::span<const double>(v.data(), static_cast<std::size_t>(steps)));
}

}  // namespace

TEST(Dataset, BalancedAndDeterministic) {
  const auto a = make_gaussian_mixture(5, 3, 300, 2.0, 1);
  const auto b = make_gaussian_mixture(5, 3, 300, 2.0, 1);
  ASSERT_EQ(a.size(), 300u);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(std::count(a.y.begin(), a.y.end(), 0), 100);
  EXPECT_EQ(a.row(2).size(), 5u);
  EXPECT_NE(make_gaussian_mixture(5, 3, 300, 2.0, 2).X, a.X);
}

TEST(TwoLayerMlp, ParameterLayout) {
  const TwoLayerMlp net(4, 3, 2);
  EXPECT_EQ(net.param_count(), 4u * 3 + 3 + 3 * 2 + 2);
  EXPECT_EQ(net.b1_offset(), 12u);
  EXPECT_EQ(net.w2_offset(), 15u);
  EXPECT_EQ(net.b2_offset(), 21u);
  const auto p = net.init_params(0);
  EXPECT_EQ(p.size(), net.param_count());
  for (std::size_t i = net.b1_offset(); i < net.w2_offset(); ++i) EXPECT_EQ(p[i], 0.0);
  for (std::size_t i = 0; i < net.b1_offset(); ++i) EXPECT_LE(std::abs(p[i]), 0.5);
}

TEST(TwoLayerMlp, UntrainedLossNearLogClasses) {
  const auto data = make_gaussian_mixture(20, 2, 200, 0.0, 0);
  const TwoLayerMlp net(20, 32, 2);
  std::vector<std::size_t> idx(200);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  EXPECT_NEAR(net.loss(net.init_params(4), data, idx), std::log(2.0), 0.1);
}

TEST(TwoLayerMlp, BackpropMatchesFiniteDifferences) {
  const auto data = make_gaussian_mixture(20, 2, 100, 2.0, 5);
  const TwoLayerMlp net(20, 32, 2);
  const auto params = net.init_params(6);
  std::vector<std::size_t> idx(32);
  std::iota(idx.begin(), idx.end(), std::size_t{10});
  const auto rep = gradient_check(net, params, data, idx);
  EXPECT_EQ(rep.checked, 40u);
  EXPECT_LT(rep.max_rel_err, 1e-6);
}

TEST(TrainMlp, DeterministicUnderSeed) {
  const auto cfg = small_config();
  const auto a = train_mlp(cfg, Variant::kAcProp);
  const auto b = train_mlp(cfg, Variant::kAcProp);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.mean_second, b.mean_second);
  EXPECT_EQ(a.steps_per_epoch, 10);
  EXPECT_EQ(a.loss.size(), 30u);
}

TEST(TrainMlp, EveryVariantReducesLoss) {
  auto cfg = small_config();
  cfg.epochs = 5;
  for (Variant v : kAllVariants) {
    const auto t = train_mlp(cfg, v);
    ASSERT_FALSE(t.diverged) << to_string(v);
    const int n = t.steps_per_epoch;
    const double first = first_epoch_mean(t.loss, n);
    const double last = mean_of(std::span<const double>(t.loss).last(static_cast<std::size_t>(n)));
    EXPECT_LT(last, first) << to_string(v);
  }
}

TEST(TrainMlp, HugeLearningRateReportsDivergence) {
  auto cfg = small_config();
  cfg.hp.alpha0 = 1e300;
  const auto t = train_mlp(cfg, Variant::kSgdm);
  EXPECT_TRUE(t.diverged);
  EXPECT_LT(t.loss.size(), 30u);
}

TEST(TrainMlp, Validation) {
  auto cfg = small_config();
  cfg.batch = 0;
  EXPECT_THROW(train_mlp(cfg, Variant::kAdam), std::invalid_argument);
  cfg = small_config();
  cfg.out_dim = 1;
  EXPECT_THROW(train_mlp(cfg, Variant::kAdam), std::invalid_argument);
  cfg = small_config();
  cfg.hp.beta2 = 1.0;
  EXPECT_THROW(train_mlp(cfg, Variant::kAdam), std::invalid_argument);
}

TEST(Replay, CenteredAccumulatorBelowUncenteredOnRealGradients) {
  auto cfg = small_config();
  cfg.record_gradients = true;
  const auto t = train_mlp(cfg, Variant::kAdaShift);
  ASSERT_EQ(t.gradients.size(), t.loss.size());
  const auto r = replay_accumulators(t.gradients, cfg.hp.beta1, cfg.hp.beta2);
  const int n = t.steps_per_epoch;
  EXPECT_LE(first_epoch_mean(r.mean_s, n), first_epoch_mean(r.mean_v, n));
}

TEST(Replay, ConstantGradientLeavesCenteredAccumulatorSmall) {
  const std::vector<std::vector<double>> g(2000, std::vector<double>{3.0, -2.0});
  const auto r = replay_accumulators(g, 0.9, 0.999);
  EXPECT_NEAR(r.mean_v.back(), 6.5 * (1.0 - std::pow(0.999, 2000)), 1e-9);
  EXPECT_LT(r.mean_s.back(), 1e-3 * r.mean_v.back());
  EXPECT_TRUE(replay_accumulators({}, 0.9, 0.999).mean_v.empty());
  EXPECT_THROW(replay_accumulators({{1.0}, {1.0, 2.0}}, 0.9, 0.999), std::invalid_argument);
}
