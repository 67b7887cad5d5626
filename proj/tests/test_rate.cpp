#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "acprop_lab/rate.hpp"

using namespace acprop_lab;

TEST(SlopeFit, RecoversPowerLaw) {
  std::vector<double> x, y;
  for (double t : {10.0, 100.0, 1000.0, 10000.0}) {
    x.push_back(t);
    y.push_back(3.0 * std::pow(t, -0.5));
  }
  EXPECT_NEAR(fit_loglog_slope(x, y), -0.5, 1e-12);
  EXPECT_THROW(fit_loglog_slope({1.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(fit_loglog_slope({1.0, 2.0}, {1.0, 0.0}), std::domain_error);
  EXPECT_THROW(fit_loglog_slope({2.0, 2.0}, {1.0, 3.0}), std::domain_error);
}

TEST(LogSpacedSteps, DistinctIncreasingAndEndsAtMax) {
  const auto s = log_spaced_steps(100, 50000, 25);
  EXPECT_EQ(s.front(), 100);
  EXPECT_EQ(s.back(), 50000);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(s[i], s[i - 1]);
  const auto dense = log_spaced_steps(1, 5, 50);
  EXPECT_EQ(dense, (std::vector<std::int64_t>{1, 2, 3, 4, 5}));
  EXPECT_THROW(log_spaced_steps(0, 5, 3), std::invalid_argument);
}

TEST(Constants, CenteredBoundIsTighter) {
  const auto c = constants_compare(1.0, 3.0, 1e-8);
  EXPECT_NEAR(c.inv_Cl_uncentered, std::sqrt(10.0) + 1e-8, 1e-15);
  EXPECT_NEAR(c.inv_Cl_centered, 1.0 + 1e-8, 1e-15);
  const auto zero_mean = constants_compare(2.0, 0.0, 1e-8);
  EXPECT_EQ(zero_mean.inv_Cl_uncentered, zero_mean.inv_Cl_centered);
  EXPECT_THROW(constants_compare(1.0, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(constants_compare(-1.0, 0.0, 1e-8), std::invalid_argument);
}

TEST(Stationary, AccumulatorMeansUnderIidGradients) {
  const double mu = 3.0, sigma = 1.0, b1 = 0.9;
  const auto m = stationary_accumulator_means(mu, sigma, b1, 0.999, 1000000, 10000, 1);
  EXPECT_NEAR(m.mean_v, mu * mu + sigma * sigma, 0.02 * (mu * mu + sigma * sigma));
  EXPECT_NEAR(m.mean_s, expected_stationary_s(sigma, b1), 0.1 * expected_stationary_s(sigma, b1));
  EXPECT_LT(m.mean_s, m.mean_v);
  EXPECT_THROW(stationary_accumulator_means(mu, sigma, b1, 0.999, 10, 10, 1), std::invalid_argument);
}

TEST(MeasureRate, SmallRunIsConsistent) {
  const auto hp = default_rate_hyperparams();
  RateOptions opt;
  opt.num_T = 10;
  opt.workers = 2;
  const auto noisy = measure_rate(Variant::kAcProp, hp, 1.0, 5, 4000, 3, opt);
  ASSERT_EQ(noisy.mean_grad_sq.size(), noisy.T_values.size());
  EXPECT_EQ(noisy.T_values.back(), 4000);
  EXPECT_LE(noisy.C_l_est, noisy.C_u_est);
  EXPECT_NEAR(noisy.C_l_est, 1.0 / (std::sqrt(noisy.max_second) + hp.eps), 1e-9 * noisy.C_l_est);
  EXPECT_LT(noisy.fitted_slope, 0.0);

  const auto clean = measure_rate(Variant::kAcProp, hp, 0.0, 5, 4000, 3, opt);
  for (std::size_t i = 0; i < clean.T_values.size(); ++i) {
    EXPECT_LE(clean.mean_grad_sq[i], noisy.mean_grad_sq[i]) << clean.T_values[i];
  }
}

TEST(MeasureRate, WorkerCountDoesNotChangeResult) {
  const auto hp = default_rate_hyperparams();
  RateOptions one, three;
  one.num_T = three.num_T = 5;
  one.workers = 1;
  three.workers = 3;
  const auto a = measure_rate(Variant::kAdam, hp, 1.0, 3, 2000, 3, one);
  const auto b = measure_rate(Variant::kAdam, hp, 1.0, 3, 2000, 3, three);
  EXPECT_EQ(a.mean_grad_sq, b.mean_grad_sq);
  EXPECT_EQ(a.fitted_slope, b.fitted_slope);
}

TEST(MeasureRate, Validation) {
  const auto hp = default_rate_hyperparams();
  EXPECT_THROW(measure_rate(Variant::kAcProp, hp, 1.0, 5, 999, 1), std::invalid_argument);
  EXPECT_THROW(measure_rate(Variant::kAcProp, hp, 1.0, 5, 2000, 0), std::invalid_argument);
  EXPECT_THROW(measure_rate(Variant::kAcProp, hp, -1.0, 5, 2000, 1), std::invalid_argument);
}
