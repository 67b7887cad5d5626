#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "acprop_lab/sweep.hpp"

using namespace acprop_lab;

namespace {

SweepGrid small_grid() {
  SweepGrid g = SweepGrid::defaults(ProblemKind::kPeriodic1);
  g.P_values = {3, 5};
  g.beta2_values = {0.1, 0.5, 0.99};
  g.steps = 3000;
  g.tail = 300;
  g.optimizers = {Variant::kAcProp, Variant::kRmsProp};
  return g;
}

bool same_cells(const std::vector<CellVerdict>& a, const std::vector<CellVerdict>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].variant != b[i].variant || a[i].P != b[i].P || a[i].beta2 != b[i].beta2 ||
        a[i].verdict != b[i].verdict || a[i].best_lr != b[i].best_lr || a[i].tail_error != b[i].tail_error) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST(LogGrid, EndpointsAndSpacing) {
  const auto g = log_grid(0.1, 0.999, 20);
  ASSERT_EQ(g.size(), 20u);
  EXPECT_DOUBLE_EQ(g.front(), 0.1);
  EXPECT_DOUBLE_EQ(g.back(), 0.999);
  for (std::size_t i = 2; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], g[1] / g[0], 1e-12);
  EXPECT_THROW(log_grid(0.0, 1.0, 5), std::invalid_argument);
  EXPECT_THROW(log_grid(0.5, 0.1, 5), std::invalid_argument);
}

TEST(JudgeCell, AcPropConvergesOnPeriodicProblem) {
  const auto grid = SweepGrid::defaults(ProblemKind::kPeriodic1);
  const auto c = judge_cell(grid, 3, 0.1, Variant::kAcProp);
  EXPECT_EQ(c.verdict, Verdict::kConverge);
  ASSERT_TRUE(c.best_lr.has_value());
  EXPECT_LT(c.tail_error, grid.tol);
  EXPECT_EQ(c.P, 3);
  EXPECT_EQ(c.beta1, 0.9);
}

TEST(JudgeCell, RmsPropDivergesWithSmallBeta2) {
  const auto grid = SweepGrid::defaults(ProblemKind::kPeriodic1);
  const auto c = judge_cell(grid, 3, 0.1, Variant::kRmsProp);
  EXPECT_EQ(c.verdict, Verdict::kDiverge);
  EXPECT_GE(c.tail_error, grid.tol);
}

TEST(RunSweep, EmptyOptimizerListGivesEmptyResult) {
  auto g = small_grid();
  g.optimizers.clear();
  EXPECT_TRUE(run_sweep(g).empty());
}

TEST(RunSweep, OrderedByVariantThenPThenBeta2) {
  const auto g = small_grid();
  const auto cells = run_sweep(g, 2);
  ASSERT_EQ(cells.size(), 12u);
  EXPECT_EQ(cells[0].variant, Variant::kAcProp);
  EXPECT_EQ(cells[6].variant, Variant::kRmsProp);
  EXPECT_EQ(cells[3].P, 5);
  EXPECT_EQ(cells[4].beta2, 0.5);
}

TEST(RunSweep, WorkerCountDoesNotChangeResults) {
  const auto g = small_grid();
  EXPECT_TRUE(same_cells(run_sweep(g, 1), run_sweep(g, 3)));
}

TEST(RunSweep, CellVerdictIndependentOfGridOrder) {
  auto g = small_grid();
  const auto forward = run_sweep(g, 1);
  std::reverse(g.beta2_values.begin(), g.beta2_values.end());
  std::reverse(g.P_values.begin(), g.P_values.end());
  std::reverse(g.optimizers.begin(), g.optimizers.end());
  const auto backward = run_sweep(g, 2);
  ASSERT_EQ(forward.size(), backward.size());
  for (const auto& c : forward) {
    const auto it = std::find_if(backward.begin(), backward.end(), [&](const CellVerdict& o) {
      return o.variant == c.variant && o.P == c.P && o.beta2 == c.beta2;
    });
    ASSERT_NE(it, backward.end());
    EXPECT_EQ(it->verdict, c.verdict);
    EXPECT_EQ(it->tail_error, c.tail_error);
  }
}

TEST(RunSweep, StochasticCellsAreSeedDeterministic) {
  auto g = SweepGrid::defaults(ProblemKind::kStochastic1);
  g.P_values = {10};
  g.beta2_values = {0.9};
  g.steps = 2000;
  g.tail = 200;
  g.stochastic_seeds = 2;
  g.seed = 4;
  const auto a = run_sweep(g, 1);
  const auto b = run_sweep(g, 2);
  EXPECT_TRUE(same_cells(a, b));
  g.seed = 5;
  const auto c = run_sweep(g, 1);
  EXPECT_NE(a[0].tail_error, c[0].tail_error);
}

TEST(RunSweep, ValidationErrors) {
  auto g = small_grid();
  g.tail = g.steps;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = small_grid();
  g.problem = ProblemKind::kAbsValue;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = SweepGrid::defaults(ProblemKind::kSparse2);
  EXPECT_NO_THROW(g.validate());
  g.P_values = {3};
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = small_grid();
  g.beta2_values = {1.0};
  EXPECT_THROW(g.validate(), std::invalid_argument);
  g = small_grid();
  g.lr_candidates.clear();
  EXPECT_THROW(g.validate(), std::invalid_argument);
}

TEST(Boundary, SmallestBeta2AboveWhichEverythingConverges) {
  auto cell = [](Variant v, int P, double b2, Verdict verdict) {
    CellVerdict c;
    c.variant = v;
    c.P = P;
    c.beta2 = b2;
    c.verdict = verdict;
    return c;
  };
  const std::vector<CellVerdict> cells = {
      cell(Variant::kAdam, 3, 0.9, Verdict::kConverge), cell(Variant::kAdam, 3, 0.1, Verdict::kDiverge),
      cell(Variant::kAdam, 3, 0.5, Verdict::kConverge), cell(Variant::kAdam, 5, 0.1, Verdict::kConverge),
      cell(Variant::kAdam, 5, 0.5, Verdict::kDiverge),  cell(Variant::kAdam, 5, 0.9, Verdict::kConverge),
      cell(Variant::kAdam, 7, 0.9, Verdict::kDiverge)};
  const auto b = boundary_extract(cells);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].P, 3);
  EXPECT_EQ(b[0].beta2_star, 0.5);
  EXPECT_EQ(b[1].beta2_star, 0.9);
  EXPECT_FALSE(b[2].beta2_star.has_value());
  EXPECT_EQ(count_converged(cells), 4u);

  const auto single = boundary_extract({cell(Variant::kAcProp, 3, 0.2, Verdict::kConverge)});
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].beta2_star, 0.2);
  EXPECT_TRUE(boundary_extract({}).empty());
}
