// ACProp on f(x) = |x| from x0 = 100. Prints where x first crosses the
// optimum and how large the steps are on either side of that crossing.

#include <cstdio>

#include "acprop_lab/acprop_lab.hpp"

int main() {
  using namespace acprop_lab;
  const ProblemSpec problem = ProblemSpec::absvalue();
  for (bool cold_skip : {false, true}) {
    for (double lr : {1e-5, 1e-2}) {
      HyperParams hp;
      hp.alpha0 = lr;
      RunOptions opt;
      opt.skip_cold_async_step = cold_skip;
      const auto rec = run_trajectory(hp, problem, problem.x0_default, 100000, 0, opt);
      const auto c = analyze_crossing(rec, problem.x0_default[0], 0.0, 1000);
      std::printf("lr=%-6g cold_skip=%d  first crossing t=%-6lld  max step before=%-10.4g after=%-10.4g final x=%.3g\n",
                  lr, cold_skip, static_cast<long long>(c.first_cross), c.max_step_before, c.max_step_after,
                  rec.final_state.x[0]);
    }
  }
}
