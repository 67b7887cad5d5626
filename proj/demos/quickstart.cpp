// ACProp vs Adam on the periodic counterexample, P = 3, beta2 = 0.3.
// Adam's denominator sees the +P spike in the same step and damps it; ACProp's does not.

#include <cstdio>

#include "acprop_lab/acprop_lab.hpp"

int main() {
  using namespace acprop_lab;
  const ProblemSpec problem = ProblemSpec::periodic1(3);
  for (Variant v : {Variant::kAdam, Variant::kAcProp}) {
    HyperParams hp;
    hp.variant = v;
    hp.alpha0 = 0.1;
    hp.beta1 = 0.9;
    hp.beta2 = 0.3;
    const double err = tail_mean_distance(hp, problem, problem.x0_default, 10000, 1000, 0);
    std::printf("%-8s tail mean |x - x*| = %.4g\n", std::string(to_string(v)).c_str(), err);
  }

  const auto lim = limits_problem1(3, 0.9, 0.3);
  std::printf("closed form: m_inf = %.6f, S_inf = %.6f\n", lim.m_inf, lim.S_inf);
}
