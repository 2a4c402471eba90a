// Right-most ancestor of a single lineage at n = 400, alpha = 1, averaged
// over replicates and compared with the drift of the limiting pair.
#include <cstdio>

#include "slfv/dual_sim.hpp"
#include "slfv/limit_reference.hpp"
#include "slfv/stats.hpp"

int main() {
  slfv::ModelParams p;
  p.n = 400;
  p.alpha = 1.0;
  p.seed = 7;
  const double T = 1.0;
  slfv::MomentAccumulator right, left;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    right.add(slfv::extremal_ancestor(0.0, T, p, r, slfv::Side::right));
    left.add(slfv::extremal_ancestor(0.0, T, p, r, slfv::Side::left));
  }
  const slfv::LimitConstants c = slfv::limit_constants(p);
  std::printf("right-most: %.4f +- %.4f (zeta*T = %.4f)\n", right.mean(), right.standard_error(), c.zeta * T);
  std::printf("left-most:  %.4f +- %.4f (-zeta*T = %.4f)\n", left.mean(), left.standard_error(), -c.zeta * T);
  return 0;
}
