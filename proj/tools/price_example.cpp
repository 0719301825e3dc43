// Prices a three-year version of the reference contract with the backward
// simulation engine and checks it against the grid solver.

#include <cstdio>

#include "bsbu/oracle.hpp"
#include "bsbu/solver.hpp"
#include "bsbu/va_model.hpp"

int main() {
  const bsbu::VaModel model(bsbu::VaContract::with_horizon(3));
  const bsbu::TruncatedDomain dom = bsbu::va_domain(4.0);

  bsbu::SolverConfig cfg;
  cfg.paths = 50000;
  cfg.basis_order = 20;
  const bsbu::RunResult run = bsbu::bsbu_solve(model, dom, cfg);

  const bsbu::GridSolution grid = bsbu::grid_dp_solve(model, dom, bsbu::GridSpec::uniform(dom, 801, 64));
  const bsbu::EstimateComparison cmp = bsbu::compare_estimates(run.v0, grid.v0);
  std::printf("bsbu V0 = %.6f  grid V0 = %.6f  relative error = %.2e\n", run.v0, grid.v0, cmp.relative_error);
  for (const std::string& w : run.warnings) std::printf("warning: %s\n", w.c_str());
  return 0;
}
