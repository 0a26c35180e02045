"""Sweep the stage-1 tolerance on one matrix and watch the cost trade-off.

Stage 1 runs conjugate gradients in binary32: each iteration costs half a
binary64 iteration but rounding error grows faster, so pushing eps1 deeper
eventually stalls and stops paying.  The weighted cost mu*N1 + N2 exposes
the sweet spot.
"""

import numpy as np

from mpcg import EpsilonGrid, GraphSpec, generate, two_stage_solve
from mpcg.dataset import ones_rhs
from mpcg.solver import SolveConfig, cg, no_stagnation

# A random tree with a thin dominance margin: ill-conditioned enough that
# binary32 cannot reach the deepest tolerances.
spec = GraphSpec("tree_random", 600, seed=3, delta_range=(1e-3, 1e-2))
A = generate(spec)
b = ones_rhs(A)  # exact solution is the all-ones vector

grid = EpsilonGrid()
print(f"matrix: {spec.family}, n={A.n}, nnz={A.nnz}")
print(f"final tolerance eps2 = {grid.epsilon2:g}, mu = {grid.mu}\n")

baseline = cg(A, b, None, no_stagnation(SolveConfig(tolerance=grid.epsilon2)))
print(f"pure binary64 baseline: {baseline.iterations} iterations\n")

print(f"{'eps1':>8} {'N1':>5} {'N2':>5} {'cost':>8}  stage-1 status")
best = None
for eps1 in grid.values:
    r = two_stage_solve(A, b, eps1, grid.epsilon2, grid.mu)
    marker = ""
    if best is None or r.cost < best.cost:
        best = r
    print(
        f"{eps1:8.0e} {r.n1:5d} {r.n2:5d} {r.cost:8.1f}  {r.stage1_status}"
    )

saving = 100.0 * (baseline.iterations - best.cost) / baseline.iterations
print(
    f"\nbest eps1 = {best.epsilon1:g}: cost {best.cost:.1f} vs "
    f"{baseline.iterations} pure binary64 iterations ({saving:.0f}% cheaper)"
)
x_err = np.max(np.abs(best.x - 1.0))
print(f"max |x - 1| at the optimum: {x_err:.2e}")
