"""The five O(nnz) features, family by family.

Every number the predictor sees is computable in one pass over the matrix:
dimension, stored nonzeros, a double-BFS pseudo-diameter, and two numbers
distilled from Gershgorin discs (of the matrix and of two diagonal
rescalings).  For small matrices we also print the true spectrum so the
enclosures can be eyeballed.
"""

import numpy as np

from mpcg import GraphSpec, eigen_estimates, extract_features, generate

SPECS = [
    GraphSpec("path", 120, seed=0),
    GraphSpec("cycle", 120, seed=0),
    GraphSpec("grid2d", 120, seed=0),
    GraphSpec("star", 120, seed=0),
    GraphSpec("tree_random", 120, seed=0),
    GraphSpec("random_regular", 120, seed=0, degree=4),
    GraphSpec("random_gnm", 120, seed=0, m_target=240),
    GraphSpec("random_gnm", 120, seed=0, m_target=240, delta_range=(1e-4, 1e-3)),
]

print(f"{'family':14} {'n':>4} {'nnz':>5} {'diam~':>5} {'spread':>8} {'lam_max~':>9}"
      f" {'true spectrum':>22}")
for spec in SPECS:
    A = generate(spec)
    chi = extract_features(A)
    ev = np.linalg.eigvalsh(A.toarray())
    tag = spec.family + (" (thin)" if spec.delta_range[0] < 0.01 else "")
    print(
        f"{tag:14} {chi.n:4d} {chi.nnz:5d} {chi.pseudo_diameter:5d} "
        f"{chi.spread:8.4f} {chi.lambda_max:9.3f} "
        f"[{ev[0]:8.2e}, {ev[-1]:8.3f}]"
    )

print("\nGershgorin hulls for the last matrix:")
est = eigen_estimates(A)
for name, hull in [
    ("plain discs", est.basic),
    ("rescaled #1", est.scaled1),
    ("rescaled #2", est.scaled2),
    ("intersection", est.combined),
]:
    print(f"  {name:12} [{hull.lo:12.6f}, {hull.hi:12.6f}]")
print(f"  true          [{ev[0]:12.6f}, {ev[-1]:12.6f}]")
