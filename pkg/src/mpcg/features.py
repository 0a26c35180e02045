"""Fast-computable matrix features: five numbers, all in O(nnz) time.

The feature vector of a matrix is (n, nnz, pseudo-diameter, eigenvalue
spread estimate, maximum-eigenvalue estimate).  The pseudo-diameter comes
from a double breadth-first sweep over the off-diagonal structure; the two
eigenvalue estimates come from Gershgorin discs of the matrix itself and
of two diagonal rescalings of it.  None of these touch an eigensolver.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateIntervalError,
    EmptyIntersectionError,
    NonpositiveDiagonalError,
)
from .sparse import SparseSymMatrix

__all__ = [
    "Interval",
    "EigenIntervalEstimate",
    "FeatureVector",
    "bfs_farthest",
    "pseudo_diameter",
    "gershgorin_basic",
    "gershgorin_scaled",
    "eigen_estimates",
    "spread",
    "extract_features",
]


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float


@dataclass(frozen=True)
class EigenIntervalEstimate:
    """Gershgorin hulls of A and of its two diagonal rescalings.

    ``combined`` is the intersection of the three hulls; for a symmetric
    matrix with positive diagonal it still contains the whole spectrum.
    """

    basic: Interval
    scaled1: Interval
    scaled2: Interval
    combined: Interval


@dataclass(frozen=True)
class FeatureVector:
    n: int
    nnz: int
    pseudo_diameter: int
    spread: float
    lambda_max: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.n, self.nnz, self.pseudo_diameter, self.spread, self.lambda_max],
            dtype=np.float64,
        )


def _bfs_distances(A: SparseSymMatrix, start: int) -> np.ndarray:
    """BFS over the off-diagonal structure; -1 marks unreachable vertices."""
    rs, cols = A.row_starts, A.col_indices
    dist = np.full(A.n, -1, dtype=np.int64)
    dist[start] = 0
    queue = deque([start])
    while queue:
        v = queue.popleft()
        dv = dist[v] + 1
        for k in range(rs[v], rs[v + 1]):
            j = cols[k]
            if j != v and dist[j] < 0:
                dist[j] = dv
                queue.append(j)
    return dist


def bfs_farthest(A: SparseSymMatrix, start: int) -> tuple[int, int]:
    """Vertex at maximum BFS distance from ``start`` within its component.

    Loops (diagonal entries) are ignored.  Ties go to the smallest vertex
    index so repeated runs return the same endpoint.
    """
    if not 0 <= start < A.n:
        raise IndexError(f"start vertex {start} out of range")
    dist = _bfs_distances(A, start)
    far = int(dist.max())
    vertex = int(np.nonzero(dist == far)[0][0])
    return vertex, far


def pseudo_diameter(A: SparseSymMatrix) -> int:
    """Double-BFS estimate of the graph diameter, never exceeding it.

    The sweep starts from the minimum-degree vertex (smallest index on
    ties), finds a farthest vertex u, then returns the distance from u to
    its own farthest vertex.  Exact on trees.  Disconnected graphs are
    swept component by component and the largest value is returned; a
    matrix with no off-diagonal entries has pseudo-diameter 0.
    """
    degrees = A.row_lengths() - 1  # diagonal entry is always present
    unseen = np.ones(A.n, dtype=bool)
    best = 0
    while True:
        remaining = np.nonzero(unseen)[0]
        if remaining.size == 0:
            return best
        component = _bfs_distances(A, int(remaining[0])) >= 0
        component &= unseen  # defensive; components never overlap
        members = np.nonzero(component)[0]
        unseen[members] = False
        start = int(members[np.argmin(degrees[members])])
        u, _ = bfs_farthest(A, start)
        _, sweep = bfs_farthest(A, u)
        best = max(best, sweep)


def _offdiag_rowsums(A: SparseSymMatrix, weights: np.ndarray) -> np.ndarray:
    """Per-row sums of |a_ij| * weights[j] over off-diagonal entries."""
    rs, cols = A.row_starts, A.col_indices
    row_of = np.repeat(np.arange(A.n), np.diff(rs))
    terms = np.abs(A.values.astype(np.float64)) * weights[cols]
    terms[cols == row_of] = 0.0
    return np.add.reduceat(terms, rs[:-1])


def _hull(centers: np.ndarray, radii: np.ndarray) -> Interval:
    return Interval(float(np.min(centers - radii)), float(np.max(centers + radii)))


def gershgorin_basic(A: SparseSymMatrix) -> Interval:
    """Hull of the plain Gershgorin discs |x - a_ii| <= sum_{j!=i} |a_ij|."""
    d = A.diagonal().astype(np.float64)
    radii = _offdiag_rowsums(A, np.ones(A.n))
    return _hull(d, radii)


def gershgorin_scaled(A: SparseSymMatrix) -> tuple[Interval, Interval]:
    """Disc hulls after the two diagonal similarity rescalings of A.

    The first uses radius (1/a_ii) * sum_{j!=i} a_jj |a_ij|, the second
    a_ii * sum_{j!=i} |a_ij| / a_jj.  Both need a positive diagonal.
    """
    d = A.diagonal().astype(np.float64)
    if np.any(d <= 0):
        raise NonpositiveDiagonalError("diagonal scaling needs diag > 0")
    radii1 = _offdiag_rowsums(A, d) / d
    radii2 = _offdiag_rowsums(A, 1.0 / d) * d
    return _hull(d, radii1), _hull(d, radii2)


def eigen_estimates(A: SparseSymMatrix) -> EigenIntervalEstimate:
    """Intersect the basic and rescaled Gershgorin hulls."""
    basic = gershgorin_basic(A)
    scaled1, scaled2 = gershgorin_scaled(A)
    lo = max(basic.lo, scaled1.lo, scaled2.lo)
    hi = min(basic.hi, scaled1.hi, scaled2.hi)
    if lo > hi:
        raise EmptyIntersectionError(f"hulls do not intersect: [{lo}, {hi}]")
    return EigenIntervalEstimate(basic, scaled1, scaled2, Interval(lo, hi))


def spread(estimate: EigenIntervalEstimate) -> float:
    """|hi - lo| / |hi + lo| of the combined interval, a scale-free number.

    No clamping: a combined interval reaching below zero simply yields a
    spread of 1 or more, which is still a usable regression feature.
    """
    lo, hi = estimate.combined.lo, estimate.combined.hi
    if hi + lo == 0:
        raise DegenerateIntervalError("interval endpoints cancel")
    return abs(hi - lo) / abs(hi + lo)


def extract_features(A: SparseSymMatrix) -> FeatureVector:
    """Assemble the five-number feature vector in O(nnz) total time."""
    estimate = eigen_estimates(A)
    return FeatureVector(
        n=A.n,
        nnz=A.nnz,
        pseudo_diameter=pseudo_diameter(A),
        spread=spread(estimate),
        lambda_max=estimate.combined.hi,
    )
