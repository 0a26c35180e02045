"""Conjugate gradient, Jacobi-preconditioned CG, and the two-stage driver.

The two-stage driver first solves the system in binary32 to a loose
tolerance eps1 from a zero start, then refines the upcast result in
binary64 to the final tolerance eps2.  Its cost is charged as
``mu * N1 + N2``: reduced-precision iterations count a fraction ``mu``
(default one half) of a full-precision iteration.

The stopping test always uses the true residual ``b - A x``, recomputed
with a fresh matrix-vector product every iteration.  In binary32 the
recursively updated residual drifts away from the truth, and the stopping
decision is what the whole eps1 trade-off rests on, so it cannot be
trusted to the recursion.  The extra product is charged identically in
both stages, which keeps the ``mu`` weighting meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CgBreakdownError,
    DimensionMismatchError,
    NonpositiveDiagonalError,
    PrecisionMismatchError,
    Stage2NotConvergedError,
)
from .sparse import SparseSymMatrix, downcast, downcast_vector, spmv, upcast_vector

__all__ = [
    "SolveConfig",
    "SolveResult",
    "TwoStageResult",
    "cg",
    "pcg_jacobi",
    "two_stage_solve",
    "no_stagnation",
    "cost",
    "iteration_bound",
]


@dataclass(frozen=True)
class SolveConfig:
    """Stopping and safeguard parameters for a single CG run.

    ``max_iterations=None`` resolves to ``10 * n`` at solve time.  The run
    is declared stagnated when the best true-residual norm seen so far has
    not improved by at least ``stagnation_factor`` over the last
    ``stagnation_window`` iterations; binary32 runs can stall above a tight
    tolerance forever, and an unbounded loop would poison every sweep.
    """

    tolerance: float
    max_iterations: int | None = None
    preconditioner: str = "none"
    residual_mode: str = "relative"
    stagnation_window: int = 25
    stagnation_factor: float = 0.99

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.preconditioner not in ("none", "jacobi"):
            raise ValueError("preconditioner must be 'none' or 'jacobi'")
        if self.residual_mode not in ("relative", "absolute"):
            raise ValueError("residual_mode must be 'relative' or 'absolute'")
        if self.stagnation_window < 1:
            raise ValueError("stagnation_window must be at least 1")
        if not 0 < self.stagnation_factor <= 1:
            raise ValueError("stagnation_factor must lie in (0, 1]")


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    final_residual_norm: float
    status: str  # converged | max_iterations | stagnated
    residual_history: np.ndarray


@dataclass
class TwoStageResult:
    x: np.ndarray
    n1: int
    n2: int
    epsilon1: float
    epsilon2: float
    mu: float
    cost: float
    stage1_status: str
    stage2_status: str
    final_residual_norm: float


def _check_operands(A: SparseSymMatrix, b, x0):
    b = np.asarray(b)
    if b.ndim != 1 or b.size != A.n:
        raise DimensionMismatchError(f"b must have length {A.n}")
    if b.dtype != A.dtype:
        raise PrecisionMismatchError(f"b is {b.dtype}, matrix stores {A.dtype}")
    if x0 is None:
        x = np.zeros(A.n, dtype=A.dtype)
    else:
        x0 = np.asarray(x0)
        if x0.ndim != 1 or x0.size != A.n:
            raise DimensionMismatchError(f"x0 must have length {A.n}")
        if x0.dtype != A.dtype:
            raise PrecisionMismatchError(f"x0 is {x0.dtype}, matrix stores {A.dtype}")
        x = x0.copy()
    return b, x


def _run_cg(A, b, x0, config: SolveConfig, inv_diag) -> SolveResult:
    """Common driver; ``inv_diag`` is None for plain CG and 1/diag for Jacobi.

    Every vector operation runs at the matrix's storage precision.  The
    update order per iteration is alpha, x, r, beta, d.
    """
    b, x = _check_operands(A, b, x0)
    max_iterations = config.max_iterations or 10 * A.n
    norm_b = float(np.linalg.norm(b))
    threshold = (
        config.tolerance * norm_b
        if config.residual_mode == "relative"
        else config.tolerance
    )

    r = b - spmv(A, x)
    res = float(np.linalg.norm(r))
    history: list[float] = []
    if res <= threshold:
        return SolveResult(x, 0, res, "converged", np.array(history))

    d = inv_diag * r if inv_diag is not None else r.copy()
    rz = np.dot(r, d)  # r'M^-1 r; plain r'r when unpreconditioned
    bests = [res]
    status = "max_iterations"
    for k in range(1, max_iterations + 1):
        Ad = spmv(A, d)
        dAd = np.dot(d, Ad)
        if not np.isfinite(dAd) or dAd <= 0:
            raise CgBreakdownError(
                f"d'Ad = {dAd} at iteration {k}: operand not SPD at {A.precision}"
            )
        alpha = rz / dAd
        x = x + alpha * d
        r = r - alpha * Ad
        z = inv_diag * r if inv_diag is not None else r
        rz_next = np.dot(r, z)
        beta = rz_next / rz if rz != 0 else z.dtype.type(0)
        d = z + beta * d
        rz = rz_next

        res = float(np.linalg.norm(b - spmv(A, x)))
        history.append(res)
        bests.append(min(bests[-1], res))
        if res <= threshold:
            status = "converged"
            break
        if (
            k >= config.stagnation_window
            and bests[k] > config.stagnation_factor * bests[k - config.stagnation_window]
        ):
            status = "stagnated"
            break
    return SolveResult(x, len(history), res, status, np.array(history))


def cg(A: SparseSymMatrix, b, x0=None, config: SolveConfig | None = None) -> SolveResult:
    """Conjugate gradients at the matrix's storage precision.

    Stops when the recomputed residual ``||b - A x||`` (divided by ``||b||``
    in relative mode) falls to the configured tolerance, when
    max_iterations is reached, or when progress stagnates.
    """
    if config is None:
        raise ValueError("config with a tolerance is required")
    return _run_cg(A, b, x0, config, None)


def pcg_jacobi(
    A: SparseSymMatrix, b, x0=None, config: SolveConfig | None = None
) -> SolveResult:
    """CG preconditioned by M = diag(A); stopping test is unpreconditioned."""
    if config is None:
        raise ValueError("config with a tolerance is required")
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise NonpositiveDiagonalError("Jacobi preconditioning needs diag > 0")
    inv_diag = (A.dtype.type(1) / diag).astype(A.dtype)
    return _run_cg(A, b, x0, config, inv_diag)


def _stage_solver(config: SolveConfig):
    return pcg_jacobi if config.preconditioner == "jacobi" else cg


def no_stagnation(config: SolveConfig) -> SolveConfig:
    """Copy of ``config`` whose stagnation window can never trigger."""
    return replace(config, stagnation_window=2**31 - 1)


def two_stage_solve(
    A: SparseSymMatrix,
    b,
    epsilon1: float,
    epsilon2: float,
    mu: float = 0.5,
    config: SolveConfig | None = None,
) -> TwoStageResult:
    """Solve A x = b in binary32 to eps1, then refine in binary64 to eps2.

    Stage 1 starts from zero on the rounded system; its last iterate is
    upcast and used as the starting point of stage 2 even when stage 1
    stagnated short of eps1.  The returned cost is ``mu * N1 + N2``.
    """
    if not epsilon2 <= epsilon1:
        raise ValueError("epsilon2 must not exceed epsilon1")
    if not 0 < mu < 1:
        raise ValueError("mu must lie in (0, 1)")
    if config is None:
        config = SolveConfig(tolerance=epsilon2)
    if A.dtype != np.float64:
        raise PrecisionMismatchError("two-stage solve expects a binary64 matrix")
    b = np.asarray(b, dtype=np.float64)

    solver = _stage_solver(config)
    A32 = downcast(A)
    b32 = downcast_vector(b)
    stage1 = solver(A32, b32, None, replace(config, tolerance=epsilon1))
    x0 = upcast_vector(stage1.x)
    # The stagnation guard exists for the binary32 stage, whose residual can
    # floor out far above the target.  Refinement in binary64 is bounded by
    # max_iterations alone; its long plateaus are ordinary CG behavior.
    stage2 = solver(A, b, x0, no_stagnation(replace(config, tolerance=epsilon2)))
    if stage2.status != "converged":
        raise Stage2NotConvergedError(
            f"stage 2 ended with status '{stage2.status}' after "
            f"{stage2.iterations} iterations (residual {stage2.final_residual_norm:.3e})"
        )
    return TwoStageResult(
        x=stage2.x,
        n1=stage1.iterations,
        n2=stage2.iterations,
        epsilon1=epsilon1,
        epsilon2=epsilon2,
        mu=mu,
        cost=cost(stage1.iterations, stage2.iterations, mu),
        stage1_status=stage1.status,
        stage2_status=stage2.status,
        final_residual_norm=stage2.final_residual_norm,
    )


def cost(n1: int, n2: int, mu: float) -> float:
    """Weighted iteration count of a two-stage run: mu * n1 + n2."""
    if n1 < 0 or n2 < 0:
        raise ValueError("iteration counts must be nonnegative")
    return mu * n1 + n2


def iteration_bound(kappa: float, epsilon: float) -> int:
    """Upper estimate ceil(sqrt(kappa)/2 * ln(2/eps)) on CG iterations."""
    if not kappa >= 1:
        raise ValueError("kappa must be at least 1")
    if not 0 < epsilon < 2:
        raise ValueError("epsilon must lie in (0, 2)")
    return math.ceil(0.5 * math.sqrt(kappa) * math.log(2.0 / epsilon))
