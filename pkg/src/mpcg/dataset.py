"""Sample construction: generate SPD graph matrices, sweep eps1, label.

Matrices are adjacency matrices of unweighted graphs (all off-diagonal
weights 1) with a diagonal chosen to force strict row dominance, hence
positive definiteness.  Each matrix is labeled by running the two-stage
solver once per grid value of eps1 plus one pure binary64 baseline, and
recording which grid value minimizes the weighted cost mu*N1 + N2.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import networkx as nx
import numpy as np

from .errors import GraphFullError, InvalidSpecError
from .features import FeatureVector, extract_features
from .solver import SolveConfig, cg, no_stagnation, pcg_jacobi, two_stage_solve
from .sparse import SparseSymMatrix, from_coordinates

__all__ = [
    "EpsilonGrid",
    "GraphSpec",
    "CostEntry",
    "SampleRecord",
    "DatasetManifest",
    "generate",
    "perturb",
    "label_matrix",
    "build_sample",
    "plan_specs",
    "write_sample",
    "read_sample",
    "read_manifest",
]

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(10.0 ** -l for l in range(1, 8))

FAMILIES = (
    "path",
    "cycle",
    "grid2d",
    "tree_random",
    "star",
    "random_regular",
    "random_gnm",
)


@dataclass(frozen=True)
class EpsilonGrid:
    """Stage-1 tolerance grid, canonically stored in descending order.

    Class label i corresponds to values[i - 1]; with the default grid that
    is eps1 = 0.1**i for i = 1..7.
    """

    values: tuple[float, ...] = DEFAULT_GRID
    epsilon2: float = 1e-10
    mu: float = 0.5

    def __post_init__(self):
        vals = tuple(sorted((float(v) for v in self.values), reverse=True))
        if len(set(vals)) != len(vals):
            raise ValueError("grid values must be distinct")
        if not vals or vals[-1] <= 0:
            raise ValueError("grid values must be positive")
        if vals[-1] < self.epsilon2:
            raise ValueError("smallest grid value must be >= epsilon2")
        if not 0 < self.mu < 1:
            raise ValueError("mu must lie in (0, 1)")
        object.__setattr__(self, "values", vals)

    def value_of_class(self, label: int) -> float:
        if not 1 <= label <= len(self.values):
            raise ValueError(f"class label {label} outside 1..{len(self.values)}")
        return self.values[label - 1]


@dataclass(frozen=True)
class GraphSpec:
    """Recipe for one generated matrix (or one base-plus-variants group)."""

    family: str
    n: int
    seed: int = 0
    m_target: int | None = None  # random_gnm: number of edges
    degree: int | None = None  # random_regular
    diagonal_strategy: str = "degree_plus_delta"
    delta_range: tuple[float, float] = (0.1, 2.0)
    constant: float | None = None  # uniform_constant diagonal value
    variants: int = 0  # >0: perturbation group of this size
    edges_to_add: int | None = None  # None: 1% of base edges, at least 1

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["delta_range"] = list(self.delta_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GraphSpec":
        d = dict(d)
        d["delta_range"] = tuple(d.get("delta_range", (0.1, 2.0)))
        return cls(**d)


def _validate_spec(spec: GraphSpec) -> None:
    if spec.family not in FAMILIES:
        raise InvalidSpecError(f"unknown family '{spec.family}'")
    if spec.n < 1:
        raise InvalidSpecError("n must be at least 1")
    if spec.family == "cycle" and spec.n < 3:
        raise InvalidSpecError("a cycle needs n >= 3")
    if spec.family == "random_gnm":
        if spec.m_target is None or spec.m_target < 0:
            raise InvalidSpecError("random_gnm needs m_target >= 0")
        if spec.m_target > spec.n * (spec.n - 1) // 2:
            raise InvalidSpecError("m_target exceeds the number of vertex pairs")
    if spec.family == "random_regular":
        d = spec.degree
        if d is None or d < 0 or d >= spec.n or (d * spec.n) % 2:
            raise InvalidSpecError("random_regular needs 0 <= degree < n, n*degree even")
    if spec.diagonal_strategy not in ("degree_plus_delta", "uniform_constant"):
        raise InvalidSpecError(f"unknown diagonal strategy '{spec.diagonal_strategy}'")
    if spec.diagonal_strategy == "degree_plus_delta":
        lo, hi = spec.delta_range
        if not 0 < lo <= hi:
            raise InvalidSpecError("delta_range must satisfy 0 < lo <= hi")
    if spec.variants < 0:
        raise InvalidSpecError("variants must be nonnegative")
    if spec.edges_to_add is not None and spec.edges_to_add < 1:
        raise InvalidSpecError("edges_to_add must be at least 1")


def _grid_shape(n: int) -> tuple[int, int]:
    r = max(d for d in range(1, int(math.isqrt(n)) + 1) if n % d == 0)
    return r, n // r


def _family_edges(spec: GraphSpec, rng: np.random.Generator) -> np.ndarray:
    """Undirected edge list (E, 2) with i < j, no duplicates."""
    n = spec.n
    if spec.family == "path":
        i = np.arange(n - 1)
        return np.stack([i, i + 1], axis=1)
    if spec.family == "cycle":
        i = np.arange(n)
        j = (i + 1) % n
        return np.sort(np.stack([i, j], axis=1), axis=1)
    if spec.family == "grid2d":
        rows, cols = _grid_shape(n)
        idx = np.arange(n).reshape(rows, cols)
        right = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
        down = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
        return np.concatenate([right, down])
    if spec.family == "tree_random":
        if n == 1:
            return np.empty((0, 2), dtype=np.int64)
        child = np.arange(1, n)
        parent = (rng.random(n - 1) * child).astype(np.int64)  # uniform in [0, v)
        return np.stack([parent, child], axis=1)
    if spec.family == "star":
        leaf = np.arange(1, n)
        return np.stack([np.zeros(n - 1, dtype=np.int64), leaf], axis=1)
    if spec.family == "random_regular":
        seed = int(rng.integers(0, 2**31 - 1))
        g = nx.random_regular_graph(spec.degree, n, seed=seed)
        edges = np.array(sorted(tuple(sorted(e)) for e in g.edges()), dtype=np.int64)
        return edges.reshape(-1, 2)
    if spec.family == "random_gnm":
        iu, ju = np.triu_indices(n, k=1)
        pick = rng.choice(iu.size, size=spec.m_target, replace=False)
        pick.sort()
        return np.stack([iu[pick], ju[pick]], axis=1)
    raise InvalidSpecError(f"unknown family '{spec.family}'")


def _dominant_diagonal(
    degrees: np.ndarray,
    strategy: str,
    delta_range: tuple[float, float],
    constant: float | None,
    rng: np.random.Generator,
) -> np.ndarray:
    if strategy == "degree_plus_delta":
        lo, hi = delta_range
        return degrees + rng.uniform(lo, hi, degrees.size)
    if constant is None or not constant > degrees.max(initial=0):
        raise InvalidSpecError(
            "uniform_constant diagonal must exceed the maximum degree"
        )
    return np.full(degrees.size, float(constant))


def _assemble(n: int, edges: np.ndarray, diag: np.ndarray) -> SparseSymMatrix:
    triplets = [(int(i), int(j), 1.0) for i, j in edges]
    triplets.extend((v, v, float(diag[v])) for v in range(n))
    return from_coordinates(triplets, n, mirror=True)


def generate(spec: GraphSpec) -> SparseSymMatrix:
    """Deterministically build the strictly diagonally dominant SPD matrix."""
    _validate_spec(spec)
    rng = np.random.default_rng(spec.seed)
    edges = _family_edges(spec, rng)
    degrees = np.zeros(spec.n, dtype=np.int64)
    if edges.size:
        np.add.at(degrees, edges[:, 0], 1)
        np.add.at(degrees, edges[:, 1], 1)
    diag = _dominant_diagonal(
        degrees, spec.diagonal_strategy, spec.delta_range, spec.constant, rng
    )
    return _assemble(spec.n, edges, diag)


def _upper_edges(A: SparseSymMatrix) -> np.ndarray:
    row_of = np.repeat(np.arange(A.n), A.row_lengths())
    keep = A.col_indices > row_of
    return np.stack([row_of[keep], A.col_indices[keep]], axis=1)


def perturb(
    base: SparseSymMatrix,
    variants: int = 10,
    edges_to_add: int | None = None,
    seed: int = 0,
    diagonal_strategy: str = "degree_plus_delta",
    delta_range: tuple[float, float] = (0.1, 2.0),
    constant: float | None = None,
) -> list[SparseSymMatrix]:
    """Neighboring matrices: each adds distinct random non-edges to ``base``.

    The diagonal strategy is re-applied on the grown graph so strict
    dominance survives; a uniform constant that no longer dominates is
    bumped to one above the new maximum degree.
    """
    n = base.n
    base_edges = _upper_edges(base)
    if edges_to_add is None:
        edges_to_add = max(1, base_edges.shape[0] // 100)
    if edges_to_add < 1:
        raise ValueError("edges_to_add must be at least 1")
    offsets = np.arange(n) * n - np.arange(n) * (np.arange(n) + 1) // 2
    taken = np.zeros(n * (n - 1) // 2, dtype=bool)
    if base_edges.size:
        codes = (
            offsets[base_edges[:, 0]] + base_edges[:, 1] - base_edges[:, 0] - 1
        )
        taken[codes] = True
    free = np.nonzero(~taken)[0]
    if free.size < edges_to_add:
        raise GraphFullError(
            f"need {edges_to_add} new edges, only {free.size} non-edges remain"
        )

    out = []
    for child in np.random.SeedSequence(seed).spawn(variants):
        rng = np.random.default_rng(child)
        pick = rng.choice(free.size, size=edges_to_add, replace=False)
        codes = np.sort(free[pick])
        i = np.searchsorted(offsets, codes, side="right") - 1
        j = codes - offsets[i] + i + 1
        edges = np.concatenate([base_edges, np.stack([i, j], axis=1)])
        degrees = np.zeros(n, dtype=np.int64)
        np.add.at(degrees, edges[:, 0], 1)
        np.add.at(degrees, edges[:, 1], 1)
        c = constant
        if diagonal_strategy == "uniform_constant" and (
            c is None or not c > degrees.max(initial=0)
        ):
            c = float(degrees.max(initial=0) + 1)
        diag = _dominant_diagonal(degrees, diagonal_strategy, delta_range, c, rng)
        out.append(_assemble(n, edges, diag))
    return out


@dataclass(frozen=True)
class CostEntry:
    """Outcome of one solve during the sweep; eps1 None marks the pure
    binary64 baseline (N1 = 0 by definition)."""

    epsilon1: float | None
    n1: int
    n2: int
    cost: float


@dataclass
class SampleRecord:
    matrix_id: str
    group_id: str
    spec: GraphSpec | None
    features: FeatureVector
    costs: list[CostEntry]
    label: int | None
    i_opt: float | None
    i_wrst: float | None
    valid: bool = True

    def grid_cost(self, label: int) -> CostEntry:
        for entry in self.costs:
            if entry.epsilon1 is not None:
                label -= 1
                if label == 0:
                    return entry
        raise IndexError("class label beyond the recorded grid")

    def to_dict(self) -> dict:
        return {
            "matrix_id": self.matrix_id,
            "group_id": self.group_id,
            "spec": self.spec.to_dict() if self.spec else None,
            "features": dataclasses.asdict(self.features),
            "costs": [dataclasses.asdict(c) for c in self.costs],
            "label": self.label,
            "i_opt": self.i_opt,
            "i_wrst": self.i_wrst,
            "valid": self.valid,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SampleRecord":
        return cls(
            matrix_id=d["matrix_id"],
            group_id=d["group_id"],
            spec=GraphSpec.from_dict(d["spec"]) if d.get("spec") else None,
            features=FeatureVector(**d["features"]),
            costs=[CostEntry(**c) for c in d["costs"]],
            label=d["label"],
            i_opt=d["i_opt"],
            i_wrst=d["i_wrst"],
            valid=d["valid"],
        )


def ones_rhs(A: SparseSymMatrix) -> np.ndarray:
    """Right-hand side making the all-ones vector the exact solution."""
    return A @ np.ones(A.n, dtype=np.float64)


def label_matrix(
    A: SparseSymMatrix,
    b: np.ndarray,
    grid: EpsilonGrid,
    config: SolveConfig | None = None,
    matrix_id: str = "",
    group_id: str = "",
    spec: GraphSpec | None = None,
) -> SampleRecord:
    """Sweep every grid value of eps1 plus the pure binary64 baseline.

    The label is the grid class of minimum cost, ties resolved toward the
    larger eps1 (fewer reduced-precision iterations for the same price).
    A sweep whose refinement stage fails yields a record with
    ``valid=False`` that downstream consumers skip.
    """
    if config is None:
        config = SolveConfig(tolerance=grid.epsilon2)
    features = extract_features(A)
    solver = pcg_jacobi if config.preconditioner == "jacobi" else cg
    entries: list[CostEntry] = []
    valid = True
    for eps1 in grid.values:
        try:
            r = two_stage_solve(A, b, eps1, grid.epsilon2, grid.mu, config)
        except Exception as exc:  # noqa: BLE001 - any solver failure voids it
            log.warning("sweep failed for %s at eps1=%g: %s", matrix_id, eps1, exc)
            valid = False
            break
        entries.append(CostEntry(eps1, r.n1, r.n2, r.cost))
    if valid:
        # Pure binary64 run; like stage 2 it is bounded by max_iterations,
        # not by the binary32 stagnation guard.
        base = solver(A, b, None, no_stagnation(replace(config, tolerance=grid.epsilon2)))
        if base.status != "converged":
            log.warning("baseline failed for %s: %s", matrix_id, base.status)
            valid = False
        else:
            entries.append(CostEntry(None, 0, base.iterations, float(base.iterations)))

    if not valid:
        return SampleRecord(
            matrix_id, group_id, spec, features, entries, None, None, None, False
        )
    grid_entries = entries[:-1]
    best = min(grid_entries, key=lambda e: (e.cost, -e.epsilon1))
    label = grid_entries.index(best) + 1
    i_opt = best.cost
    i_wrst = max(e.cost for e in grid_entries)
    return SampleRecord(
        matrix_id, group_id, spec, features, entries, label, i_opt, i_wrst, True
    )


@dataclass
class DatasetManifest:
    format_version: int
    records_total: int
    records_valid: int
    structured: int
    groups: int
    grid_values: list[float]
    epsilon2: float
    mu: float
    preconditioner: str
    residual_mode: str
    spec_seeds: list[int]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def manifest_path(sample_path) -> str:
    return str(sample_path) + ".manifest.json"


def _label_one_spec(args) -> list[SampleRecord]:
    spec, grid, config, index = args
    records: list[SampleRecord] = []
    if spec.variants > 0:
        gid = f"g{index:05d}"
        try:
            base = generate(spec)
            mats = [(f"{gid}b", base)]
            variants = perturb(
                base,
                spec.variants,
                spec.edges_to_add,
                seed=spec.seed,
                diagonal_strategy=spec.diagonal_strategy,
                delta_range=spec.delta_range,
                constant=spec.constant,
            )
            mats.extend((f"{gid}v{v:02d}", M) for v, M in enumerate(variants))
        except Exception as exc:  # noqa: BLE001
            log.warning("generation failed for group %s: %s", gid, exc)
            return records
        for mid, M in mats:
            records.append(
                label_matrix(M, ones_rhs(M), grid, config, mid, gid, spec)
            )
    else:
        mid = f"s{index:05d}"
        try:
            M = generate(spec)
        except Exception as exc:  # noqa: BLE001
            log.warning("generation failed for %s: %s", mid, exc)
            return records
        records.append(label_matrix(M, ones_rhs(M), grid, config, mid, mid, spec))
    return records


def build_sample(
    specs: list[GraphSpec],
    grid: EpsilonGrid,
    out_path,
    config: SolveConfig | None = None,
    threads: int = 1,
) -> DatasetManifest:
    """Generate, label, and stream every spec's records to ``out_path``.

    Records appear in spec order regardless of worker count, so the output
    file is byte-identical for any ``threads`` value.  Per-matrix failures
    are logged and skipped.
    """
    if config is None:
        config = SolveConfig(tolerance=grid.epsilon2)
    jobs = [(spec, grid, config, i) for i, spec in enumerate(specs)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(_label_one_spec, jobs, chunksize=1))
    else:
        batches = [_label_one_spec(job) for job in jobs]
    records = [rec for batch in batches for rec in batch]
    manifest = DatasetManifest(
        format_version=1,
        records_total=len(records),
        records_valid=sum(r.valid for r in records),
        structured=sum(1 for s in specs if s.variants == 0),
        groups=sum(1 for s in specs if s.variants > 0),
        grid_values=list(grid.values),
        epsilon2=grid.epsilon2,
        mu=grid.mu,
        preconditioner=config.preconditioner,
        residual_mode=config.residual_mode,
        spec_seeds=[s.seed for s in specs],
    )
    write_sample(records, out_path, manifest)
    return manifest


def write_sample(
    records: list[SampleRecord], path, manifest: DatasetManifest | None = None
) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    if manifest is not None:
        with open(manifest_path(path), "w", encoding="ascii") as fh:
            fh.write(json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")


def read_sample(path, include_invalid: bool = False) -> list[SampleRecord]:
    records = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = SampleRecord.from_dict(json.loads(line))
            if rec.valid or include_invalid:
                records.append(rec)
    return records


def read_manifest(sample_path) -> dict:
    with open(manifest_path(sample_path), "r", encoding="ascii") as fh:
        return json.load(fh)


# Dominance margins from comfortable to razor-thin: the margin steers the
# conditioning, which steers how deep the binary32 stage can usefully go.
_DELTA_CHOICES = ((0.1, 2.0), (0.5, 5.0), (0.01, 0.1), (0.001, 0.01), (0.0001, 0.001))


def plan_specs(
    total: int = 550,
    n_range: tuple[int, int] = (200, 1000),
    structured_fraction: float = 0.27,
    variants: int = 10,
    seed: int = 0,
) -> list[GraphSpec]:
    """Spec mixture: structured families spanning the feature ranges plus
    base-and-perturbation groups of random graphs.

    ``total`` counts matrices, not specs; each perturbation group yields
    ``variants + 1`` matrices.  Structured specs rotate through the
    deterministic families with varied sizes, diagonal strategies, and
    dominance margins so that the pseudo-diameter, spread, and
    maximum-eigenvalue features all take values across their ranges.
    """
    if total < 1:
        raise ValueError("total must be positive")
    if not 0 < structured_fraction < 1:
        raise ValueError("structured_fraction must lie in (0, 1)")
    n_lo, n_hi = n_range
    if not 2 <= n_lo <= n_hi:
        raise ValueError("n_range must satisfy 2 <= lo <= hi")
    rng = np.random.default_rng(seed)
    n_structured = max(1, round(total * structured_fraction))
    n_groups = max(1, math.ceil((total - n_structured) / (variants + 1)))

    structured_families = ("path", "cycle", "grid2d", "tree_random", "star", "random_regular")
    specs: list[GraphSpec] = []
    for i in range(n_structured):
        family = structured_families[i % len(structured_families)]
        n = int(rng.integers(n_lo, n_hi + 1))
        spec_seed = int(rng.integers(0, 2**62))
        delta = _DELTA_CHOICES[int(rng.integers(len(_DELTA_CHOICES)))]
        strategy = "degree_plus_delta"
        constant = None
        degree = None
        if family == "random_regular":
            degree = int(rng.choice([3, 4, 6, 8]))
            if (n * degree) % 2:
                n += 1
        if family in ("path", "cycle", "grid2d", "random_regular") and i % 2:
            strategy = "uniform_constant"
            base_deg = {"path": 2, "cycle": 2, "grid2d": 4}.get(family, degree)
            constant = float(base_deg) + float(rng.uniform(0.5, 6.0))
        specs.append(
            GraphSpec(
                family=family,
                n=n,
                seed=spec_seed,
                degree=degree,
                diagonal_strategy=strategy,
                delta_range=delta,
                constant=constant,
            )
        )
    for _ in range(n_groups):
        n = int(rng.integers(n_lo, n_hi + 1))
        # Log-uniform density: near-tree graphs (ill-conditioned under thin
        # margins) through comfortably dense ones.
        density = float(np.exp(rng.uniform(np.log(1.05), np.log(4.0))))
        m_target = min(int(n * density), n * (n - 1) // 2)
        spec_seed = int(rng.integers(0, 2**62))
        delta = _DELTA_CHOICES[int(rng.integers(len(_DELTA_CHOICES)))]
        specs.append(
            GraphSpec(
                family="random_gnm",
                n=n,
                seed=spec_seed,
                m_target=m_target,
                delta_range=delta,
                variants=variants,
            )
        )
    return specs
