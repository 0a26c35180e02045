"""Nearest-neighbor prediction of the stage-1 tolerance class.

Feature vectors are mapped onto [0, 1]^5 with per-feature min-max
normalization fitted on the training sample, and test vectors are
classified by majority vote among the k nearest training vectors under
Euclidean distance.  Evaluation never re-solves anything: the cost of the
predicted class is read straight from the sweep stored in each record.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .dataset import SampleRecord
from .errors import (
    EmptyTrainingSetError,
    MissingCostEntryError,
    SampleTooSmallError,
)
from .features import FeatureVector

__all__ = [
    "NormalizationParams",
    "KnnModel",
    "EvalRow",
    "EvalReport",
    "minimax_fit",
    "minimax_apply",
    "split",
    "fit_knn",
    "knn_predict",
    "evaluate",
    "save_model",
    "load_model",
    "save_report",
]


@dataclass(frozen=True)
class NormalizationParams:
    mins: np.ndarray
    maxs: np.ndarray


def _feature_matrix(features) -> np.ndarray:
    rows = [
        f.as_array() if isinstance(f, FeatureVector) else np.asarray(f, dtype=float)
        for f in features
    ]
    if not rows:
        raise EmptyTrainingSetError("no feature vectors supplied")
    return np.stack(rows)


def minimax_fit(train_features) -> NormalizationParams:
    """Per-feature minima and maxima over the training vectors."""
    mat = _feature_matrix(train_features)
    return NormalizationParams(mat.min(axis=0), mat.max(axis=0))


def minimax_apply(params: NormalizationParams, chi) -> np.ndarray:
    """Map a feature vector onto [0, 1]^5.

    A feature that was constant on the training sample maps to 0.5; test
    values outside the training range clamp to the nearest endpoint.
    """
    chi = chi.as_array() if isinstance(chi, FeatureVector) else np.asarray(chi, float)
    span = params.maxs - params.mins
    degenerate = span == 0
    scaled = np.where(
        degenerate, 0.5, (chi - params.mins) / np.where(degenerate, 1.0, span)
    )
    return np.clip(scaled, 0.0, 1.0)


def split(
    records: list[SampleRecord],
    test_fraction: float = 0.1,
    seed: int = 0,
    group_aware: bool = True,
) -> tuple[list[SampleRecord], list[SampleRecord]]:
    """Deterministic train/test split.

    With ``group_aware`` a base matrix and its perturbed variants always
    land on the same side, which keeps the test honest: variants of a
    training matrix sit almost on top of it in feature space.  Whole
    shuffled groups move to the test side until it holds round(fraction*N)
    records.  ``group_aware=False`` treats every record as its own group.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    if not records:
        raise SampleTooSmallError("no records to split")
    members: dict = {}
    for i, rec in enumerate(records):
        key = rec.group_id if group_aware else i
        members.setdefault(key, []).append(i)
    keys = list(members)
    target = int(np.floor(test_fraction * len(records) + 0.5))
    if target < 1:
        raise SampleTooSmallError("test side would be empty")
    rng = np.random.default_rng(seed)
    test_positions: set[int] = set()
    for pos in rng.permutation(len(keys)):
        if len(test_positions) >= target:
            break
        test_positions.update(members[keys[pos]])
    train = [r for i, r in enumerate(records) if i not in test_positions]
    test = [r for i, r in enumerate(records) if i in test_positions]
    if not train:
        raise SampleTooSmallError("train side would be empty")
    return train, test


@dataclass
class KnnModel:
    """Normalization, normalized training points with labels, and k."""

    normalization: NormalizationParams
    points: np.ndarray  # (N, 5) in [0, 1]
    labels: np.ndarray  # (N,) grid class labels
    k: int
    grid_values: tuple[float, ...]
    train_ids: tuple[str, ...] = ()
    test_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not 1 <= self.k <= len(self.points):
            raise ValueError("k must lie in 1..len(points)")


def fit_knn(
    train: list[SampleRecord], k: int, test_ids: tuple[str, ...] = ()
) -> KnnModel:
    """Build the model from labeled training records."""
    usable = [r for r in train if r.valid and r.label is not None]
    if not usable:
        raise EmptyTrainingSetError("no valid labeled records")
    grids = {tuple(e.epsilon1 for e in r.costs if e.epsilon1 is not None) for r in usable}
    if len(grids) != 1:
        raise ValueError("training records were swept on different grids")
    params = minimax_fit([r.features for r in usable])
    points = np.stack([minimax_apply(params, r.features) for r in usable])
    labels = np.array([r.label for r in usable], dtype=np.int64)
    return KnnModel(
        normalization=params,
        points=points,
        labels=labels,
        k=k,
        grid_values=grids.pop(),
        train_ids=tuple(r.matrix_id for r in usable),
        test_ids=test_ids,
    )


def knn_predict(model: KnnModel, chi) -> int:
    """Majority vote among the k nearest training points.

    Equal distances are resolved by training order (stable sort); a tied
    vote goes to the class with the larger eps1, matching how labels break
    their own ties.
    """
    q = minimax_apply(model.normalization, chi)
    d2 = np.einsum("ij,ij->i", model.points - q, model.points - q)
    nearest = np.argsort(d2, kind="stable")[: model.k]
    votes = np.bincount(model.labels[nearest], minlength=len(model.grid_values) + 1)
    return int(np.nonzero(votes == votes.max())[0][0])


@dataclass
class EvalRow:
    matrix_id: str
    true_label: int
    predicted_label: int
    i_opt: float
    i_knn: float
    i_wrst: float


@dataclass
class EvalReport:
    rows: list[EvalRow]
    n_opt: float
    n_knn: float
    n_wrst: float
    ratio_opt_wrst: float
    ratio_knn_wrst: float
    diff_knn_opt: float
    diff_wrst_knn: float
    confusion: np.ndarray  # true class x predicted class, 1-based labels

    def to_dict(self) -> dict:
        return {
            "rows": [dataclasses.asdict(r) for r in self.rows],
            "n_opt": self.n_opt,
            "n_knn": self.n_knn,
            "n_wrst": self.n_wrst,
            "ratio_opt_wrst": self.ratio_opt_wrst,
            "ratio_knn_wrst": self.ratio_knn_wrst,
            "diff_knn_opt": self.diff_knn_opt,
            "diff_wrst_knn": self.diff_wrst_knn,
            "confusion": self.confusion.tolist(),
        }

    def format_table(self) -> str:
        lines = [
            f"matrices evaluated : {len(self.rows)}",
            f"N_Opt  = {self.n_opt:12.1f}",
            f"N_kNN  = {self.n_knn:12.1f}",
            f"N_Wrst = {self.n_wrst:12.1f}",
            f"N_Opt / N_Wrst = {self.ratio_opt_wrst:.4f}",
            f"N_kNN / N_Wrst = {self.ratio_knn_wrst:.4f}",
            f"N_kNN - N_Opt  = {self.diff_knn_opt:.1f}",
            f"N_Wrst - N_kNN = {self.diff_wrst_knn:.1f}",
            "full-scale reference ratios: 0.86 / 0.86",
            "confusion (rows true class, cols predicted):",
        ]
        c = self.confusion
        width = max(3, len(str(int(c.max(initial=0)))))
        header = "     " + " ".join(f"{j:>{width}}" for j in range(1, c.shape[1] + 1))
        lines.append(header)
        for i in range(c.shape[0]):
            lines.append(
                f"  {i + 1:>2} "
                + " ".join(f"{int(v):>{width}}" for v in c[i])
            )
        return "\n".join(lines)


def _cost_of_class(rec: SampleRecord, label: int, grid_values) -> float:
    eps1 = grid_values[label - 1]
    for entry in rec.costs:
        if entry.epsilon1 == eps1:
            return entry.cost
    raise MissingCostEntryError(
        f"record {rec.matrix_id} has no cost entry for eps1={eps1}"
    )


def evaluate(model: KnnModel, test: list[SampleRecord]) -> EvalReport:
    """Score predictions against the stored sweeps of the test records."""
    usable = [r for r in test if r.valid and r.label is not None]
    if not usable:
        raise SampleTooSmallError("no valid records to evaluate")
    n_classes = len(model.grid_values)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    rows = []
    for rec in usable:
        pred = knn_predict(model, rec.features)
        i_knn = _cost_of_class(rec, pred, model.grid_values)
        row = EvalRow(rec.matrix_id, rec.label, pred, rec.i_opt, i_knn, rec.i_wrst)
        if not row.i_opt <= row.i_knn <= row.i_wrst:
            raise AssertionError(
                f"cost ordering violated for {rec.matrix_id}: "
                f"{row.i_opt} / {row.i_knn} / {row.i_wrst}"
            )
        confusion[rec.label - 1, pred - 1] += 1
        rows.append(row)
    n_opt = float(sum(r.i_opt for r in rows))
    n_knn = float(sum(r.i_knn for r in rows))
    n_wrst = float(sum(r.i_wrst for r in rows))
    return EvalReport(
        rows=rows,
        n_opt=n_opt,
        n_knn=n_knn,
        n_wrst=n_wrst,
        ratio_opt_wrst=n_opt / n_wrst,
        ratio_knn_wrst=n_knn / n_wrst,
        diff_knn_opt=n_knn - n_opt,
        diff_wrst_knn=n_wrst - n_knn,
        confusion=confusion,
    )


def save_model(model: KnnModel, path, split: dict | None = None) -> None:
    """Persist the model; ``split`` echoes the settings that produced it."""
    payload = {
        "format_version": 1,
        "k": model.k,
        "grid_values": list(model.grid_values),
        "mins": model.normalization.mins.tolist(),
        "maxs": model.normalization.maxs.tolist(),
        "points": model.points.tolist(),
        "labels": model.labels.tolist(),
        "train_ids": list(model.train_ids),
        "test_ids": list(model.test_ids),
        "split": split,
    }
    with open(path, "w", encoding="ascii") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def load_model(path) -> KnnModel:
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    return KnnModel(
        normalization=NormalizationParams(
            np.array(payload["mins"], dtype=float),
            np.array(payload["maxs"], dtype=float),
        ),
        points=np.array(payload["points"], dtype=float).reshape(
            len(payload["labels"]), -1
        ),
        labels=np.array(payload["labels"], dtype=np.int64),
        k=payload["k"],
        grid_values=tuple(payload["grid_values"]),
        train_ids=tuple(payload["train_ids"]),
        test_ids=tuple(payload["test_ids"]),
    )


def save_report(report: EvalReport, path, meta: dict | None = None) -> None:
    payload = report.to_dict()
    if meta:
        payload["meta"] = meta
    with open(path, "w", encoding="ascii") as fh:
        fh.write(json.dumps(payload, sort_keys=True) + "\n")
