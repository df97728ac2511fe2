"""One-vs-rest L2-regularized squared-hinge linear SVM.

The binary subproblem

    min_w  0.5 ||w||^2 + C * sum_i max(0, 1 - y_i w.x_i)^2

is solved in the dual by coordinate descent with the closed-form projected
update alpha_i <- max(0, alpha_i - G_i / (||x_i||^2 + 1/(2C))), where
G_i = y_i w.x_i - 1 + alpha_i/(2C) and w = sum_i alpha_i y_i x_i is
maintained incrementally. Coordinates are visited in a seeded random
permutation per sweep; the solve stops when the largest projected-gradient
violation in a sweep drops below tol.

The sweep itself runs in a compiled Cython kernel when available, with a
pure-Python fallback selected at import time (force the fallback by setting
SUMAUG_PURE_PYTHON=1 before import). `benchmarks/bench_dcd.py` compares the
two.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..vectorize import SparseVector
from . import _dcd_py

try:
    from . import _dcd as _dcd_c
except ImportError:
    _dcd_c = None

if os.environ.get("SUMAUG_PURE_PYTHON"):
    _kernel = _dcd_py
else:
    _kernel = _dcd_c if _dcd_c is not None else _dcd_py

MODEL_FORMAT_VERSION = 1


def kernel_backend() -> str:
    """Name of the sweep kernel selected at import ('compiled' or 'python')."""
    return _kernel.BACKEND


class ConvergenceWarning(UserWarning):
    pass


class SvmError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    tol: float = 1e-4
    max_sweeps: int = 1000
    fit_intercept: bool = True
    intercept_scaling: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.C <= 0:
            raise SvmError("C must be positive")
        if self.tol <= 0:
            raise SvmError("tol must be positive")
        if self.max_sweeps < 1:
            raise SvmError("max_sweeps must be positive")


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # one row per class; last column is the intercept weight
    class_names: tuple[str, ...]
    n_features: int
    fit_intercept: bool
    intercept_scaling: float
    converged: tuple[bool, ...]


@dataclass(frozen=True)
class _Csr:
    values: np.ndarray
    col_idx: np.ndarray
    indptr: np.ndarray
    n_rows: int
    dim: int


@dataclass(frozen=True)
class DcdSolution:
    w: np.ndarray
    converged: bool
    n_sweeps: int
    dual_objectives: tuple[float, ...]


def _to_csr(X: Sequence[SparseVector], fit_intercept: bool, intercept_scaling: float) -> _Csr:
    if not X:
        raise SvmError("empty training set")
    n_features = X[0].dim
    values, cols, indptr = [], [], [0]
    for x in X:
        if x.dim != n_features:
            raise SvmError(f"inconsistent feature dims: {x.dim} vs {n_features}")
        values.append(np.asarray(x.values, dtype=np.float64))
        cols.append(np.asarray(x.indices, dtype=np.int64))
        if fit_intercept:
            values.append(np.array([intercept_scaling], dtype=np.float64))
            cols.append(np.array([n_features], dtype=np.int64))
        indptr.append(indptr[-1] + x.nnz + (1 if fit_intercept else 0))
    dim = n_features + (1 if fit_intercept else 0)
    return _Csr(
        values=np.concatenate(values),
        col_idx=np.concatenate(cols),
        indptr=np.array(indptr, dtype=np.int64),
        n_rows=len(X),
        dim=dim,
    )


def _row_sq_norms(csr: _Csr) -> np.ndarray:
    sq = csr.values * csr.values
    norms = np.empty(csr.n_rows, dtype=np.float64)
    for i in range(csr.n_rows):
        norms[i] = sq[csr.indptr[i] : csr.indptr[i + 1]].sum()
    return norms


def _dual_objective(alpha: np.ndarray, w: np.ndarray, inv_2c: float) -> float:
    return float(alpha.sum() - 0.5 * np.dot(w, w) - 0.5 * inv_2c * np.dot(alpha, alpha))


def _solve_csr(
    csr: _Csr,
    y: np.ndarray,
    cfg: TrainConfig,
    track_objective: bool = False,
    _sweep=None,
) -> DcdSolution:
    sweep = _sweep if _sweep is not None else _kernel.sweep
    n = csr.n_rows
    inv_2c = 1.0 / (2.0 * cfg.C)
    diag = _row_sq_norms(csr) + inv_2c
    alpha = np.zeros(n, dtype=np.float64)
    w = np.zeros(csr.dim, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    objectives: list[float] = []
    converged = False
    sweeps_run = 0
    for _ in range(cfg.max_sweeps):
        perm = rng.permutation(n).astype(np.int64)
        viol = sweep(csr.values, csr.col_idx, csr.indptr, y, diag, inv_2c, alpha, w, perm)
        sweeps_run += 1
        if track_objective:
            objectives.append(_dual_objective(alpha, w, inv_2c))
        if viol < cfg.tol:
            converged = True
            break
    return DcdSolution(
        w=w, converged=converged, n_sweeps=sweeps_run, dual_objectives=tuple(objectives)
    )


def _check_binary_labels(y: np.ndarray) -> None:
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SvmError("binary labels must be +1 or -1")
    if not ((y == 1.0).any() and (y == -1.0).any()):
        raise SvmError("training data must contain both classes")


def train_binary(
    X: Sequence[SparseVector],
    y: Sequence[float],
    cfg: TrainConfig = TrainConfig(),
    track_objective: bool = False,
) -> np.ndarray:
    """Train one binary classifier; returns the (intercept-augmented) weights."""
    y_arr = np.asarray(y, dtype=np.float64)
    if len(X) != len(y_arr):
        raise SvmError("X and y length mismatch")
    _check_binary_labels(y_arr)
    csr = _to_csr(X, cfg.fit_intercept, cfg.intercept_scaling)
    sol = _solve_csr(csr, y_arr, cfg, track_objective=track_objective)
    if not sol.converged:
        warnings.warn(
            f"coordinate descent did not converge in {cfg.max_sweeps} sweeps",
            ConvergenceWarning,
            stacklevel=2,
        )
    return sol.w


def train_ovr(
    X: Sequence[SparseVector],
    labels: Sequence[str],
    cfg: TrainConfig = TrainConfig(),
) -> LinearModel:
    """One binary subproblem per class (class vs rest), rows in sorted label order."""
    if len(X) != len(labels):
        raise SvmError("X and labels length mismatch")
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise SvmError("need at least 2 distinct labels")
    csr = _to_csr(X, cfg.fit_intercept, cfg.intercept_scaling)
    labels_arr = np.asarray(labels)
    weights = np.empty((len(classes), csr.dim), dtype=np.float64)
    converged = []
    for row, cls in enumerate(classes):
        y = np.where(labels_arr == cls, 1.0, -1.0)
        sol = _solve_csr(csr, y, cfg)
        if not sol.converged:
            warnings.warn(
                f"class {cls!r}: no convergence in {cfg.max_sweeps} sweeps",
                ConvergenceWarning,
                stacklevel=2,
            )
        weights[row] = sol.w
        converged.append(sol.converged)
    if not np.all(np.isfinite(weights)):
        raise SvmError("non-finite weights after training")
    return LinearModel(
        weights=weights,
        class_names=classes,
        n_features=csr.dim - (1 if cfg.fit_intercept else 0),
        fit_intercept=cfg.fit_intercept,
        intercept_scaling=cfg.intercept_scaling,
        converged=tuple(converged),
    )


def decision_function(model: LinearModel, x: SparseVector) -> np.ndarray:
    if x.dim != model.n_features:
        raise SvmError(f"feature dim {x.dim} does not match model ({model.n_features})")
    idx = np.asarray(x.indices, dtype=np.int64)
    vals = np.asarray(x.values, dtype=np.float64)
    scores = model.weights[:, idx] @ vals if len(idx) else np.zeros(len(model.class_names))
    if model.fit_intercept:
        scores = scores + model.weights[:, model.n_features] * model.intercept_scaling
    return scores


def predict(model: LinearModel, x: SparseVector) -> str:
    """Class with the maximal decision value; ties go to the smaller name."""
    scores = decision_function(model, x)
    return model.class_names[int(np.argmax(scores))]


def predict_many(model: LinearModel, X: Sequence[SparseVector]) -> list[str]:
    return [predict(model, x) for x in X]


def save_model(model: LinearModel, path) -> None:
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "class_names": list(model.class_names),
        "n_features": model.n_features,
        "fit_intercept": model.fit_intercept,
        "intercept_scaling": model.intercept_scaling,
        "converged": list(model.converged),
    }
    with open(path, "wb") as fh:
        np.savez(fh, weights=model.weights, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8))


def load_model(path) -> LinearModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("format_version") != MODEL_FORMAT_VERSION:
            raise SvmError(f"unsupported model version {meta.get('format_version')!r}")
        return LinearModel(
            weights=data["weights"],
            class_names=tuple(meta["class_names"]),
            n_features=meta["n_features"],
            fit_intercept=meta["fit_intercept"],
            intercept_scaling=meta["intercept_scaling"],
            converged=tuple(meta["converged"]),
        )
