"""Data ensembles: anisotropic sub-Gaussian, exact-orthogonal, prescribed
diagonal-Gram, plus effective dimensions and dataset persistence.

Generation is pure given a seed; parallel trials derive independent streams
through ``np.random.SeedSequence(seed, spawn_key=(trial,))``.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    InvalidDatasetError,
    InvalidParameterError,
    NormalizationViolationError,
)
from .losses import MulticlassEncoding, build_encoding

GAUSSIAN = "gaussian"
RADEMACHER = "rademacher"

SCHEMA_VERSION = "1"

# keeps the max row norm strictly <= 1 after dividing by the max norm
_NORM_SLACK = 1.0 - 1e-12


@dataclass(frozen=True)
class EffectiveDims:
    """Spectrum-based overparameterization measures."""

    d2: float      # ||lambda||_1^2 / ||lambda||_2^2
    d_inf: float   # ||lambda||_1 / ||lambda||_inf


@dataclass(frozen=True)
class Dataset:
    """Design matrix with labels and generation metadata.

    ``labels`` is either a +-1 vector (binary) or class indices in 1..K.
    ``rescale`` is the single global factor applied to meet the row-norm cap;
    direction-level quantities downstream are unaffected by it.
    """

    X: np.ndarray
    labels: np.ndarray
    ensemble: dict
    seed: int
    lam: Optional[np.ndarray] = None
    rescale: float = 1.0
    n_classes: int = 0  # 0 means binary +-1 labels

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def gram(self) -> np.ndarray:
        return self.X @ self.X.T

    @property
    def is_binary(self) -> bool:
        return self.n_classes == 0


def rng_for(seed: int, trial: Optional[int] = None) -> np.random.Generator:
    """Deterministic stream; trial indices spawn independent children."""
    ss = np.random.SeedSequence(int(seed))
    if trial is not None:
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial),))
    return np.random.default_rng(ss)


def effective_dims(lam) -> EffectiveDims:
    lam = np.asarray(lam, dtype=np.float64)
    if lam.size == 0 or np.any(lam < 0) or not np.any(lam > 0):
        raise InvalidParameterError("spectrum must be nonnegative with at least one positive entry")
    l1 = lam.sum()
    return EffectiveDims(d2=float(l1 ** 2 / (lam ** 2).sum()), d_inf=float(l1 / lam.max()))


def _binary_labels(rng: np.random.Generator, n: int) -> np.ndarray:
    y = rng.integers(0, 2, size=n) * 2 - 1
    return y.astype(np.float64)


def _class_labels(rng: np.random.Generator, n: int, K: int) -> np.ndarray:
    if n < K:
        raise InvalidDatasetError(f"need n >= K to cover every class, got n={n}, K={K}")
    y = np.concatenate([np.arange(1, K + 1), rng.integers(1, K + 1, size=n - K)])
    rng.shuffle(y)
    return y.astype(np.int64)


def gen_subgaussian(n: int, d: int, lam, entry_dist: str = GAUSSIAN,
                    seed: int = 0, n_classes: int = 0,
                    norm_cap: float = 1.0) -> Dataset:
    """Rows diag(lam)^{1/2} z_i with i.i.d. unit-variance entries, globally
    rescaled so the max row norm equals ``norm_cap``."""
    if n < 1 or d < 1:
        raise InvalidParameterError("n and d must be positive")
    lam = np.asarray(lam, dtype=np.float64)
    if lam.size == 1:
        lam = np.full(d, float(lam))
    if lam.size != d:
        raise InvalidParameterError(f"spectrum length {lam.size} != d = {d}")
    if np.any(lam < 0) or not np.any(lam > 0):
        raise InvalidParameterError("spectrum must be nonnegative with a positive entry")
    if n > d:
        warnings.warn("n > d: the Gram matrix will be singular; downstream "
                      "solvers need d >= n", stacklevel=2)
    rng = rng_for(seed)
    if entry_dist == GAUSSIAN:
        Z = rng.standard_normal((n, d))
    elif entry_dist == RADEMACHER:
        Z = (rng.integers(0, 2, size=(n, d)) * 2 - 1).astype(np.float64)
    else:
        raise InvalidParameterError(f"unknown entry distribution {entry_dist!r}")
    X = Z * np.sqrt(lam)[None, :]
    scale = norm_cap * _NORM_SLACK / np.max(np.linalg.norm(X, axis=1))
    X = X * scale
    labels = _binary_labels(rng, n) if n_classes == 0 else _class_labels(rng, n, n_classes)
    return Dataset(X=X, labels=labels, lam=lam,
                   ensemble={"name": "subgaussian", "entry": entry_dist, "v": 1.0,
                             "norm_cap": norm_cap},
                   seed=int(seed), rescale=float(scale), n_classes=n_classes)


def _orthonormal_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    A = rng.standard_normal((d, n))
    Q, R = np.linalg.qr(A)
    diag = np.diag(R)
    if np.any(np.abs(diag) < 1e-12):
        raise InvalidParameterError("random matrix was rank deficient")
    # fix signs so the factorization is unique
    Q = Q * np.sign(diag)[None, :]
    return Q.T


def gen_orthogonal(n: int, d: int, alpha: float, seed: int = 0,
                   n_classes: int = 0) -> Dataset:
    """X = sqrt(alpha) Q with orthonormal rows Q, so X X^T = alpha I exactly."""
    if d < n:
        raise InvalidParameterError(f"orthogonal rows need d >= n, got n={n}, d={d}")
    if not 0 < alpha:
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    if alpha > 1.0:
        raise NormalizationViolationError(
            f"alpha = {alpha} gives row norms sqrt(alpha) > 1")
    rng = rng_for(seed)
    X = np.sqrt(alpha) * _orthonormal_rows(rng, n, d)
    labels = _binary_labels(rng, n) if n_classes == 0 else _class_labels(rng, n, n_classes)
    return Dataset(X=X, labels=labels, lam=None,
                   ensemble={"name": "orthogonal", "alpha": float(alpha)},
                   seed=int(seed), rescale=1.0, n_classes=n_classes)


def gen_diagonal_gram(n: int, d: int, dvec, seed: int = 0,
                      n_classes: int = 0) -> Dataset:
    """Orthogonal rows with prescribed squared norms, X X^T = diag(dvec)."""
    dvec = np.asarray(dvec, dtype=np.float64)
    if dvec.size != n:
        raise InvalidParameterError(f"dvec length {dvec.size} != n = {n}")
    if d < n:
        raise InvalidParameterError(f"orthogonal rows need d >= n, got n={n}, d={d}")
    if np.any(dvec <= 0) or np.any(dvec > 1.0):
        raise InvalidParameterError("diagonal Gram entries must lie in (0, 1]")
    rng = rng_for(seed)
    X = np.sqrt(dvec)[:, None] * _orthonormal_rows(rng, n, d)
    labels = _binary_labels(rng, n) if n_classes == 0 else _class_labels(rng, n, n_classes)
    return Dataset(X=X, labels=labels, lam=None,
                   ensemble={"name": "diagonal_gram", "dvec": dvec.tolist()},
                   seed=int(seed), rescale=1.0, n_classes=n_classes)


def encode_multiclass(labels, scheme: str, K: int) -> MulticlassEncoding:
    """Dataset-level encoding: labels in 1..K with every class present."""
    labels = np.asarray(labels, dtype=np.int64)
    present = set(np.unique(labels).tolist())
    missing = sorted(set(range(1, K + 1)) - present)
    if missing:
        raise InvalidDatasetError(f"classes {missing} have no examples")
    return build_encoding(labels, scheme, K)


# ---------------------------------------------------------------------------
# persistence: <name>.csv (rows = examples, final column = label)
#              <name>.meta.json (ensemble, lambda, seed, rescale, schema)
# ---------------------------------------------------------------------------


def save_dataset(ds: Dataset, stem, extra_meta: Optional[dict] = None) -> None:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    with open(stem.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        for row, lab in zip(ds.X, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(lab))])
    meta = {
        "schema_version": SCHEMA_VERSION,
        "ensemble": ds.ensemble,
        "lambda": None if ds.lam is None else np.asarray(ds.lam).tolist(),
        "seed": ds.seed,
        "rescale": ds.rescale,
        "n_classes": ds.n_classes,
        "n": ds.n,
        "d": ds.d,
        **(extra_meta or {}),
    }
    with open(stem.parent / (stem.name + ".meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)


def load_dataset(stem) -> Dataset:
    stem = Path(stem)
    with open(stem.parent / (stem.name + ".meta.json")) as fh:
        meta = json.load(fh)
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise InvalidDatasetError(f"unsupported schema version {meta.get('schema_version')!r}")
    rows = []
    with open(stem.with_suffix(".csv"), newline="") as fh:
        for rec in csv.reader(fh):
            rows.append([float(v) for v in rec])
    arr = np.asarray(rows, dtype=np.float64)
    X, raw_labels = arr[:, :-1], arr[:, -1]
    n_classes = int(meta["n_classes"])
    labels = raw_labels.astype(np.int64) if n_classes else raw_labels
    lam = meta["lambda"]
    return Dataset(X=X, labels=labels,
                   ensemble=meta["ensemble"], seed=int(meta["seed"]),
                   lam=None if lam is None else np.asarray(lam, dtype=np.float64),
                   rescale=float(meta["rescale"]), n_classes=n_classes)
