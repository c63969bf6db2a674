"""Ingestion, validation, summary statistics, normalization and synthesis of
MMP databanks.

A databank is a table of five inputs describing an N2 / crude oil system
plus the measured minimum miscibility pressure (MMP, MPa)::

    tcm, volatile, intermediate, mwc7plus, temperature, mmp

Column order is fixed and is the order used for every design matrix in the
package.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import (
    EmptyDatasetError,
    InsufficientDataError,
    ParseError,
    ScalerError,
    SchemaError,
)

FEATURE_NAMES = ("tcm", "volatile", "intermediate", "mwc7plus", "temperature")
TARGET_NAME = "mmp"
COLUMNS = FEATURE_NAMES + (TARGET_NAME,)

# Ranges and moments of the published databank (min, max, mean, std).
REFERENCE_STATS = {
    "tcm": (126.1, 268.7372, 165.8122, 47.3308),
    "volatile": (0.0, 0.6055, 0.3574, 0.1641),
    "intermediate": (0.1167, 0.6376, 0.2335, 0.0968),
    "mwc7plus": (140.0, 290.0, 212.2841, 46.2212),
    "temperature": (333.1667, 464.2167, 387.3606, 27.8338),
    "mmp": (22.10, 64.8107, 37.8111, 9.4333),
}


class OutOfRangeWarning(UserWarning):
    """A value lies outside the range covered by the reference databank."""


class FeatureVector(NamedTuple):
    tcm: float
    volatile: float
    intermediate: float
    mwc7plus: float
    temperature: float


class Sample(NamedTuple):
    features: FeatureVector
    mmp: float


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable ``N x 5`` input matrix plus target vector.

    Row order is significant: partition indices refer to it.  The constructor
    only checks shapes; domain invariants are enforced by :func:`validate`,
    which the loaders call.  Normalized copies produced by
    :meth:`Scaler.apply` are still ``Dataset`` instances.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = FEATURE_NAMES

    def __post_init__(self):
        X = _freeze(self.X)
        y = _freeze(self.y)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(f"X must have shape (N, {len(self.feature_names)}), got {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"y must have shape ({X.shape[0]},), got {y.shape}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self):
        return self.X.shape[0]

    @property
    def samples(self):
        return [Sample(FeatureVector(*map(float, x)), float(t)) for x, t in zip(self.X, self.y)]

    def subset(self, indices):
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.feature_names)

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        X = np.array([list(s.features) for s in samples], dtype=float).reshape(len(samples), 5)
        y = np.array([s.mmp for s in samples], dtype=float)
        return cls(X, y)


def _check_value(name, value, row):
    if not math.isfinite(value):
        raise ParseError(row, name, f"non-finite value {value!r}")
    if name == "volatile" and not 0.0 <= value <= 1.0:
        raise ParseError(row, name, f"mole fraction {value} outside [0, 1]")
    elif name == "intermediate" and not 0.0 < value <= 1.0:
        raise ParseError(row, name, f"mole fraction {value} outside (0, 1]")
    elif name in ("tcm", "mwc7plus", "temperature", "mmp") and not value > 0.0:
        raise ParseError(row, name, f"value {value} must be positive")


def validate(data: Dataset, warn_out_of_range: bool = True) -> None:
    """Check the per-sample invariants; rows are reported 1-based."""
    table = np.column_stack([data.X, data.y])
    for i, row in enumerate(table, start=1):
        for name, value in zip(COLUMNS, row):
            _check_value(name, float(value), i)
    if warn_out_of_range:
        for j, name in enumerate(COLUMNS):
            lo, hi = REFERENCE_STATS[name][:2]
            col = table[:, j]
            n_out = int(np.sum((col < lo) | (col > hi)))
            if n_out:
                warnings.warn(
                    f"{n_out} value(s) of {name!r} outside reference range [{lo}, {hi}]",
                    OutOfRangeWarning,
                    stacklevel=2,
                )


def _read_table(path, required):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(required[0], "file is empty (no header row)") from None
        for col in required:
            if col not in header:
                raise SchemaError(col)
        positions = [header.index(c) for c in required]
        rows = []
        for lineno, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            values = []
            for name, pos in zip(required, positions):
                try:
                    cell = record[pos].strip()
                except IndexError:
                    raise ParseError(lineno, name, "missing cell") from None
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(lineno, name, f"non-numeric value {cell!r}") from None
                if not math.isfinite(v):
                    raise ParseError(lineno, name, f"non-finite value {cell!r}")
                values.append(v)
            rows.append(values)
    return header, rows


def load_csv(path) -> Dataset:
    """Read a databank CSV.  Extra columns are ignored; row order is kept."""
    _, rows = _read_table(path, COLUMNS)
    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows")
    table = np.array(rows, dtype=float)
    data = Dataset(table[:, :5], table[:, 5])
    validate(data)
    return data


def load_inputs(path):
    """Read the five input columns; zero rows is allowed.

    Returns ``(X, y)`` where ``y`` is ``None`` unless an ``mmp`` column is
    present.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    has_target = TARGET_NAME in header
    _, rows = _read_table(path, COLUMNS if has_target else FEATURE_NAMES)
    width = 6 if has_target else 5
    table = np.array(rows, dtype=float).reshape(len(rows), width)
    for i, row in enumerate(table, start=1):
        for name, value in zip(FEATURE_NAMES, row[:5]):
            _check_value(name, float(value), i)
    return table[:, :5], (table[:, 5] if has_target else None)


def save_csv(data: Dataset, path) -> None:
    """Write ``data`` in canonical column order using shortest round-trip floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for x, t in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in x] + [repr(float(t))])


# --------------------------------------------------------------------------
# summary statistics


@dataclass(frozen=True)
class ColumnStats:
    minimum: float
    maximum: float
    mean: float
    std: float


@dataclass(frozen=True)
class SummaryStats:
    """Per-column moments and the Pearson correlation of the inputs.

    ``correlation`` is the 5x5 input matrix; ``target_correlation`` holds
    corr(input, mmp).  Columns with zero variance are listed in
    ``degenerate``; their off-diagonal correlations are reported as 0.
    """

    n: int
    columns: dict
    correlation: np.ndarray
    target_correlation: np.ndarray
    degenerate: tuple = ()

    def to_dict(self):
        return {
            "n": self.n,
            "columns": {
                name: {"min": c.minimum, "max": c.maximum, "mean": c.mean, "std": c.std}
                for name, c in self.columns.items()
            },
            "feature_names": list(FEATURE_NAMES),
            "correlation": self.correlation.tolist(),
            "target_correlation": dict(zip(FEATURE_NAMES, self.target_correlation.tolist())),
            "degenerate": list(self.degenerate),
        }


def pearson_matrix(table):
    """Pearson correlation between the columns of ``table``.

    Returns ``(corr, degenerate_mask)``.  A zero-variance column has unit
    self-correlation and 0 against every other column.
    """
    table = np.asarray(table, dtype=float)
    degenerate = np.ptp(table, axis=0) == 0.0
    centered = np.where(degenerate, 0.0, table - table.mean(axis=0))
    # rescale first so tiny spreads do not underflow when squared
    peak = np.max(np.abs(centered), axis=0)
    centered = centered / np.where(peak > 0, peak, 1.0)
    degenerate |= peak == 0.0
    norms = np.sqrt(np.sum(centered**2, axis=0))
    unit = centered / np.where(degenerate, 1.0, norms)
    corr = unit.T @ unit
    corr = np.clip(0.5 * (corr + corr.T), -1.0, 1.0)
    # identical columns correlate exactly 1, not 1 - ulp
    same = np.all(table[:, :, None] == table[:, None, :], axis=0) & ~degenerate[:, None]
    corr[same] = 1.0
    np.fill_diagonal(corr, 1.0)
    return corr, degenerate


def pearson(a, b):
    """Pearson correlation of two vectors; 0.0 if either is constant."""
    corr, _ = pearson_matrix(np.column_stack([a, b]))
    return float(corr[0, 1])


def describe(data: Dataset) -> SummaryStats:
    n = len(data)
    if n < 2:
        raise InsufficientDataError("at least 2 samples are needed for summary statistics")
    table = np.column_stack([data.X, data.y])
    columns = {}
    for j, name in enumerate(COLUMNS):
        col = table[:, j]
        if np.ptp(col) == 0.0:
            # exact values instead of rounding residue
            columns[name] = ColumnStats(float(col[0]), float(col[0]), float(col[0]), 0.0)
            continue
        columns[name] = ColumnStats(
            float(col.min()), float(col.max()), float(col.mean()), float(col.std(ddof=1))
        )
    corr, degenerate = pearson_matrix(table)
    return SummaryStats(
        n=n,
        columns=columns,
        correlation=corr[:5, :5],
        target_correlation=corr[:5, 5].copy(),
        degenerate=tuple(name for name, d in zip(COLUMNS, degenerate) if d),
    )


# --------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class Scaler:
    """Affine per-column transform ``z = (v - center) / scale``.

    For ``zscore`` the center/scale are the training mean and sample standard
    deviation; for ``minmax`` they are the midpoint and half-range, mapping
    the training min to -1 and max to +1.  Index 5 is the target.
    """

    mode: str
    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _freeze(self.center))
        object.__setattr__(self, "scale", _freeze(self.scale))

    def transform_X(self, X):
        return (np.asarray(X, dtype=float) - self.center[:5]) / self.scale[:5]

    def transform_y(self, y):
        return (np.asarray(y, dtype=float) - self.center[5]) / self.scale[5]

    def inverse_y(self, z):
        return np.asarray(z, dtype=float) * self.scale[5] + self.center[5]

    def inverse_X(self, Z):
        return np.asarray(Z, dtype=float) * self.scale[:5] + self.center[:5]

    def apply(self, data: Dataset) -> Dataset:
        return Dataset(self.transform_X(data.X), self.transform_y(data.y), data.feature_names)

    def invert(self, data: Dataset) -> Dataset:
        return Dataset(self.inverse_X(data.X), self.inverse_y(data.y), data.feature_names)

    def to_dict(self):
        return {"mode": self.mode, "center": self.center.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mode"], np.array(d["center"]), np.array(d["scale"]))


def fit_scaler(train: Dataset, mode: str = "zscore") -> Scaler:
    """Fit a scaler on ``train`` only.

    Callers pass the training subset (``data.subset(partition.train_indices)``);
    nothing outside those rows is read.
    """
    table = np.column_stack([train.X, train.y])
    if mode == "zscore":
        if len(train) < 2:
            raise ScalerError("z-score scaling needs at least 2 rows")
        center = table.mean(axis=0)
        scale = table.std(axis=0, ddof=1)
    elif mode == "minmax":
        lo, hi = table.min(axis=0), table.max(axis=0)
        center = 0.5 * (hi + lo)
        scale = 0.5 * (hi - lo)
    else:
        raise ValueError(f"unknown scaler mode {mode!r}")
    bad = [name for name, s in zip(COLUMNS, scale) if not s > 0.0]
    if bad:
        raise ScalerError(f"cannot fit {mode} scaler: zero spread in column(s) {bad}")
    return Scaler(mode, center, scale)


# --------------------------------------------------------------------------
# synthetic databank


def _beta_params(name):
    lo, hi, mean, std = REFERENCE_STATS[name]
    span = hi - lo
    m = (mean - lo) / span
    v = (std / span) ** 2
    kappa = m * (1.0 - m) / v - 1.0
    return m * kappa, (1.0 - m) * kappa


def _unit(X):
    lo = np.array([REFERENCE_STATS[n][0] for n in FEATURE_NAMES])
    hi = np.array([REFERENCE_STATS[n][1] for n in FEATURE_NAMES])
    return (np.asarray(X, dtype=float) - lo) / (hi - lo)


def latent_mmp(X):
    """Noise-free MMP (MPa) used by :func:`synthesize`.

    With ``u`` the inputs rescaled to [0, 1] over the reference ranges::

        mmp = 44 + 16 uT^2 - 6 uTcm - 4 uVol (1 - uT/2) - 7 sqrt(uInt)
              - 2 uMw + 3 sin(pi uTcm uMw)

    The value always lies in [25, 63], inside the reference MMP range.
    """
    u = _unit(np.atleast_2d(X))
    tcm, vol, inter, mw, temp = u.T
    return (
        44.0
        + 16.0 * temp**2
        - 6.0 * tcm
        - 4.0 * vol * (1.0 - 0.5 * temp)
        - 7.0 * np.sqrt(inter)
        - 2.0 * mw
        + 3.0 * np.sin(np.pi * tcm * mw)
    )


def synthesize(n: int, seed: int = 0, noise: float = 1.0) -> Dataset:
    """Draw ``n`` synthetic samples.

    Each input is an independent scaled Beta variable whose mean and standard
    deviation match the reference databank; the target is
    :func:`latent_mmp` plus Gaussian noise of std ``noise`` MPa, clipped to
    the reference MMP range.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    X = np.empty((n, 5))
    for j, name in enumerate(FEATURE_NAMES):
        a, b = _beta_params(name)
        lo, hi = REFERENCE_STATS[name][:2]
        X[:, j] = lo + (hi - lo) * rng.beta(a, b, size=n)
    y = latent_mmp(X)
    if noise > 0:
        y = y + noise * rng.standard_normal(n)
        y = np.clip(y, REFERENCE_STATS["mmp"][0], REFERENCE_STATS["mmp"][1])
    return Dataset(X, y)
