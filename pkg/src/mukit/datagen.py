"""Synthetic logistic data, CSV input/output and label-balanced subsampling.

Randomness comes from PCG64 generators spawned off one ``SeedSequence``
per seed, one child per purpose, so that the matrix, the true parameter,
the label noise and any subsample can be reproduced independently.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from mukit.core import as_data_matrix, as_labels

log = logging.getLogger(__name__)

_STREAMS = ("matrix", "beta", "noise", "subsample")


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one purpose (``matrix``, ``beta``, ``noise``
    or ``subsample``) derived from ``seed``."""
    if name not in _STREAMS:
        raise ValueError(f"unknown stream {name!r}")
    child = np.random.SeedSequence(int(seed), spawn_key=(_STREAMS.index(name),))
    return np.random.Generator(np.random.PCG64(child))


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    seed: int = 0
    noise_std: float = 1.0
    beta: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.beta is not None and len(self.beta) != self.d:
            raise ValueError(f"fixed beta has length {len(self.beta)}, expected {self.d}")


def gen_synthetic(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gaussian rows, a unit-norm parameter and thresholded noisy labels.

    ``y_i = +1`` iff ``1 / (1 + exp(-beta^T x_i + eps_i)) > 1/2``, i.e. iff
    ``beta^T x_i > eps_i``, with ``eps_i ~ N(0, noise_std^2)``. Row i and
    ``eps_i`` do not depend on n, so smaller instances are prefixes of
    larger ones.
    """
    X = stream(spec.seed, "matrix").standard_normal((spec.n, spec.d))
    if spec.beta is not None:
        beta = np.asarray(spec.beta, dtype=float)
    else:
        beta = stream(spec.seed, "beta").standard_normal(spec.d)
    norm = np.linalg.norm(beta)
    if norm == 0:
        raise ValueError("beta must be nonzero")
    beta = beta / norm
    eps = spec.noise_std * stream(spec.seed, "noise").standard_normal(spec.n)
    y = np.where(X @ beta - eps > 0, 1.0, -1.0)
    return X, y, beta


def balanced_subsample(X, y, m: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """m rows with about equal label counts.

    Takes ``min(m // 2, #positives)`` positives and fills up with
    negatives (with positives again if negatives run out). Rows come back
    in a random order.
    """
    X = as_data_matrix(X)
    y = as_labels(y, X.shape[0])
    n = X.shape[0]
    if not 0 < m <= n:
        raise ValueError(f"subsample size {m} must lie in [1, {n}]")
    rng = stream(seed, "subsample")
    pos = np.flatnonzero(y > 0)
    neg = np.flatnonzero(y < 0)
    n_pos = min(m // 2, pos.size)
    n_neg = min(m - n_pos, neg.size)
    n_pos = m - n_neg
    chosen = np.concatenate(
        [rng.choice(pos, size=n_pos, replace=False), rng.choice(neg, size=n_neg, replace=False)]
    )
    chosen = rng.permutation(chosen)
    return X[chosen], y[chosen]


class CsvFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


Selector = Union[None, str, Sequence[Union[int, str]]]


@dataclass(frozen=True)
class CsvSchema:
    """How to read a labelled CSV file.

    ``label_column`` is a header name or a 0-based index. Tokens in
    ``positive_labels`` map to +1 and those in ``negative_labels`` to -1.
    ``feature_columns`` is None (every other column), ``"numeric"`` (every
    other column whose values all parse as numbers) or a list of names or
    indices.
    """

    label_column: Union[int, str] = -1
    positive_labels: tuple[str, ...] = ("1", "+1")
    negative_labels: tuple[str, ...] = ("-1", "0")
    delimiter: str = ","
    has_header: bool = True
    feature_columns: Selector = None

    def __post_init__(self):
        overlap = set(self.positive_labels) & set(self.negative_labels)
        if overlap:
            raise ValueError(f"label tokens {sorted(overlap)} are both positive and negative")


def _resolve(col: Union[int, str], header: Optional[list[str]], width: int) -> int:
    if isinstance(col, str):
        if header is None:
            raise CsvFormatError(f"column {col!r} named but the file has no header")
        if col not in header:
            raise CsvFormatError(f"no column named {col!r}")
        return header.index(col)
    idx = col + width if col < 0 else col
    if not 0 <= idx < width:
        raise CsvFormatError(f"column index {col} out of range for {width} columns")
    return idx


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_csv(path, schema: CsvSchema = CsvSchema()) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh, delimiter=schema.delimiter), start=1) if r]
    header = None
    if schema.has_header:
        if not rows:
            raise CsvFormatError("file is empty")
        header = [h.strip() for h in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise CsvFormatError("file has no data rows")
    width = len(header) if header is not None else len(rows[0][1])
    for line, r in rows:
        if len(r) != width:
            raise CsvFormatError(f"expected {width} fields, found {len(r)}", line)

    label = _resolve(schema.label_column, header, width)
    sel = schema.feature_columns
    if sel is None:
        features = [j for j in range(width) if j != label]
    elif sel == "numeric":
        features = [j for j in range(width) if j != label and all(_is_number(r[j]) for _, r in rows)]
    elif isinstance(sel, str):
        raise ValueError(f"unknown feature selector {sel!r}")
    else:
        features = [_resolve(c, header, width) for c in sel]
        if label in features:
            raise ValueError("label column is also selected as a feature")
    if not features:
        raise CsvFormatError("no feature columns selected")

    pos, neg = set(schema.positive_labels), set(schema.negative_labels)
    X = np.empty((len(rows), len(features)))
    y = np.empty(len(rows))
    for k, (line, r) in enumerate(rows):
        token = r[label].strip()
        if token in pos:
            y[k] = 1.0
        elif token in neg:
            y[k] = -1.0
        else:
            raise CsvFormatError(f"unknown label token {token!r}", line)
        for c, j in enumerate(features):
            try:
                X[k, c] = float(r[j])
            except ValueError:
                raise CsvFormatError(f"non-numeric feature value {r[j]!r} in column {j}", line) from None
    if not np.all(np.isfinite(X)):
        raise CsvFormatError("features contain non-finite values")
    log.info("loaded %d rows with %d features from %s", X.shape[0], X.shape[1], path)
    return X, y


def write_csv(path, X, y, delimiter: str = ",", header: bool = True) -> None:
    """Features ``x0..x{d-1}`` then ``label`` (``1`` / ``-1``), 17 significant digits."""
    X = as_data_matrix(X)
    y = as_labels(y, X.shape[0])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        if header:
            w.writerow([f"x{j}" for j in range(X.shape[1])] + ["label"])
        for row, lab in zip(X, y):
            w.writerow(["%.17g" % v for v in row] + ["1" if lab > 0 else "-1"])
