"""Exact mu versus sketch-based bounds over a grid of sketch sizes and seeds."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from mukit.core import standardize
from mukit.datagen import CsvSchema, SyntheticSpec, gen_synthetic, load_csv
from mukit.mu_exact import compute_mu_exact
from mukit.mu_sketch import SketchConfig, approx_mu_bounds, cauchy_sketch

EXACT_FULL = "ExactFull"
EXACT_SKETCHED = "ExactSketched"
APPR_LOWER = "ApprSketchedLower"
APPR_UPPER = "ApprSketchedUpper"
METHODS = (EXACT_FULL, EXACT_SKETCHED, APPR_LOWER, APPR_UPPER)
CSV_HEADER = ("method", "n_prime", "seed", "mu_value", "wall_ms")

UPPER_NOTE = "upper = lower * upper_factor; conservative, not a certified bound"

# seed column of rows that do not depend on a sketch
NO_SEED = -1


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a dataset and the (n_prime, seed) grid to sketch it on.

    Exactly one of ``synthetic`` and ``csv_path`` is set. ``timing`` puts
    measured wall-clock milliseconds into the output; without it the column
    is written as 0 so that reruns produce identical bytes.
    """

    n_primes: tuple[int, ...]
    seeds: tuple[int, ...]
    synthetic: Optional[SyntheticSpec] = None
    csv_path: Optional[str] = None
    csv_schema: CsvSchema = CsvSchema()
    delta: float = 0.1
    exact_full: bool = True
    exact_sketched: bool = True
    approx: bool = True
    solver: str = "auto"
    upper_factor: Optional[float] = None
    timing: bool = False
    threads: Optional[int] = None
    output: Optional[str] = None
    output_format: str = "csv"
    svg: Optional[str] = None

    def __post_init__(self):
        if not self.n_primes:
            raise ValueError("at least one sketch size is required")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if (self.synthetic is None) == (self.csv_path is None):
            raise ValueError("give exactly one of a synthetic spec and a CSV path")
        if self.output_format not in ("csv", "json"):
            raise ValueError(f"unknown output format {self.output_format!r}")


@dataclass(frozen=True)
class ResultRow:
    method: str
    n_prime: int
    seed: int
    mu_value: float
    wall_ms: float
    error: Optional[str] = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def ok(self) -> bool:
        return self.error is None


def format_mu(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return "%.17g" % value


def _thread_count(cfg: ExperimentConfig) -> int:
    if cfg.threads is not None:
        return max(1, int(cfg.threads))
    env = os.environ.get("MUKIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def load_dataset(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    if cfg.synthetic is not None:
        X, y, _ = gen_synthetic(cfg.synthetic)
        return X, y
    return load_csv(cfg.csv_path, cfg.csv_schema)


def _timed(fn):
    start = time.perf_counter()
    value = fn()
    return value, 1000.0 * (time.perf_counter() - start)


def _full_rows(X, y, n: int, cfg: ExperimentConfig) -> list[ResultRow]:
    try:
        res, ms = _timed(lambda: compute_mu_exact(X, y))
        return [ResultRow(EXACT_FULL, n, NO_SEED, res.mu, ms)]
    except Exception as err:  # noqa: BLE001 - reported in the row
        return [ResultRow(EXACT_FULL, n, NO_SEED, math.nan, 0.0, error=f"{type(err).__name__}: {err}")]


def _cell_rows(X, y, n_prime: int, seed: int, cfg: ExperimentConfig) -> list[ResultRow]:
    rows = []
    sk = SketchConfig(
        n_prime=n_prime, delta=cfg.delta, seed=seed, upper_factor=cfg.upper_factor, solver=cfg.solver
    )
    if cfg.exact_sketched:
        try:
            A = standardize(X, y)
            res, ms = _timed(lambda: compute_mu_exact(cauchy_sketch(A, sk)))
            rows.append(ResultRow(EXACT_SKETCHED, n_prime, seed, res.mu, ms))
        except Exception as err:  # noqa: BLE001
            rows.append(ResultRow(EXACT_SKETCHED, n_prime, seed, math.nan, 0.0, error=f"{type(err).__name__}: {err}"))
    if cfg.approx:
        try:
            b, ms = _timed(lambda: approx_mu_bounds(X, y, sk))
            extra = {
                "t": b.t,
                "alpha": b.alpha,
                "beta_bound": b.beta_bound,
                "exact_t": b.exact,
                "method": b.method,
                "upper_factor": b.upper_factor,
                "upper_note": UPPER_NOTE,
                "seed_used": b.seed,
            }
            rows.append(ResultRow(APPR_LOWER, n_prime, seed, b.lower, ms, extra=extra))
            rows.append(ResultRow(APPR_UPPER, n_prime, seed, b.upper, ms, extra=extra))
        except Exception as err:  # noqa: BLE001
            msg = f"{type(err).__name__}: {err}"
            rows.append(ResultRow(APPR_LOWER, n_prime, seed, math.nan, 0.0, error=msg))
            rows.append(ResultRow(APPR_UPPER, n_prime, seed, math.nan, 0.0, error=msg))
    return rows


def run_experiment(cfg: ExperimentConfig, data: Optional[tuple[np.ndarray, np.ndarray]] = None) -> list[ResultRow]:
    """Rows in canonical order: ExactFull, then for every (n_prime, seed) in
    sorted order ExactSketched, ApprSketchedLower, ApprSketchedUpper.

    A failing computation yields rows with ``mu_value = nan`` and an error
    message; the remaining rows are still computed.
    """
    X, y = data if data is not None else load_dataset(cfg)
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    X.setflags(write=False)
    y.setflags(write=False)
    n = X.shape[0]
    cells = [(npr, s) for npr in sorted(set(cfg.n_primes)) for s in sorted(set(cfg.seeds))]
    with ThreadPoolExecutor(max_workers=_thread_count(cfg)) as pool:
        full = pool.submit(_full_rows, X, y, n, cfg) if cfg.exact_full else None
        futures = [pool.submit(_cell_rows, X, y, npr, s, cfg) for npr, s in cells]
        rows = list(full.result()) if full is not None else []
        for fut in futures:
            rows.extend(fut.result())
    if not cfg.timing:
        rows = [ResultRow(r.method, r.n_prime, r.seed, r.mu_value, 0.0, r.error, r.extra) for r in rows]
    return rows


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.method, r.n_prime, r.seed, format_mu(r.mu_value), "%.3f" % r.wall_ms])
    return buf.getvalue()


def rows_to_json(rows: Sequence[ResultRow]) -> str:
    out = []
    for r in rows:
        v = r.mu_value
        rec = {
            "method": r.method,
            "n_prime": r.n_prime,
            "seed": r.seed,
            "mu_value": v if math.isfinite(v) else format_mu(v),
            "wall_ms": round(r.wall_ms, 3),
        }
        if r.error is not None:
            rec["error"] = r.error
        if r.extra:
            rec["details"] = {k: (format_mu(x) if isinstance(x, float) and not math.isfinite(x) else x) for k, x in r.extra.items()}
        out.append(rec)
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


def parse_rows_csv(text: str) -> list[ResultRow]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    return [ResultRow(m, int(npr), int(s), float(v), float(ms)) for m, npr, s, v, ms in reader]


def write_svg(rows: Sequence[ResultRow], path: str) -> None:
    """Log-scale chart of mu against n_prime; one line per method (median over seeds)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "mukit"
    fig, ax = plt.subplots(figsize=(6, 4))
    sizes = sorted({r.n_prime for r in rows if r.method != EXACT_FULL})
    for method in METHODS[1:]:
        xs, ys = [], []
        for npr in sizes:
            vals = [r.mu_value for r in rows if r.method == method and r.n_prime == npr and math.isfinite(r.mu_value)]
            if vals:
                xs.append(npr)
                ys.append(float(np.median(vals)))
        if xs:
            ax.plot(xs, ys, marker="o", label=method)
    full = [r.mu_value for r in rows if r.method == EXACT_FULL and math.isfinite(r.mu_value)]
    if full and sizes:
        ax.plot([sizes[0], sizes[-1]], [full[0], full[0]], linestyle="--", color="black", label=EXACT_FULL)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("sketch rows n'")
    ax.set_ylabel("mu")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
