"""``mukit`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from typing import Optional, Sequence

import numpy as np

from mukit.datagen import CsvSchema, SyntheticSpec, gen_synthetic, load_csv, write_csv
from mukit.experiment import (
    UPPER_NOTE,
    ExperimentConfig,
    format_mu,
    rows_to_csv,
    rows_to_json,
    run_experiment,
    write_svg,
)

log = logging.getLogger("mukit")


def _int_list(text: str) -> tuple[int, ...]:
    """``"0-4,10"`` -> ``(0, 1, 2, 3, 4, 10)``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-") if not part.startswith("-") else (part, "", "")
        if sep:
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty integer list {text!r}")
    return tuple(out)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return format_mu(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(float(x)) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _emit(record: dict, args) -> None:
    """Print a flat record as ``key,value`` lines (csv) or one JSON object."""
    if args.format == "json":
        text = json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n"
    else:
        lines = ["key,value"]
        for k, v in record.items():
            if isinstance(v, np.ndarray):
                v = " ".join(format_mu(float(x)) for x in v)
            elif isinstance(v, float):
                v = format_mu(v)
            lines.append(f"{k},{v}")
        text = "\n".join(lines) + "\n"
    _write(text, args.output)


def _write(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _schema(args) -> CsvSchema:
    label = args.label_column
    try:
        label = int(label)
    except ValueError:
        pass
    features = args.features
    if features not in (None, "numeric"):
        features = [int(c) if c.lstrip("-").isdigit() else c for c in features.split(",")]
    return CsvSchema(
        label_column=label,
        positive_labels=tuple(args.positive.split(",")),
        negative_labels=tuple(args.negative.split(",")),
        delimiter=args.delimiter,
        has_header=not args.no_header,
        feature_columns=features,
    )


def _load(args):
    if not args.input:
        raise SystemExit("error: --input is required")
    return load_csv(args.input, _schema(args))


# -- subcommands ------------------------------------------------------------------


def cmd_mu_exact(args) -> int:
    from mukit.mu_exact import compute_mu_exact

    X, y = _load(args)
    res = compute_mu_exact(X, y)
    _emit({"mu": res.mu, "pos": res.masses.pos, "neg": res.masses.neg, "beta": res.beta_star}, args)
    return 0


def cmd_mu_oracle(args) -> int:
    from mukit.mu_oracle import mu_bruteforce

    X, y = _load(args)
    res = mu_bruteforce(X, y, n_random=args.n_random, seed=args.seed)
    _emit({"mu": res.mu, "pos": res.masses.pos, "neg": res.masses.neg, "beta": res.beta_star}, args)
    return 0


def cmd_mu_approx(args) -> int:
    from mukit.mu_sketch import SketchConfig, approx_mu_bounds

    X, y = _load(args)
    cfg = SketchConfig(
        n_prime=args.n_prime,
        delta=args.delta,
        seed=args.seed,
        upper_factor=args.upper_factor,
        solver=args.solver,
    )
    b = approx_mu_bounds(X, y, cfg)
    _emit(
        {
            "lower": b.lower,
            "upper": b.upper,
            "t": b.t,
            "t_exact": b.exact,
            "method": b.method,
            "upper_factor": b.upper_factor,
            "upper_note": UPPER_NOTE,
            "alpha": b.alpha,
            "beta_bound": b.beta_bound,
            "seed_used": b.seed,
        },
        args,
    )
    return 0


def cmd_lowrank(args) -> int:
    from mukit.lowrank import additive_bound, loss_gap, truncated_svd

    X, _ = _load(args)
    approx = truncated_svd(X, args.rank)
    Xt = approx.X_tilde
    rng = np.random.Generator(np.random.PCG64(args.seed))
    worst = 0.0
    ok = True
    for _ in range(args.samples):
        beta = rng.standard_normal(X.shape[1])
        gap, bound = loss_gap(X, Xt, beta), additive_bound(X, Xt, beta)
        ok &= gap <= bound * (1 + 1e-12)
        worst = max(worst, gap / bound if bound > 0 else 0.0)
    _emit(
        {
            "rank": approx.rank,
            "spectral_error": approx.spectral_error,
            "samples": args.samples,
            "max_gap_over_bound": worst,
            "bound_holds": bool(ok),
        },
        args,
    )
    return 0 if ok else 1


def cmd_verify(args) -> int:
    from mukit.constructions import verify_constructions

    reports = verify_constructions(seed=args.seed)
    if args.format == "json":
        text = json.dumps(
            [_jsonable({"name": r.name, "passed": r.passed, "details": r.details}) for r in reports],
            indent=2,
            sort_keys=True,
        )
        _write(text + "\n", args.output)
    else:
        lines = []
        for r in reports:
            margins = " ".join(f"{k}={format_mu(float(v))}" for k, v in r.details.items())
            lines.append(f"{'PASS' if r.passed else 'FAIL'} {r.name} {margins}")
        _write("\n".join(lines) + "\n", args.output)
    return 0 if all(r.passed for r in reports) else 1


def cmd_gen_data(args) -> int:
    beta = None
    if args.beta:
        beta = tuple(float(v) for v in args.beta.split(","))
    X, y, _ = gen_synthetic(SyntheticSpec(n=args.n, d=args.d, seed=args.seed, noise_std=args.noise_std, beta=beta))
    if not args.output:
        raise SystemExit("error: --output is required")
    write_csv(args.output, X, y)
    return 0


def cmd_experiment(args) -> int:
    synthetic = None
    if not args.input:
        synthetic = SyntheticSpec(n=args.n, d=args.d, seed=args.data_seed, noise_std=args.noise_std)
    cfg = ExperimentConfig(
        n_primes=_int_list(args.n_prime),
        seeds=_int_list(args.seeds),
        synthetic=synthetic,
        csv_path=args.input,
        csv_schema=_schema(args) if args.input else CsvSchema(),
        delta=args.delta,
        exact_full=not args.no_exact_full,
        exact_sketched=not args.no_exact_sketched,
        solver=args.solver,
        upper_factor=args.upper_factor,
        timing=args.timing,
        threads=args.threads,
        output=args.output,
        output_format=args.format,
        svg=args.svg,
    )
    rows = run_experiment(cfg)
    _write(rows_to_json(rows) if args.format == "json" else rows_to_csv(rows), args.output)
    if args.svg:
        write_svg(rows, args.svg)
    failed = [r for r in rows if not r.ok]
    for r in failed:
        log.error("%s n_prime=%d seed=%d failed: %s", r.method, r.n_prime, r.seed, r.error)
    return 1 if failed else 0


# -- parser -----------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, data: bool = True) -> None:
    p.add_argument("--config", help="flat JSON file of option defaults (keys are long option names)")
    p.add_argument("--output", help="write results here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=0)
    if data:
        p.add_argument("--input", help="labelled CSV file")
        p.add_argument("--label-column", default="-1", help="header name or 0-based index (default: last)")
        p.add_argument("--positive", default="1,+1", help="comma-separated tokens mapped to +1")
        p.add_argument("--negative", default="-1,0", help="comma-separated tokens mapped to -1")
        p.add_argument("--delimiter", default=",")
        p.add_argument("--no-header", action="store_true")
        p.add_argument("--features", help="'numeric' or comma-separated columns (default: all but the label)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mukit", description="Complexity measure mu for logistic regression.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mu-exact", help="exact mu by linear programming")
    _add_common(p)
    p.set_defaults(func=cmd_mu_exact)

    p = sub.add_parser("mu-oracle", help="brute-force mu for tiny inputs")
    _add_common(p)
    p.add_argument("--n-random", type=int, default=10_000)
    p.set_defaults(func=cmd_mu_oracle)

    p = sub.add_parser("mu-approx", help="sketch-based lower and upper bounds on mu")
    _add_common(p)
    p.add_argument("--n-prime", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--upper-factor", type=float)
    p.add_argument("--solver", choices=("auto", "milp", "orthants", "descent"), default="auto")
    p.set_defaults(func=cmd_mu_approx)

    p = sub.add_parser("lowrank", help="check the loss bound for a truncated SVD")
    _add_common(p)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_lowrank)

    p = sub.add_parser("verify-constructions", help="run the hardness constructions and print margins")
    _add_common(p, data=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-data", help="write a synthetic labelled CSV")
    _add_common(p, data=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--beta", help="comma-separated fixed parameter (normalised to unit length)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("experiment", help="exact mu against sketch bounds over n' and seeds")
    _add_common(p)
    p.add_argument("--n", type=int, default=2000, help="synthetic rows (ignored with --input)")
    p.add_argument("--d", type=int, default=20, help="synthetic columns (ignored with --input)")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--n-prime", default="128,256,512", help="sketch sizes, e.g. 128,256")
    p.add_argument("--seeds", default="0-19", help="sketch seeds, e.g. 0-19 or 1,5,7")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--upper-factor", type=float)
    p.add_argument("--solver", choices=("auto", "milp", "orthants", "descent"), default="auto")
    p.add_argument("--no-exact-full", action="store_true")
    p.add_argument("--no-exact-sketched", action="store_true")
    p.add_argument("--timing", action="store_true", help="record wall-clock times (output is then not reproducible)")
    p.add_argument("--threads", type=int, help="worker threads (default: $MUKIT_THREADS or CPU count)")
    p.add_argument("--svg", help="also write a log-scale chart here")
    p.set_defaults(func=cmd_experiment)
    return parser


def _config_defaults(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Apply ``--config`` values as defaults for the chosen subcommand, so
    explicit flags still win."""
    args, _ = parser.parse_known_args(argv)
    path = getattr(args, "config", None)
    if not path:
        return
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise SystemExit("error: --config must hold a JSON object")
    subparser = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    known = {a.dest for a in subparser._actions}  # noqa: SLF001
    values = {}
    for key, value in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known:
            raise SystemExit(f"error: unknown config key {key!r} for {args.command}")
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        values[dest] = value
    subparser.set_defaults(**values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _config_defaults(parser, argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        log.error("%s", err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
