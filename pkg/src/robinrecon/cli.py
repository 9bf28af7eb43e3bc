"""Command line front end for reconstruction runs and verification checks.

Outputs are CSV files plus a flat key=value summary, all numbers printed
with 17 significant digits so identical configurations diff byte for
byte.  Plotting is left to external tools; profile.csv holds exactly the
columns a line plot of exact versus reconstructed coefficient needs.

Flag values win over config-file values, which win over built-in
defaults.  The config file is flat "key = value" text mirroring the
flags, with '#' comments.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

from . import experiments, lm

_FMT = "%.17g"


def _fmt(value) -> str:
    if value is None:
        return ""
    return _FMT % value


def _parse_gamma0(text: str):
    if text == "exact":
        return "exact"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"gamma0 must be a number or 'exact', got {text!r}"
        ) from None


def _parse_float_list(text: str) -> tuple:
    items = [piece.strip() for piece in text.split(",") if piece.strip()]
    if not items:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    try:
        return tuple(float(piece) for piece in items)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from None


def _parse_int_list(text: str) -> tuple:
    items = [piece.strip() for piece in text.split(",") if piece.strip()]
    if not items:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    try:
        return tuple(int(piece) for piece in items)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


# field -> (converter, default); None as a default means "required".
_RUN_FIELDS = {
    "example": (str, None),
    "nx": (int, 16),
    "ny": (int, 32),
    "nt": (int, 64),
    "delta": (float, 0.02),
    "seed": (int, 0),
    "eps": (float, None),
    "gamma0": (_parse_gamma0, 2.0),
    "A": (float, 1.0),
    "max_iters": (int, 100),
    "out": (str, "results"),
}

_SWEEP_FIELDS = dict(_RUN_FIELDS)
_SWEEP_FIELDS.update({
    "delta": (_parse_float_list, (0.02,)),
    "seed": (_parse_int_list, (0,)),
    "jobs": (int, 1),
})


def _read_config(path: str) -> dict:
    """Flat key = value lines; '#' starts a comment; keys mirror the flags."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merge_settings(args, fields: dict) -> dict:
    """Apply precedence: command line over config file over defaults."""
    config = _read_config(args.config) if args.config else {}
    unknown = set(config) - set(fields)
    if unknown:
        raise ValueError(
            f"unknown config key(s): {', '.join(sorted(unknown))}"
        )
    merged = {}
    for name, (convert, default) in fields.items():
        flag_value = getattr(args, name)
        if flag_value is not None:
            merged[name] = flag_value
        elif name in config:
            merged[name] = convert(config[name])
        else:
            merged[name] = default
    if merged["example"] is None:
        raise ValueError("an example id is required (--example or config file)")
    return merged


def _make_spec(settings: dict, delta=None, seed=None) -> experiments.ExperimentSpec:
    return experiments.ExperimentSpec(
        example_id=settings["example"],
        nx=settings["nx"],
        ny=settings["ny"],
        nt=settings["nt"],
        delta=settings["delta"] if delta is None else delta,
        seed=settings["seed"] if seed is None else seed,
        gamma0=settings["gamma0"],
        eps=settings["eps"],
        A=settings["A"],
        max_iters=settings["max_iters"],
    )


def _write_history(path: Path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "residual", "beta", "rel_change", "rel_error"])
        for row in history:
            writer.writerow([
                row.k, _fmt(row.residual), _fmt(row.beta),
                _fmt(row.rel_change), _fmt(row.rel_error),
            ])


def _write_profile(path: Path, result: experiments.ExperimentResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y", "gamma_exact", "gamma_reconstructed"])
        for y, ge, gr in zip(result.y, result.gamma_exact,
                             result.gamma_reconstructed):
            writer.writerow([_fmt(y), _fmt(ge), _fmt(gr)])


def _write_summary(path: Path, entries: list) -> None:
    lines = [f"{key} = {value}" for key, value in entries]
    path.write_text("\n".join(lines) + "\n")


def cmd_run(args) -> int:
    settings = _merge_settings(args, _RUN_FIELDS)
    spec = _make_spec(settings)
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    summary = [
        ("example", spec.example_id),
        ("nx", spec.nx), ("ny", spec.ny), ("nt", spec.nt),
        ("delta", _fmt(spec.delta)), ("seed", spec.seed),
        ("gamma0", spec.gamma0), ("A", _fmt(spec.A)),
        ("max_iters", spec.max_iters),
    ]
    start = time.perf_counter()
    try:
        result = experiments.run_experiment(spec)
    except lm.LmRunError as exc:
        _write_history(out / "history.csv", exc.state.history)
        summary += [
            ("status", "error"),
            ("error", str(exc)),
            ("iterations", exc.state.k),
            ("wall_time", _fmt(time.perf_counter() - start)),
        ]
        _write_summary(out / "summary.txt", summary)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_history(out / "history.csv", result.history)
    _write_profile(out / "profile.csv", result)
    summary += [
        ("status", "ok"),
        ("stop_reason", result.stop_reason),
        ("iterations", result.iterations),
        ("final_error", _fmt(result.final_error)),
        ("wall_time", _fmt(result.wall_time)),
    ]
    _write_summary(out / "summary.txt", summary)
    print(f"{spec.example_id}: stopped by {result.stop_reason} after "
          f"{result.iterations} iterations, relative error "
          f"{result.final_error:.4g}; outputs in {out}")
    return 0


def _sweep_job(spec: experiments.ExperimentSpec) -> dict:
    """One sweep entry; never raises, errors become a row for the table."""
    try:
        result = experiments.run_experiment(spec)
    except lm.LmRunError as exc:
        state = exc.state
        last_error = state.history[-1].rel_error if state.history else None
        return {
            "delta": spec.delta, "seed": spec.seed,
            "iterations": state.k, "stop_reason": "error",
            "final_error": last_error, "message": str(exc),
        }
    return {
        "delta": spec.delta, "seed": spec.seed,
        "iterations": result.iterations, "stop_reason": result.stop_reason,
        "final_error": result.final_error, "message": "",
    }


_SWEEP_HEADER = ["delta", "seed", "iterations", "stop_reason", "final_error"]


def _sweep_row(entry: dict) -> list:
    return [_fmt(entry["delta"]), entry["seed"], entry["iterations"],
            entry["stop_reason"], _fmt(entry["final_error"])]


def cmd_sweep(args) -> int:
    settings = _merge_settings(args, _SWEEP_FIELDS)
    specs = [
        _make_spec(settings, delta=delta, seed=seed)
        for delta in settings["delta"]
        for seed in settings["seed"]
    ]
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    completed = {}
    failed = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SWEEP_HEADER)
        fh.flush()

        def record(entry: dict) -> None:
            completed[(entry["delta"], entry["seed"])] = entry
            writer.writerow(_sweep_row(entry))
            fh.flush()
            if entry["message"]:
                print(f"delta {entry['delta']:g} seed {entry['seed']}: "
                      f"{entry['message']}", file=sys.stderr)

        if settings["jobs"] > 1:
            with ProcessPoolExecutor(max_workers=settings["jobs"]) as pool:
                futures = [pool.submit(_sweep_job, spec) for spec in specs]
                for future in as_completed(futures):
                    record(future.result())
        else:
            for spec in specs:
                record(_sweep_job(spec))
        failed = sum(1 for entry in completed.values() if entry["message"])

    # Rewrite in the deterministic (delta, seed) request order; the
    # incremental file above only guarantees progress is not lost.
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SWEEP_HEADER)
        for spec in specs:
            writer.writerow(_sweep_row(completed[(spec.delta, spec.seed)]))
    print(f"{len(specs)} runs ({failed} failed), table in {path}")
    return 1 if failed else 0


def cmd_verify(args) -> int:
    try:
        results = experiments.verification_battery(only=args.only)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    all_passed = True
    for check in results:
        status = "PASS" if check.passed else "FAIL"
        all_passed &= check.passed
        print(f"[{status}] {check.name}: {check.details}")
    return 0 if all_passed else 1


def _add_shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value settings file")
    parser.add_argument("--example", help="registered example id (e.g. 5.1)")
    parser.add_argument("--nx", type=int, help="cells across the short side")
    parser.add_argument("--ny", type=int, help="cells across the long side")
    parser.add_argument("--nt", type=int, help="time steps (parabolic only)")
    parser.add_argument("--eps", type=float,
                        help="relative-change stopping tolerance")
    parser.add_argument("--gamma0", type=_parse_gamma0,
                        help="constant initial guess, or 'exact'")
    parser.add_argument("--A", type=float, help="surrogate majorization constant")
    parser.add_argument("--max-iters", type=int, dest="max_iters",
                        help="iteration cap")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robinrecon",
        description="Reconstruct a Robin boundary coefficient from noisy "
                    "boundary measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one reconstruction, full artifacts")
    _add_shared_flags(p_run)
    p_run.add_argument("--delta", type=float, help="relative noise level")
    p_run.add_argument("--seed", type=int, help="noise realization seed")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid of noise levels and seeds")
    _add_shared_flags(p_sweep)
    p_sweep.add_argument("--delta", type=_parse_float_list,
                         help="comma-separated noise levels")
    p_sweep.add_argument("--seed", type=_parse_int_list,
                         help="comma-separated seeds")
    p_sweep.add_argument("--jobs", type=int, help="concurrent runs")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="fast verification battery")
    p_verify.add_argument("--only", help="substring filter on check names")
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
