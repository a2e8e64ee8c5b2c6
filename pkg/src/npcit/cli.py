"""Command-line surface.

Subcommands: test (CI test on a CSV), power (rejection-rate grid over a
scenario config), hist (p-value histogram data), residuals (transform
export), gen (scenario CSV). All outputs are plain JSON or CSV with floats
serialized at 17 significant digits, byte-stable for a given seed and
config regardless of thread count. Exit codes: 0 success, 1 internal
error, 2 validation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .citest import CiTestConfig, CiTestResult, pvalue_histogram, run_test
from .core import Dataset, SeedSpec
from .kernel_cde import fit
from .simgen import SCENARIOS, generate, make_scenario
from .transform import build_residual_vector, fit_rosenblatt, ks_uniform_distance

__all__ = ["main"]

DESK_SCALE = {"n": 200, "bootstrap_replicates": 199, "replications": 100}
PAPER_SCALE = {"n": 500, "bootstrap_replicates": 1000, "replications": 500}

_BANDWIDTH_CHOICES = ("rule-of-thumb", "least-squares-cv")


class CliError(Exception):
    """User/validation error; maps to exit code 2."""


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _resolve_threads(flag_value: int | None) -> int:
    env = os.environ.get("NPCIT_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"NPCIT_THREADS must be an integer, got {env!r}") from None
    return max(1, flag_value if flag_value is not None else 1)


def _resolve_seed(flag_value: int | None) -> tuple[SeedSpec, int]:
    if flag_value is not None:
        return SeedSpec(int(flag_value)), int(flag_value)
    master = int.from_bytes(os.urandom(8), "little")
    return SeedSpec(master), master


# ---------------------------------------------------------------------------
# CSV schema


def _expected_header(d: int) -> list[str]:
    return ["x", "y"] + [f"z{j + 1}" for j in range(d)]


def read_dataset_csv(path: str) -> Dataset:
    """Parse the fixed x,y,z1..zd schema; errors carry row and column."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CliError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[:2] != ["x", "y"]:
            raise CliError(
                f"{path}: header must be x,y,z1..zd; got {','.join(header)}"
            )
        d = len(header) - 2
        if header != _expected_header(d):
            raise CliError(
                f"{path}: header must be x,y,z1..zd; got {','.join(header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CliError(
                    f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}"
                )
            parsed = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise CliError(
                        f"{path}: line {lineno}, column {col}: not a number: {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise CliError(
                        f"{path}: line {lineno}, column {col}: non-finite value {cell!r}"
                    )
                parsed.append(v)
            rows.append(parsed)
    if len(rows) < 2:
        raise CliError(f"{path}: need at least 2 data rows, got {len(rows)}")
    arr = np.asarray(rows)
    return Dataset(x=arr[:, 0], y=arr[:, 1], z=arr[:, 2:])


def write_dataset_csv(dataset: Dataset, path: str) -> None:
    if dataset.y is None:
        raise CliError("dataset lacks a y column; the CSV schema requires x,y,z1..zd")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_expected_header(dataset.d))
        for i in range(dataset.n):
            writer.writerow(
                [_fmt(dataset.x[i]), _fmt(dataset.y[i])]
                + [_fmt(v) for v in dataset.z[i]]
            )


# ---------------------------------------------------------------------------
# Experiment configs


_CONFIG_KEYS = {
    "scenario": str,
    "sigma_w_grid": list,
    "dimensions": list,
    "n": int,
    "replications": int,
    "bootstrap_replicates": int,
    "alpha": float,
    "bandwidth_method": str,
    "refit_bandwidths": bool,
    "seed": int,
    "out": str,
    "method": str,
}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    sigma_w_grid: tuple[float, ...] = (0.0,)
    dimensions: tuple[int, ...] = (1,)
    n: int = DESK_SCALE["n"]
    replications: int = DESK_SCALE["replications"]
    bootstrap_replicates: int = DESK_SCALE["bootstrap_replicates"]
    alpha: float = 0.05
    bandwidth_method: str = "least-squares-cv"
    refit_bandwidths: bool = True
    seed: int | None = None
    out: str | None = None
    method: str = "full-test"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise CliError(
                f"unknown scenario {self.scenario!r}; known: {sorted(SCENARIOS)}"
            )
        if not 0.0 < self.alpha < 1.0:
            raise CliError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.replications < 1:
            raise CliError("replications must be >= 1")
        if not self.sigma_w_grid:
            raise CliError("sigma_w_grid must be nonempty")
        if not self.dimensions or any(d < 1 for d in self.dimensions):
            raise CliError("dimensions must be a nonempty list of integers >= 1")
        if self.bandwidth_method not in _BANDWIDTH_CHOICES:
            raise CliError(f"unknown bandwidth method {self.bandwidth_method!r}")
        if self.method not in ("full-test", "partial-dcov"):
            raise CliError(f"unknown method {self.method!r}")


def load_experiment_config(path: str, paper_scale: bool) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise CliError(f"{path}: config must be a JSON object")
    unknown = set(raw) - set(_CONFIG_KEYS)
    if unknown:
        raise CliError(f"{path}: unknown config keys: {sorted(unknown)}")
    if "scenario" not in raw:
        raise CliError(f"{path}: missing required key: scenario")
    bad_types = []
    for key, value in raw.items():
        if value is None:
            continue
        want = _CONFIG_KEYS[key]
        ok = isinstance(value, want) or (want is float and isinstance(value, int))
        if isinstance(value, bool) and want is not bool:
            ok = False
        if not ok:
            bad_types.append(key)
    if bad_types:
        raise CliError(f"{path}: wrongly typed config keys: {sorted(bad_types)}")
    scale = PAPER_SCALE if paper_scale else DESK_SCALE
    merged = dict(scale)
    merged.update({k: v for k, v in raw.items() if v is not None})
    if "sigma_w_grid" in merged:
        merged["sigma_w_grid"] = tuple(float(v) for v in merged["sigma_w_grid"])
    if "dimensions" in merged:
        merged["dimensions"] = tuple(int(v) for v in merged["dimensions"])
    return ExperimentConfig(**merged)


# ---------------------------------------------------------------------------
# JSON rendering


def _bandwidths_to_json(bw) -> dict:
    return {
        "h_response": float(bw.h_response),
        "h_conditioning": [float(h) for h in bw.h_conditioning],
    }


def result_to_json(result: CiTestResult, master_seed: int, alpha: float) -> dict:
    return {
        "statistic": result.statistic,
        "p_value": result.p_value,
        "reject": bool(result.p_value <= alpha),
        "alpha": alpha,
        "B": result.config.bootstrap_replicates,
        "n": result.n,
        "d": result.d,
        "seed": master_seed,
        "bandwidth_method": result.config.bandwidth_method,
        "refit_bandwidths": result.config.refit_bandwidths,
        "bandwidths": {
            "x": _bandwidths_to_json(result.bandwidths["x"]),
            "y": _bandwidths_to_json(result.bandwidths["y"]),
            "z": [_bandwidths_to_json(b) for b in result.bandwidths["z"]],
        },
        "diagnostics": {
            "ks_uniform": [float(v) for v in result.diagnostics["ks_uniform"]]
        },
        "bootstrap_statistics": [float(v) for v in result.bootstrap_statistics],
    }


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_test(args) -> int:
    dataset = read_dataset_csv(args.csv)
    seed, master = _resolve_seed(args.seed)
    b = args.B if args.B is not None else (
        PAPER_SCALE["bootstrap_replicates"] if args.paper_scale
        else DESK_SCALE["bootstrap_replicates"]
    )
    config = CiTestConfig(
        bootstrap_replicates=b,
        bandwidth_method=args.bandwidth,
        refit_bandwidths=not args.freeze_bandwidths,
        seed=seed,
    )
    result = run_test(dataset, config, workers=_resolve_threads(args.threads))
    payload = result_to_json(result, master, args.alpha)
    _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
    return 0


def cmd_residuals(args) -> int:
    dataset = read_dataset_csv(args.csv)
    fx = fit(dataset.x, dataset.z, method=args.bandwidth)
    fy = fit(dataset.y, dataset.z, method=args.bandwidth)
    fz = fit_rosenblatt(dataset.z, method=args.bandwidth)
    rv = build_residual_vector(dataset, fx, fy, fz)
    k = rv.u.shape[1]
    header = [f"u{j + 1}" for j in range(k)] + [f"t{j + 1}" for j in range(k)]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for i in range(rv.n):
        writer.writerow([_fmt(v) for v in rv.u[i]] + [_fmt(v) for v in rv.t[i]])
    if args.out is None:
        sys.stdout.write(buf.getvalue())
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    diagnostics = {
        "ks_uniform": [float(ks_uniform_distance(rv.u[:, j])) for j in range(k)]
    }
    sys.stderr.write(json.dumps(diagnostics, sort_keys=True) + "\n")
    return 0


def _grid_key(d: int, sigma_w: float) -> tuple[str, str]:
    return (str(int(d)), _fmt(sigma_w))


def _read_existing_power_rows(path: str, header: list[str]) -> dict:
    if not os.path.exists(path):
        return {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            found = next(reader)
        except StopIteration:
            return {}
        if found != header:
            raise CliError(
                f"{path}: existing file is not a power table (header mismatch); "
                "refusing to append"
            )
        return {(row[0], row[1]): row for row in reader if row}


def cmd_power(args) -> int:
    config = load_experiment_config(args.config, args.paper_scale)
    if config.scenario != "gaussian-latent":
        raise CliError("power curves need the gaussian-latent scenario (sigma_w axis)")
    out_path = args.out or config.out
    if out_path is None:
        raise CliError("power needs an output path (config 'out' or --out)")
    seed, master = _resolve_seed(args.seed if args.seed is not None else config.seed)
    threads = _resolve_threads(args.threads)
    header = ["d", "sigma_w", "n", "replications", "rejection_rate", "mean_p_value", "seed"]
    existing = _read_existing_power_rows(out_path, header)

    grid = sorted((int(d), float(sw)) for d in config.dimensions for sw in config.sigma_w_grid)
    write_header = not os.path.exists(out_path)
    with open(out_path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if write_header:
            writer.writerow(header)
            fh.flush()
        for d, sigma_w in grid:
            if _grid_key(d, sigma_w) in existing:
                continue
            scenario = make_scenario(config.scenario, d=d, sigma_w=sigma_w)
            base = seed.child("power", d, _fmt(sigma_w))
            test_config = CiTestConfig(
                bootstrap_replicates=config.bootstrap_replicates,
                bandwidth_method=config.bandwidth_method,
                refit_bandwidths=config.refit_bandwidths,
                seed=base,
            )
            pvals = pvalue_histogram(
                scenario,
                config.n,
                config.replications,
                test_config,
                method="full-test",
                workers=threads,
            )
            rejection = float(np.mean(pvals <= config.alpha))
            writer.writerow(
                [
                    str(d),
                    _fmt(sigma_w),
                    str(config.n),
                    str(config.replications),
                    _fmt(rejection),
                    _fmt(float(np.mean(pvals))),
                    str(master),
                ]
            )
            fh.flush()
    return 0


def cmd_hist(args) -> int:
    config = load_experiment_config(args.config, args.paper_scale)
    if config.scenario != "modulo-counterexample":
        raise CliError("hist reproduces the counterexample; set scenario accordingly")
    out_path = args.out or config.out
    seed, master = _resolve_seed(args.seed if args.seed is not None else config.seed)
    scenario = make_scenario(config.scenario)
    test_config = CiTestConfig(
        bootstrap_replicates=config.bootstrap_replicates,
        bandwidth_method=config.bandwidth_method,
        refit_bandwidths=config.refit_bandwidths,
        seed=seed,
    )
    pvals = pvalue_histogram(
        scenario,
        config.n,
        config.replications,
        test_config,
        method=config.method,
        workers=_resolve_threads(args.threads),
    )
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["replicate", "p_value", "seed"])
    for i, p in enumerate(pvals):
        writer.writerow([str(i), _fmt(p), str(master)])
    if out_path is None:
        sys.stdout.write(buf.getvalue())
    else:
        with open(out_path, "w", newline="") as fh:
            fh.write(buf.getvalue())
    return 0


def cmd_gen(args) -> int:
    params = {}
    if args.scenario == "gaussian-latent":
        params = {
            "d": args.d,
            "sigma_w": args.sigma_w,
            "sigma_e": args.sigma_e,
            "sigma_z": args.sigma_z,
        }
    scenario = make_scenario(args.scenario, **params)
    seed, master = _resolve_seed(args.seed)
    if args.seed is None:
        sys.stderr.write(f"drawn seed: {master}\n")
    dataset = generate(scenario, args.n, seed)
    if args.out is None:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(_expected_header(dataset.d))
        for i in range(dataset.n):
            writer.writerow(
                [_fmt(dataset.x[i]), _fmt(dataset.y[i])]
                + [_fmt(v) for v in dataset.z[i]]
            )
        sys.stdout.write(buf.getvalue())
    else:
        write_dataset_csv(dataset, args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_common(parser, seed=True, threads=True, out=True):
    if seed:
        parser.add_argument("--seed", type=int, default=None, help="master seed")
    if threads:
        parser.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker processes (NPCIT_THREADS overrides)",
        )
    if out:
        parser.add_argument("--out", default=None, help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npcit",
        description="Conditional independence testing via nonparametric residuals",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="run the CI test on a CSV file")
    p_test.add_argument("csv", help="input CSV with header x,y,z1..zd")
    p_test.add_argument("--B", type=int, default=None, help="bootstrap replicates")
    p_test.add_argument("--alpha", type=float, default=0.05)
    p_test.add_argument(
        "--bandwidth", choices=_BANDWIDTH_CHOICES, default="least-squares-cv"
    )
    p_test.add_argument(
        "--freeze-bandwidths",
        action="store_true",
        help="reuse the original bandwidths inside bootstrap refits",
    )
    p_test.add_argument("--paper-scale", action="store_true")
    _add_common(p_test)
    p_test.set_defaults(func=cmd_test)

    p_power = sub.add_parser("power", help="rejection-rate grid for a scenario config")
    p_power.add_argument("config", help="JSON experiment config")
    p_power.add_argument("--paper-scale", action="store_true")
    _add_common(p_power)
    p_power.set_defaults(func=cmd_power)

    p_hist = sub.add_parser("hist", help="p-value histogram data (counterexample)")
    p_hist.add_argument("config", help="JSON experiment config")
    p_hist.add_argument("--paper-scale", action="store_true")
    _add_common(p_hist)
    p_hist.set_defaults(func=cmd_hist)

    p_res = sub.add_parser("residuals", help="export the residual transform of a CSV")
    p_res.add_argument("csv", help="input CSV with header x,y,z1..zd")
    p_res.add_argument(
        "--bandwidth", choices=_BANDWIDTH_CHOICES, default="least-squares-cv"
    )
    _add_common(p_res, seed=False, threads=False)
    p_res.set_defaults(func=cmd_residuals)

    p_gen = sub.add_parser("gen", help="draw a scenario dataset to CSV")
    p_gen.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--d", type=int, default=1)
    p_gen.add_argument("--sigma-w", dest="sigma_w", type=float, default=0.0)
    p_gen.add_argument("--sigma-e", dest="sigma_e", type=float, default=0.3)
    p_gen.add_argument("--sigma-z", dest="sigma_z", type=float, default=0.2)
    _add_common(p_gen, threads=False)
    p_gen.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        sys.stderr.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
