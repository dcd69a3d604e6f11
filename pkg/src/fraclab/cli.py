"""Command-line driver: solve scenarios, run validation suites, dump paths.

Every subcommand writes a run manifest next to its outputs, echoing the full
resolved configuration (including the scenario document, so a manifest alone
suffices to re-run).  All output files are deterministic functions of that
configuration; wall-clock time is the only field allowed to vary between
reruns.  Exit status is 0 only when the run completed and every requested
check passed.
"""

from __future__ import annotations

import argparse
import importlib.metadata
import json
import sys
import time
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .checks import run_suite
from .errors import FracLabError
from .mc import sweep_grid, results_to_csv
from .model import (
    Ball,
    FullSpace,
    Interval,
    Scenario,
    scenario_from_json,
    scenario_hash,
    scenario_to_json,
    validate_scenario,
)
from .paths import record_trajectory, trajectory_to_csv
from .rng import RngStream, derive_stream
from .spectral import solve_prehistory_spectral, solve_spectral, solution_to_csv

_TRAJECTORY_TAG = 0x54


def _version() -> str:
    try:
        return importlib.metadata.version("fraclab")
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


def _parse_grid(spec: str, flag: str, parser: argparse.ArgumentParser) -> np.ndarray:
    """Parse ``a:b:n`` into n equally spaced points; bad or empty specs are
    usage errors, reported before any work starts."""
    parts = spec.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        parser.error(f"{flag} expects a:b:n, got {spec!r}")
    if n < 1:
        parser.error(f"{flag} needs at least one point, got n={n}")
    if n > 1 and not b > a:
        parser.error(f"{flag} needs b > a for n > 1, got {spec!r}")
    return np.linspace(a, b, n)


def _load_scenario(path: str, seed: int | None) -> Scenario:
    s = scenario_from_json(Path(path).read_text())
    if seed is not None:
        s = s.with_mc(seed=seed)
    problems = validate_scenario(s)
    if problems:
        raise FracLabError("scenario invalid: " + "; ".join(problems))
    return s


def _domain_center(s: Scenario) -> list[float]:
    d = s.domain
    if isinstance(d, Interval):
        return [0.5 * (d.a + d.b)]
    if isinstance(d, Ball):
        return list(d.center)
    if isinstance(d, FullSpace):
        return [0.0] * d.dim
    raise FracLabError(f"no default start point for domain {d!r}")


class _Manifest:
    """Accumulates run facts and always lands on disk, pass or fail."""

    def __init__(self, path: Path, command: Sequence[str], config: dict) -> None:
        self.path = path
        self.doc: dict = {
            "command": list(command),
            "config": config,
            "scenario_hash": None,
            "seed": None,
            "version": _version(),
            "outputs": [],
            "status": "error",
            "wall_clock_s": None,
        }
        self._t0 = time.perf_counter()

    def write(self) -> None:
        self.doc["wall_clock_s"] = time.perf_counter() - self._t0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.doc, indent=2) + "\n")


def _write_csv(path: Path, emit) -> str:
    with path.open("w") as fh:
        emit(fh)
    return path.name


def _comparison_csv(out: IO[str], sweep, sol) -> bool:
    """Node-wise MC vs series table; PASS means within 3 SE + bias margin."""
    out.write("t,x,mc_mean,spectral,diff,std_error,bias_margin,tolerance,verdict\n")
    all_pass = True
    for i in range(sweep.t.size):
        for j in range(sweep.x.shape[0]):
            diff = sweep.mean[i, j] - sol.values[i, j]
            tol = 3.0 * sweep.std_error[i, j] + sweep.bias_margin[i, j]
            ok = abs(diff) <= tol
            all_pass &= ok
            cells = [sweep.t[i], sweep.x[j, 0], sweep.mean[i, j], sol.values[i, j],
                     diff, sweep.std_error[i, j], sweep.bias_margin[i, j], tol]
            out.write(",".join(repr(float(c)) for c in cells))
            out.write(",PASS\n" if ok else ",FAIL\n")
    return all_pass


def _cmd_solve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    tt = _parse_grid(args.t_grid, "--t-grid", parser)
    xx = _parse_grid(args.x_grid, "--x-grid", parser)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _Manifest(out_dir / "manifest.json", args.argv_echo, {
        "backend": args.backend,
        "t_grid": args.t_grid,
        "x_grid": args.x_grid,
        "out": args.out,
        "workers": args.workers,
        "seed": args.seed,
    })
    code = 1
    try:
        s = _load_scenario(args.scenario, args.seed)
        man.doc["scenario_hash"] = scenario_hash(s)
        man.doc["seed"] = s.mc.seed
        man.doc["config"]["scenario"] = json.loads(scenario_to_json(s))
        route = "pre" if s.phi_past is not None else "post"
        sweep = sol = None
        if args.backend in ("mc", "both"):
            sweep = sweep_grid(s, route, tt, xx, workers=args.workers)
            name = _write_csv(out_dir / "mc_results.csv",
                              lambda fh: results_to_csv(sweep, fh))
            man.doc["outputs"].append(name)
        if args.backend in ("spectral", "both"):
            solver = solve_prehistory_spectral if route == "pre" else solve_spectral
            sol = solver(s, tt, xx)
            name = _write_csv(out_dir / "spectral_results.csv",
                              lambda fh: solution_to_csv(sol, fh))
            man.doc["outputs"].append(name)
        all_pass = True
        if args.backend == "both":
            with (out_dir / "comparison.csv").open("w") as fh:
                all_pass = _comparison_csv(fh, sweep, sol)
            man.doc["outputs"].append("comparison.csv")
            verdict = "PASS" if all_pass else "FAIL"
            print(f"comparison verdict: {verdict} "
                  f"({sweep.t.size * sweep.x.shape[0]} nodes, route {route})")
        man.doc["status"] = "ok" if all_pass else "fail"
        code = 0 if all_pass else 1
    except FracLabError as exc:
        man.doc["error"] = str(exc)
        print(f"error: {exc}", file=sys.stderr)
    finally:
        man.write()
    return code


def _cmd_validate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    man = _Manifest(out_dir / f"validation_{args.suite}_manifest.json", args.argv_echo, {
        "suite": args.suite,
        "samples": args.samples,
        "workers": args.workers,
        "out": args.out,
    })
    code = 1
    try:
        results = run_suite(args.suite, args.samples, workers=args.workers)
        csv_name = f"validation_{args.suite}.csv"
        with (out_dir / csv_name).open("w") as fh:
            fh.write("name,passed,measured,tolerance,detail\n")
            for r in results:
                fh.write(f'{r.name},{int(r.passed)},{repr(r.measured)},'
                         f'{repr(r.tolerance)},"{r.detail}"\n')
        man.doc["outputs"].append(csv_name)
        for r in results:
            print(r.line())
        n_fail = sum(not r.passed for r in results)
        print(f"suite {args.suite}: {len(results) - n_fail}/{len(results)} passed")
        man.doc["status"] = "ok" if n_fail == 0 else "fail"
        code = 0 if n_fail == 0 else 1
    except FracLabError as exc:
        man.doc["error"] = str(exc)
        print(f"error: {exc}", file=sys.stderr)
    finally:
        man.write()
    return code


def _cmd_trajectory(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    tt = _parse_grid(args.t_grid, "--t-grid", parser)
    out_path = Path(args.out)
    man = _Manifest(out_path.with_suffix(".manifest.json"), args.argv_echo, {
        "t_grid": args.t_grid,
        "x0": args.x0,
        "out": args.out,
        "seed": args.seed,
    })
    code = 1
    try:
        s = _load_scenario(args.scenario, args.seed)
        man.doc["scenario_hash"] = scenario_hash(s)
        man.doc["seed"] = s.mc.seed
        man.doc["config"]["scenario"] = json.loads(scenario_to_json(s))
        x0 = [float(v) for v in args.x0.split(",")] if args.x0 else _domain_center(s)
        man.doc["config"]["x0"] = x0
        rng = RngStream(seed=s.mc.seed,
                        stream_id=derive_stream(s.mc.seed, _TRAJECTORY_TAG))
        rec = record_trajectory(s.alpha, s.beta, s.domain, x0, tt, s.mc.path, rng)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        man.doc["outputs"].append(_write_csv(out_path,
                                             lambda fh: trajectory_to_csv(rec, fh)))
        man.doc["status"] = "ok"
        code = 0
    except FracLabError as exc:
        man.doc["error"] = str(exc)
        print(f"error: {exc}", file=sys.stderr)
    finally:
        man.write()
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fraclab",
        description="Monte-Carlo and spectral solvers for time-fractional "
                    "evolution problems, with validation suites.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="solve a scenario on a (t, x) grid")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--backend", choices=("mc", "spectral", "both"), default="both")
    p.add_argument("--t-grid", required=True, metavar="a:b:n")
    p.add_argument("--x-grid", required=True, metavar="a:b:n")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario's Monte-Carlo seed")

    p = sub.add_parser("validate", help="run a named validation suite")
    p.add_argument("--suite", required=True,
                   choices=("identities", "overshoot", "specfun", "residuals",
                            "representation"))
    p.add_argument("--samples", type=int, default=None,
                   help="sample budget per check (default: full budget)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("trajectory", help="record one path against a time ladder")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--t-grid", required=True, metavar="a:b:n")
    p.add_argument("--x0", default=None, metavar="v[,v...]",
                   help="start point (default: domain center)")
    p.add_argument("--out", required=True, help="output CSV file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario's Monte-Carlo seed")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv_echo = list(argv) if argv is not None else sys.argv[1:]
    fn = {"solve": _cmd_solve, "validate": _cmd_validate,
          "trajectory": _cmd_trajectory}[args.cmd]
    return fn(args, parser)


if __name__ == "__main__":
    sys.exit(main())
