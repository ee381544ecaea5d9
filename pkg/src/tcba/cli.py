"""Command-line front end: ``tcba {run,estimate,sweep,verify,theory}``.

Every option may also come from a flat ``key=value`` file given with
``--config``; keys are the long flag names without dashes (``trials=1000``,
``tolerance_scale=0``). Precedence, highest first: flag, config file,
``TCBA_SEED`` (seed only), built-in default.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import engine, harness, stats, theory
from .core import Exponential, InvalidParams, ModelParams, RngContract, Uniform, sample_configuration
from .engine import Lazy, QueueExhausted, TieError

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("tcba")


class UsageError(Exception):
    pass


DEFAULTS: dict[str, Any] = {
    "a": 0.0, "b": 0.0, "x": 0.0, "p": 0.5,
    "n": 1000, "trials": 10000, "seed": 0,
    "spacing": "exponential", "threads": None,
    "output": None, "format": "csv",
    # subcommand specific
    "summary": None, "estimand": "q", "backend": "lazy",
    "grid": None, "only": None, "tolerance_scale": 1.0, "trial_scale": 1.0,
}

_TYPES = {
    "a": float, "b": float, "x": float, "p": float, "n": int, "trials": int, "seed": int,
    "threads": int, "tolerance_scale": float, "trial_scale": float,
}


@dataclass
class RunSpec:
    subcommand: str
    params: ModelParams
    n: int
    trials: int
    seed: int
    spacing: str
    threads: int
    output: str | None
    format: str
    extra: dict = field(default_factory=dict)

    def spacing_dist(self):
        return Exponential() if self.spacing == "exponential" else Uniform()


def read_config(path: str) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            k = k.replace("-", "_")
            if k not in DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown key {k!r}")
            out[k] = v
    return out


def _convert(key: str, value):
    if value is None or key not in _TYPES or not isinstance(value, str):
        return value
    try:
        return _TYPES[key](value)
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None


def resolve(ns: argparse.Namespace, env=None) -> RunSpec:
    env = os.environ if env is None else env
    file_vals = read_config(ns.config) if getattr(ns, "config", None) else {}
    vals = {}
    for key, default in DEFAULTS.items():
        flag = getattr(ns, key, None)
        if flag is not None:
            vals[key] = flag
        elif key in file_vals:
            vals[key] = file_vals[key]
        elif key == "seed" and env.get("TCBA_SEED"):
            vals[key] = env["TCBA_SEED"]
        else:
            vals[key] = default
        vals[key] = _convert(key, vals[key])
    try:
        params = ModelParams(vals["a"], vals["b"], vals["x"], vals["p"])
    except InvalidParams as exc:
        raise UsageError(str(exc)) from None
    if vals["spacing"] not in ("exponential", "uniform"):
        raise UsageError(f"unknown spacing {vals['spacing']!r}")
    if vals["format"] not in ("csv", "jsonl"):
        raise UsageError(f"unknown format {vals['format']!r}")
    if vals["n"] < 1 or vals["trials"] < 1:
        raise UsageError("n and trials must be positive")
    threads = vals["threads"] or os.cpu_count() or 1
    core = ("a", "b", "x", "p", "n", "trials", "seed", "spacing", "threads", "output", "format")
    return RunSpec(
        ns.command, params, vals["n"], vals["trials"], vals["seed"], vals["spacing"], threads,
        vals["output"], vals["format"], {k: v for k, v in vals.items() if k not in core},
    )


class _Sink:
    """Single ordered output: a file, or stdout when no path is given."""

    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w", newline="") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()
        else:
            self.fh.flush()
        return False


# ------------------------------------------------------------ commands


def cmd_run(spec: RunSpec) -> int:
    contract = RngContract(spec.seed)
    cfg = sample_configuration(spec.params, spec.n, spec.spacing_dist(), contract.stream(0, "config"))
    res = engine.run(cfg, spec.params, Lazy(contract.stream(0, "lazy")), probe=0.0)
    with _Sink(spec.output) as fh:
        res.dump_jsonl(fh)
    summary_path = spec.extra.get("summary")
    with (open(summary_path, "w", newline="") if summary_path else _Stderr()) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("particle", "velocity", "quiver"))
        for s in res.survivors:
            w.writerow((s.particle, int(s.velocity), s.quiver))
    log.info("%d events, %d survivors", len(res.events), len(res.survivors))
    return EXIT_OK


class _Stderr:
    def __enter__(self):
        return sys.stderr

    def __exit__(self, *exc):
        return False


def _estimate(spec: RunSpec, params: ModelParams) -> tuple[str, stats.Estimate]:
    kind = spec.extra["estimand"]
    sp = spec.spacing_dist()
    if kind == "q":
        return "q", stats.estimate_q(
            params, spec.n, spec.trials, sp, spec.seed, backend=spec.extra["backend"], threads=spec.threads
        )
    if kind == "theta":
        return "theta", stats.estimate_theta(params, spec.n, spec.trials, sp, spec.seed, spec.threads)
    if kind == "en":
        return "EN", stats.estimate_EN(params, spec.n, spec.trials, sp, spec.seed, threads=spec.threads)
    raise UsageError(f"unknown estimand {kind!r}")


def cmd_estimate(spec: RunSpec) -> int:
    name, est = _estimate(spec, spec.params)
    row = est.csv_row(name, spec.params)
    with _Sink(spec.output) as fh:
        if spec.format == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(stats.CSV_HEADER)
            w.writerow(row)
        else:
            fh.write(json.dumps(dict(zip(stats.CSV_HEADER, row))) + "\n")
    return EXIT_OK


SWEEP_HEADER = ("p", "a", "b", "x", "n", "trials", "q_hat", "stderr", "q_theory", "p_star")


def parse_grid(text: str | None) -> list[float]:
    """``0.1,0.2,0.5`` or ``start:stop:count`` (inclusive linspace)."""
    if not text or not text.strip():
        return []
    text = text.strip()
    try:
        if ":" in text:
            lo, hi, num = text.split(":")
            return [float(v) for v in np.linspace(float(lo), float(hi), int(num))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}") from None


def cmd_sweep(spec: RunSpec) -> int:
    grid = parse_grid(spec.extra["grid"])
    if not grid:
        raise UsageError("empty p grid")
    if any(not (0.0 <= p < 1.0) for p in grid):
        raise UsageError("grid values must lie in [0, 1)")
    prm0 = spec.params
    ps = theory.p_star(prm0)
    f = stats.fmt
    with _Sink(spec.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        if spec.format == "csv":
            w.writerow(SWEEP_HEADER)
        for p in grid:
            prm = prm0.with_p(p)
            est = stats.estimate_q(prm, spec.n, spec.trials, spec.spacing_dist(), spec.seed, threads=spec.threads)
            row = [f(p), f(prm.a), f(prm.b), f(prm.x), f(spec.n), f(est.trials),
                   f(est.value), f(est.stderr), f(theory.q_theory(prm)), f(ps)]
            if spec.format == "csv":
                w.writerow(row)
            else:
                fh.write(json.dumps(dict(zip(SWEEP_HEADER, row))) + "\n")
            fh.flush()
    return EXIT_OK


def cmd_verify(spec: RunSpec) -> int:
    only = spec.extra["only"]
    names = [s for s in only.split(",") if s] if only else None
    scale = spec.extra["tolerance_scale"]
    try:
        reports = harness.default_suite(spec.seed, names, spec.extra["trial_scale"], spec.threads)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    with _Sink(spec.output) as fh:
        ok = harness.write_report(reports, fh, scale)
    for r in reports:
        log.info("%s %s p=%s observed=%s expected=%s", "PASS" if r.passes(scale) else "FAIL",
                 r.check_id, stats.fmt(r.p), stats.fmt(r.observed), stats.fmt(r.expected))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_theory(spec: RunSpec) -> int:
    with _Sink(spec.output) as fh:
        fh.write(theory.theory_point(spec.params).to_json() + "\n")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "estimate": cmd_estimate, "sweep": cmd_sweep, "verify": cmd_verify, "theory": cmd_theory}


# --------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and run options")
    for k in ("a", "b", "x", "p"):
        g.add_argument(f"--{k}", type=float)
    g.add_argument("--n", type=int, help="particles (per side for theta)")
    g.add_argument("--trials", type=int)
    g.add_argument("--seed", type=int, help="master seed (default $TCBA_SEED or 0)")
    g.add_argument("--spacing", choices=("exponential", "uniform"))
    g.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    g.add_argument("--output", "-o", help="output path (default stdout)")
    g.add_argument("--format", choices=("csv", "jsonl"))
    g.add_argument("--config", help="flat key=value file; flags override it")
    g.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="tcba", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="simulate one realization and dump its events")
    r.add_argument("--summary", help="survivor CSV path (default stderr)")
    e = sub.add_parser("estimate", parents=[common], help="Monte Carlo estimate of q, theta or E N_n")
    e.add_argument("--estimand", choices=("q", "theta", "en"))
    e.add_argument("--backend", choices=("lazy", "tape"))
    s = sub.add_parser("sweep", parents=[common], help="q_hat and q_theory over a grid of p")
    s.add_argument("--grid", help="comma list or start:stop:count")
    v = sub.add_parser("verify", parents=[common], help="run the verification suite, write the report CSV")
    v.add_argument("--only", help="comma list of suites: " + ",".join(harness.SUITES))
    v.add_argument("--tolerance-scale", dest="tolerance_scale", type=float)
    v.add_argument("--trial-scale", dest="trial_scale", type=float,
                   help="multiply the default trial counts")
    sub.add_parser("theory", parents=[common], help="print the closed-form point as JSON")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
    try:
        spec = resolve(ns)
        return COMMANDS[ns.command](spec)
    except (UsageError, InvalidParams, FileNotFoundError) as exc:
        print(f"tcba: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TieError, QueueExhausted, stats.TooManyDiscards, RuntimeError) as exc:
        print(f"tcba: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
