"""Command-line front end.

Exit codes: 0 success or no violation, 1 violation found (or entanglement not
established), 2 configuration error, 3 resource limit, 4 solver failure.
Reports go to stdout (or ``--output``); diagnostics and progress go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .entanglement import genuine_entanglement_report
from .errors import MulticorrError, ResourceLimit, SolverNumericalFailure
from .lhv import (
    COLUMN_CAP,
    DEFAULT_TOL,
    Scenario,
    behavior,
    check_certificate,
    epsilon_scan,
    lp_membership,
    optimize_settings,
    strategy_count,
)
from .lhv.polytope import SAMPLED_STRATEGIES
from .lhv.search import MAX_EVALS
from .pauli import LocalObservable, correlation_tensor, covariance, random_hermitian
from .qstate import (
    I2,
    QUBIT_CAP,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    density_matrix,
    make_ghz,
    make_purification,
    make_rho,
    partial_trace,
)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_SOLVER = 4

PURIFY_TOL = 1e-12


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated inputs of one run; embedded verbatim in every report."""

    command: str
    n: int
    p: float = 0.5
    epsilon: float | None = None
    state: str = "rho"
    weight: list = field(default_factory=list)
    settings: list | None = None
    scenario_file: str | None = None
    grid: list | None = None
    observables: list | None = None
    random_draws: int | None = None
    seed: int = 0
    restarts: int = 0
    max_iter: int | None = None
    max_evals: int | None = None
    column_generation: bool = False
    tol: float = DEFAULT_TOL
    format: str = "json"
    omit_entries: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


# -- parsing helpers ----------------------------------------------------------------

_TERM = re.compile(r"([+-]?)\s*(\d*\.?\d*(?:[eE][+-]?\d+)?)\s*\*?\s*([IXYZ])")
_PAULI = {"I": I2, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}


def parse_observable(spec: str) -> np.ndarray:
    """Linear combination of Pauli letters with real coefficients, e.g. ``I+Z`` or ``0.5X-2Y``."""
    text = spec.replace(" ", "")
    pos, out = 0, np.zeros((2, 2), dtype=complex)
    while pos < len(text):
        match = _TERM.match(text, pos)
        if not match or match.end() == pos:
            raise ConfigError(f"cannot parse observable {spec!r}")
        sign, coef, letter = match.groups()
        value = float(coef) if coef not in ("", ".") else 1.0
        out += (-value if sign == "-" else value) * _PAULI[letter]
        pos = match.end()
    if not text:
        raise ConfigError("empty observable")
    return out


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop included) or a comma list."""
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ConfigError(f"bad grid {text!r}: expected start:stop:step with step > 0")
            count = int(np.floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1
            values = [round(parts[0] + i * parts[2], 12) for i in range(count)]
        else:
            values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc
    if not values:
        raise ConfigError("empty grid")
    for v in values:
        if not 0.0 <= v <= 0.5:
            raise ConfigError(f"grid value {v} outside [0, 0.5]")
    return values


def parse_int_list(text: str, what: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad {what} {text!r}") from exc
    if not values:
        raise ConfigError(f"empty {what}")
    return values


# -- argument parser ------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, restarts: int | None = None):
    p.add_argument("--n", type=int, required=True, help="number of qubits")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--threads", type=int, help="worker cap (MULTICORR_THREADS overrides)")
    if restarts is not None:
        p.add_argument("--restarts", type=int, default=restarts)


def _state_args(p: argparse.ArgumentParser, with_state: bool = False):
    p.add_argument("--p", type=float, default=0.5, help="weight of |W> in rho_p")
    p.add_argument("--epsilon", type=float, help="use rho_eps = rho_(1/2 + eps)")
    if with_state:
        p.add_argument("--state", choices=("rho", "ghz"), default="rho")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multicorr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"multicorr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correlators", help="Pauli correlator scan of rho_p")
    _common(p)
    _state_args(p)
    p.add_argument("--weight", help="comma list of string weights (default n)")
    p.add_argument("--omit-entries", action="store_true", help="report only summary fields")

    p = sub.add_parser("covariance", help="covariances of local observables on rho_p")
    _common(p)
    _state_args(p)
    p.add_argument("--observable", action="append", default=[], metavar="SITE:SPEC",
                   help="e.g. 0:Z or 2:I+Z (repeatable; sites are 0-based)")
    p.add_argument("--random", type=int, dest="random_draws",
                   help="draw this many random Hermitian n-tuples instead")

    p = sub.add_parser("entanglement", help="bipartition-wise entanglement certificates for rho_p")
    _common(p, restarts=50)
    _state_args(p)
    p.add_argument("--max-iter", type=int, default=500)

    p = sub.add_parser("lhv", help="local hidden variable test")
    _common(p, restarts=20)
    _state_args(p, with_state=True)
    p.add_argument("--settings", required=True, help="per-party counts (4,4,4) or a scenario JSON file")
    p.add_argument("--max-evals", type=int, default=MAX_EVALS)
    p.add_argument("--column-generation", action="store_true")

    p = sub.add_parser("eps-scan", help="epsilon threshold scan")
    _common(p, restarts=20)
    p.add_argument("--grid", required=True, help="start:stop:step or comma list, within [0, 0.5]")
    p.add_argument("--settings", required=True, help="per-party setting counts")
    p.add_argument("--max-evals", type=int, default=MAX_EVALS)

    p = sub.add_parser("purify", help="purification round trip")
    _common(p)
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    cmd = args.command
    if not 2 <= args.n <= QUBIT_CAP:
        raise ConfigError(f"--n {args.n} outside [2, {QUBIT_CAP}]")
    if not args.tol > 0:
        raise ConfigError("--tol must be positive")
    cfg = RunConfig(command=cmd, n=args.n, seed=args.seed, tol=args.tol, format=args.format)
    if hasattr(args, "p"):
        if not 0.0 <= args.p <= 1.0:
            raise ConfigError(f"--p {args.p} outside [0, 1]")
        cfg.p = args.p
        if args.epsilon is not None:
            if not 0.0 <= args.epsilon <= 0.5:
                raise ConfigError(f"--epsilon {args.epsilon} outside [0, 0.5]")
            cfg.epsilon = args.epsilon
            cfg.p = 0.5 + args.epsilon
    if hasattr(args, "restarts"):
        if args.restarts < (1 if cmd == "entanglement" else 0):
            raise ConfigError(f"--restarts {args.restarts} too small")
        cfg.restarts = args.restarts
    if hasattr(args, "max_evals"):
        if args.max_evals < 1:
            raise ConfigError("--max-evals must be positive")
        cfg.max_evals = args.max_evals

    if cmd == "correlators":
        cfg.weight = parse_int_list(args.weight, "weight list") if args.weight else [args.n]
        for w in cfg.weight:
            if not 1 <= w <= args.n:
                raise ConfigError(f"weight {w} outside [1, {args.n}]")
        cfg.omit_entries = args.omit_entries
    elif cmd == "covariance":
        if bool(args.observable) == bool(args.random_draws):
            raise ConfigError("give either --observable entries or --random")
        if args.random_draws is not None and args.random_draws < 1:
            raise ConfigError("--random must be positive")
        cfg.random_draws = args.random_draws
        obs = []
        for item in args.observable:
            site, _, spec = item.partition(":")
            try:
                site = int(site)
            except ValueError as exc:
                raise ConfigError(f"bad observable {item!r}; expected SITE:SPEC") from exc
            if not 0 <= site < args.n:
                raise ConfigError(f"site {site} out of range for n={args.n}")
            parse_observable(spec)
            obs.append([site, spec])
        cfg.observables = obs or None
    elif cmd == "entanglement":
        if args.max_iter < 1:
            raise ConfigError("--max-iter must be positive")
        cfg.max_iter = args.max_iter
    elif cmd in ("lhv", "eps-scan"):
        if cmd == "lhv":
            cfg.state = args.state
            cfg.column_generation = args.column_generation
        if cmd == "lhv" and os.path.isfile(args.settings):
            cfg.scenario_file = args.settings
        else:
            cfg.settings = parse_int_list(args.settings, "settings")
            if len(cfg.settings) != args.n or min(cfg.settings) < 1:
                raise ConfigError(f"--settings needs {args.n} positive counts")
        if cmd == "eps-scan":
            cfg.grid = parse_grid(args.grid)
    return cfg


# -- commands ------------------------------------------------------------------------


def _state(cfg: RunConfig):
    if cfg.state == "ghz":
        return make_ghz(cfg.n)
    return make_rho(cfg.n, cfg.p)


def cmd_correlators(cfg: RunConfig, threads: int | None):
    reports = [correlation_tensor(_state(cfg), w, threads=threads) for w in cfg.weight]
    if cfg.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["weight", "string", "value"])
        for r in reports:
            for k, v in r.entries.items():
                writer.writerow([r.weight, str(k), repr(v)])
        return EXIT_OK, buf.getvalue()
    return EXIT_OK, {"reports": [r.to_dict(include_entries=not cfg.omit_entries) for r in reports]}


def cmd_covariance(cfg: RunConfig, threads: int | None):
    state = _state(cfg)
    rows = []
    if cfg.observables:
        obs = [LocalObservable(site, parse_observable(spec)) for site, spec in cfg.observables]
        rows.append({"observables": cfg.observables, "value": covariance(state, obs)})
    else:
        rng = np.random.default_rng(cfg.seed)
        for _ in range(cfg.random_draws):
            obs = [LocalObservable(k, random_hermitian(rng)) for k in range(cfg.n)]
            rows.append({"observables": [[o.site, _matrix_label(o.matrix)] for o in obs],
                         "value": covariance(state, obs)})
    max_abs = max(abs(r["value"]) for r in rows)
    if cfg.format == "csv":
        lines = ["draw,value"] + [f"{i},{r['value']!r}" for i, r in enumerate(rows)]
        return EXIT_OK, "\n".join(lines) + "\n"
    return EXIT_OK, {"covariances": rows, "max_abs": max_abs}


def _matrix_label(m: np.ndarray) -> str:
    """Bloch coordinates a0 I + a.sigma of a Hermitian 2x2 matrix."""
    a0 = np.real(np.trace(m)) / 2
    vec = [np.real(np.trace(m @ s)) / 2 for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
    return "{:+.17g}I{:+.17g}X{:+.17g}Y{:+.17g}Z".format(a0, *vec)


def cmd_entanglement(cfg: RunConfig, threads: int | None):
    report = genuine_entanglement_report(cfg.n, cfg.p, restarts=cfg.restarts, seed=cfg.seed,
                                         max_iter=cfg.max_iter, threads=threads)
    code = EXIT_OK if report.verdict else EXIT_VIOLATION
    if cfg.format == "csv":
        lines = ["cut,negativity,best_overlap,weight_argument,positive"]
        for c in report.cuts:
            lines.append(f"\"{c.cut.label}\",{c.negativity!r},{c.seesaw.best_overlap!r},"
                         f"{c.weight_check},{c.positive}")
        return code, "\n".join(lines) + "\n"
    return code, report.to_dict()


def cmd_lhv(cfg: RunConfig, threads: int | None):
    state = _state(cfg)
    if cfg.scenario_file:
        with open(cfg.scenario_file) as fh:
            try:
                scenario = Scenario.from_json(fh.read())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"scenario file is not JSON: {exc}") from exc
        b = behavior(state, scenario)
        result = lp_membership(b, cfg.tol, column_generation=cfg.column_generation)
    else:
        scenario, result = optimize_settings(state, cfg.settings, cfg.restarts, cfg.seed, tol=cfg.tol,
                                             max_evals=cfg.max_evals, threads=threads)
        b = behavior(state, scenario)
    verified = None
    if not result.feasible_at_one:
        sample = None if strategy_count(scenario.m) <= COLUMN_CAP else SAMPLED_STRATEGIES
        verified = check_certificate(result.certificate, b, tol=cfg.tol, max_strategies=sample, seed=cfg.seed)
        if not verified:
            raise SolverNumericalFailure("dual certificate failed verification", "certificate_rejected")
    code = EXIT_OK if result.feasible_at_one else EXIT_VIOLATION
    if cfg.format == "csv":
        return code, b.to_csv()
    return code, {
        "scenario": scenario.to_dict(),
        "lp": result.to_dict(),
        "violation": not result.feasible_at_one,
        "certificate_verified": verified,
    }


def cmd_eps_scan(cfg: RunConfig, threads: int | None):
    def progress(eps, v):
        print(f"eps={eps:g} v*={v:.10f}", file=sys.stderr, flush=True)

    report = epsilon_scan(cfg.n, cfg.settings, cfg.grid, cfg.restarts, cfg.seed, tol=cfg.tol,
                          max_evals=cfg.max_evals, threads=threads, progress=progress)
    code = EXIT_VIOLATION if report.threshold is not None else EXIT_OK
    if cfg.format == "csv":
        return code, report.to_csv()
    return code, report.to_dict()


def cmd_purify(cfg: RunConfig, threads: int | None):
    if cfg.n + 1 > QUBIT_CAP:
        raise ResourceLimit(f"purification of n={cfg.n} needs {cfg.n + 1} qubits, above the cap {QUBIT_CAP}")
    reduced = partial_trace(make_purification(cfg.n), range(cfg.n))
    target = density_matrix(make_rho(cfg.n, 0.5))
    dev = reduced.max_abs_diff(target)
    doc = {"n": cfg.n, "ancilla_site": cfg.n, "max_deviation": dev, "ok": dev <= PURIFY_TOL}
    if cfg.format == "csv":
        return EXIT_OK, f"n,max_deviation,ok\n{cfg.n},{dev!r},{doc['ok']}\n"
    return EXIT_OK, doc


COMMANDS = {
    "correlators": cmd_correlators,
    "covariance": cmd_covariance,
    "entanglement": cmd_entanglement,
    "lhv": cmd_lhv,
    "eps-scan": cmd_eps_scan,
    "purify": cmd_purify,
}


def _threads(args) -> int | None:
    env = os.environ.get("MULTICORR_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"MULTICORR_THREADS={env!r} is not an integer") from exc
    else:
        value = args.threads
    if value is not None and value < 1:
        raise ConfigError("thread count must be positive")
    return value


def _emit(cfg: RunConfig, body, output: str | None):
    if isinstance(body, str):
        text = body
    else:
        doc = {"tool": "multicorr", "version": __version__, "config": cfg.to_dict(), "result": body}
        text = json.dumps(doc, indent=2) + "\n"
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = make_config(args)
        threads = _threads(args)
        code, body = COMMANDS[cfg.command](cfg, threads)
        _emit(cfg, body, args.output)
        return code
    except ResourceLimit as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except SolverNumericalFailure as exc:
        print(f"solver failure ({exc.status}): {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except np.linalg.LinAlgError as exc:
        # subclasses ValueError, so it must be caught before the config branch
        print(f"solver failure (linear algebra): {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, MulticorrError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
