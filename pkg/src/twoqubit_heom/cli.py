"""
Scenario runner.

    python -m twoqubit_heom simulate --config run.yaml [--out series.csv]
    python -m twoqubit_heom sweep --config run.yaml --lambda 1.0,1.5,2.0
    python -m twoqubit_heom converge --config run.yaml --tol 1e-3

Configs are YAML (or JSON) documents with a fixed set of keys; unknown keys
are rejected.  Exit status: 0 success, 1 config error, 2 numerical abort.
"""

import argparse
import copy
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from . import heom, rwa
from .heom import ConvergenceError, DriftError
from .measures import concurrence, discord, is_x_state
from .model import BathSpec, InitialStateSpec, SystemSpec, build_initial

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
DEFAULT_SAMPLES = 600
DEFAULT_DT = 0.01
CONVERGE_SPACING = 0.5
FMT = "%.12e"

SERIES_COLUMNS = ("t", "concurrence", "discord", "mutual_information", "classical_correlation",
                  "trace_error", "min_eigenvalue")
SWEEP_COLUMNS = ("lambda", "t", "concurrence", "discord")
CONVERGE_COLUMNS = ("N", "dt", "max_delta_concurrence", "max_delta_discord", "ado_count", "wall_time")

SCHEMA = {
    "topology": None,
    "solver": None,
    "system": {"omega_a", "omega_b"},
    "bath": {"lambda", "f", "gamma", "omega_c"},
    "initial": {"kind", "alpha", "r", "matrix"},
    "time": {"t_max", "n_samples", "dt"},
    "truncation": {"depth", "tolerance"},
    "pseudomode": {"n_ph"},
    "output": None,
}
REQUIRED = ("topology", "solver", "bath", "initial", "time")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    topology: str
    solver: str
    system: SystemSpec
    bath: BathSpec
    initial: InitialStateSpec
    t_max: float
    n_samples: int = DEFAULT_SAMPLES
    dt: float = DEFAULT_DT
    depth: object = "auto"
    tolerance: float = 1e-3
    n_ph: int = 32
    output: str = None

    @property
    def t_grid(self):
        return np.linspace(0.0, self.t_max, self.n_samples + 1)

    def step(self, dt=None):
        """Largest step ``<= dt`` that divides the output sample spacing."""
        dt = self.dt if dt is None else dt
        spacing = self.t_max / self.n_samples
        return spacing / np.ceil(spacing / dt - 1e-9)

    def with_lambda(self, lam, f=None):
        gamma = self.bath.gamma if f is None else f * lam
        return replace(self, bath=replace(self.bath, lam=lam, gamma=gamma))


def _number(section, key, value, positive=False, allow_zero=True):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if positive and (value < 0 or (value == 0 and not allow_zero)):
        raise ConfigError(f"{section}.{key} must be {'>=' if allow_zero else '>'} 0, got {value}")
    return float(value)


def parse_config(doc):
    """
    Validate a config tree and build a :class:`ScenarioConfig`.

    Returns the config and, when the bath was given through ``f``, that
    ratio (so sweeps keep ``gamma = f * lambda``).
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    for key, value in doc.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        allowed = SCHEMA[key]
        if allowed is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be a mapping")
            for sub in value:
                if sub not in allowed:
                    raise ConfigError(f"unknown key {key}.{sub!r}")
    for key in REQUIRED:
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")

    topology = doc["topology"]
    if topology not in ("independent", "common"):
        raise ConfigError(f"topology must be 'independent' or 'common', got {topology!r}")
    solver = doc["solver"]
    if solver not in ("heom", "rwa", "pseudomode"):
        raise ConfigError(f"solver must be heom, rwa or pseudomode, got {solver!r}")

    sys_doc = doc.get("system", {})
    try:
        system = SystemSpec(_number("system", "omega_a", sys_doc.get("omega_a", 1.0)),
                            _number("system", "omega_b", sys_doc.get("omega_b", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from None

    b = doc["bath"]
    if "lambda" not in b:
        raise ConfigError("missing required key 'bath.lambda'")
    if ("f" in b) == ("gamma" in b):
        raise ConfigError("bath needs exactly one of 'f' or 'gamma'")
    lam = _number("bath", "lambda", b["lambda"], positive=True)
    f = _number("bath", "f", b["f"], positive=True) if "f" in b else None
    gamma = f * lam if f is not None else _number("bath", "gamma", b["gamma"], positive=True)
    omega_c = _number("bath", "omega_c", b.get("omega_c", 1.0), positive=True, allow_zero=False)
    if gamma <= 0:
        raise ConfigError("bath.gamma (= f * lambda) must be > 0; give 'gamma' explicitly when lambda is 0")
    bath = BathSpec(lam, gamma, omega_c, topology)

    i = doc["initial"]
    if "kind" not in i:
        raise ConfigError("missing required key 'initial.kind'")
    try:
        matrix = np.array(i["matrix"], dtype=complex) if "matrix" in i else None
        initial = InitialStateSpec(i["kind"], _number("initial", "alpha", i.get("alpha", 1 / np.sqrt(2))),
                                   _number("initial", "r", i.get("r", 1.0)), matrix)
        rho0 = build_initial(initial)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"initial: {exc}") from None

    t = doc["time"]
    if "t_max" not in t:
        raise ConfigError("missing required key 'time.t_max'")
    t_max = _number("time", "t_max", t["t_max"], positive=True, allow_zero=False)
    n_samples = t.get("n_samples", DEFAULT_SAMPLES)
    if isinstance(n_samples, bool) or not isinstance(n_samples, int) or n_samples < 1:
        raise ConfigError(f"time.n_samples must be a positive integer, got {n_samples!r}")
    dt = _number("time", "dt", t.get("dt", DEFAULT_DT), positive=True, allow_zero=False)

    tr = doc.get("truncation", {})
    depth = tr.get("depth", "auto")
    if depth != "auto" and (isinstance(depth, bool) or not isinstance(depth, int) or depth < 1):
        raise ConfigError(f"truncation.depth must be a positive integer or 'auto', got {depth!r}")
    tolerance = _number("truncation", "tolerance", tr.get("tolerance", 1e-3), positive=True,
                        allow_zero=False)

    n_ph = doc.get("pseudomode", {}).get("n_ph", 32)
    if isinstance(n_ph, bool) or not isinstance(n_ph, int) or n_ph < 2:
        raise ConfigError(f"pseudomode.n_ph must be an integer >= 2, got {n_ph!r}")

    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output must be a path string")

    if solver == "rwa":
        if topology != "independent":
            raise ConfigError("solver 'rwa' requires topology 'independent'")
        if not is_x_state(rho0):
            raise ConfigError("solver 'rwa' requires an X-shaped initial state")
        if not (system.omega_a == system.omega_b == omega_c):
            raise ConfigError("solver 'rwa' requires omega_a == omega_b == bath.omega_c")
    if solver == "pseudomode":
        if topology != "common":
            raise ConfigError("solver 'pseudomode' requires topology 'common'")
        if system.omega_a != system.omega_b:
            raise ConfigError("solver 'pseudomode' requires omega_a == omega_b")

    cfg = ScenarioConfig(topology, solver, system, bath, initial, t_max, n_samples, dt, depth,
                         tolerance, n_ph, output)
    return cfg, f


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return parse_config(doc)


def _baths(cfg):
    return cfg.bath if cfg.topology == "common" else (cfg.bath, cfg.bath)


def resolve_truncation(cfg):
    """``(depth, dt, report)``; runs the convergence search for ``depth: auto``."""
    if cfg.depth != "auto":
        return cfg.depth, cfg.step(), None
    report = converge_scenario(cfg, cfg.tolerance)
    return report.depth, cfg.step(min(report.dt, cfg.dt)), report


def converge_scenario(cfg, tol):
    grid = np.arange(0.0, cfg.t_max + 1e-9, CONVERGE_SPACING)
    rho0 = build_initial(cfg.initial)
    return heom.converge(cfg.system, _baths(cfg), cfg.topology, rho0, grid, tol,
                         name=f"{cfg.topology}/lambda={cfg.bath.lam}/gamma={cfg.bath.gamma}")


def trajectory(cfg):
    """Reduced states on ``cfg.t_grid`` and their drift diagnostics."""
    rho0 = build_initial(cfg.initial)
    grid = cfg.t_grid
    if cfg.solver == "heom":
        depth, dt, _ = resolve_truncation(cfg)
        log.info("heom %s depth=%d dt=%.6g", cfg.topology, depth, dt)
        traj = heom.evolve(cfg.system, _baths(cfg), cfg.topology, rho0, grid, depth, dt)
        return traj.states, traj.trace_error, traj.min_eigenvalue
    if cfg.solver == "pseudomode":
        n_ph = cfg.n_ph
        while True:
            try:
                traj = rwa.pseudomode_evolve(rho0, cfg.bath, grid, n_ph, cfg.step(),
                                             omega_0=cfg.system.omega_a)
                break
            except DriftError as exc:
                if "Fock cutoff" not in str(exc) or n_ph >= 512:
                    raise
                n_ph *= 2
                log.info("raising pseudomode cutoff to %d", n_ph)
        return traj.states, traj.trace_error, traj.min_eigenvalue
    params = rwa.PFunctionParams(cfg.bath.lam, cfg.bath.gamma)
    states = np.array([rwa.rwa_propagate_x(rho0, t, params) for t in grid])
    trace_error = np.abs(np.trace(states, axis1=1, axis2=2) - 1)
    min_eig = np.linalg.eigvalsh(states)[:, 0]
    return states, trace_error, min_eig


def time_series(cfg):
    """Rows of :data:`SERIES_COLUMNS`."""
    states, trace_error, min_eig = trajectory(cfg)
    rows = []
    for t, rho, te, me in zip(cfg.t_grid, states, trace_error, min_eig):
        d = discord(rho)
        rows.append((t, concurrence(rho), d.discord, d.mutual_information, d.classical_correlation,
                     te, me))
    return np.array(rows)


def format_rows(columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(FMT % v for v in row))
    return "\n".join(lines) + "\n"


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_scenario(cfg, out=None):
    out = out or cfg.output
    if out is None:
        raise ConfigError("no output path: set 'output' in the config or pass --out")
    rows = time_series(cfg)
    write_atomic(out, format_rows(SERIES_COLUMNS, rows))
    return rows


def _sweep_point(args):
    cfg, lam, f = args
    try:
        rows = time_series(cfg.with_lambda(lam, f))
    except (DriftError, ConvergenceError, ValueError) as exc:
        return lam, None, f"{type(exc).__name__}: {exc}"
    return lam, rows, None


def run_sweep(cfg, lambdas, f=None, out=None, jobs=1):
    """
    Long-form ``(lambda, t, concurrence, discord)`` table, one block per lambda.

    Failing grid points are reported and skipped.  Returns the written rows
    and a ``{lambda: message}`` map of failures.
    """
    out = out or cfg.output
    if out is None:
        raise ConfigError("no output path: set 'output' in the config or pass --out")
    tasks = [(cfg, float(lam), f) for lam in lambdas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    rows, failures = [], {}
    for lam, series, err in results:
        if err is not None:
            failures[lam] = err
            continue
        rows.extend((lam, r[0], r[1], r[2]) for r in series)
    write_atomic(out, format_rows(SWEEP_COLUMNS, rows))
    return np.array(rows), failures


def run_converge(cfg, tol, out=None):
    if cfg.solver != "heom":
        raise ConfigError("converge applies to solver 'heom' only")
    report = converge_scenario(cfg, tol)
    if out is None:
        base = Path(cfg.output) if cfg.output else Path("series.csv")
        out = base.with_name(base.stem + "_converge.csv")
    write_atomic(out, format_rows(CONVERGE_COLUMNS, report.rows))
    return report


def _parse_lambdas(text):
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--lambda must be a comma-separated list of numbers, got {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise ConfigError("--lambda needs at least one non-negative value")
    return values


def build_parser():
    parser = argparse.ArgumentParser(prog="twoqubit-heom", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and write its time series")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="run a scenario over a grid of coupling strengths")
    p.add_argument("--config", required=True)
    p.add_argument("--lambda", dest="lambdas", required=True)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("converge", help="search hierarchy depth and step size")
    p.add_argument("--config", required=True)
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--out")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    t0 = time.perf_counter()
    try:
        cfg, f = load_config(args.config)
        if args.command == "simulate":
            run_scenario(cfg, args.out)
        elif args.command == "sweep":
            _, failures = run_sweep(cfg, _parse_lambdas(args.lambdas), f, args.out, args.jobs)
            for lam, err in failures.items():
                print(f"sweep point lambda={lam:g} failed: {err}", file=sys.stderr)
            if failures:
                return EXIT_NUMERIC
        else:
            if not args.tol > 0:
                raise ConfigError("--tol must be positive")
            report = run_converge(cfg, args.tol, args.out)
            print(f"converged: N={report.depth} dt={report.dt:g} ado_count={report.ado_count}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DriftError, ConvergenceError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("done in %.1f s", time.perf_counter() - t0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
