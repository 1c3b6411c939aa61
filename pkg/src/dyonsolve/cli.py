"""Command-line front end: ``dyonsolve run`` and ``dyonsolve check``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import traceback
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import oracle
from .errors import DyonError, NotConverged
from .fixed_point import SolveOptions, solve_dyon
from .params import Parameters, derive, validate
from .profile import FIELDS, FieldProfile
from .verifier import decay_quantities, verify

log = logging.getLogger("dyonsolve")

ORACLE_GAP_TOL = 1e-4
SOLVER_KEYS = ("alpha", "fp_tol", "max_iters", "theta", "N", "r_start", "r_max", "accel", "depth")
FLAG_KEYS = ("oracle", "decay_window", "adaptive_window")
TOP_KEYS = ("parameters", "solver", "flags", "output", "derived")


class ConfigError(DyonError, ValueError):
    pass


@dataclass
class RunConfig:
    parameters: Parameters
    solver: dict = field(default_factory=dict)
    oracle: bool = False
    decay_window: tuple = (0.5, 0.9)
    adaptive_window: bool = True
    output: str | None = None

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - set(TOP_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "parameters" not in data:
            raise ConfigError("config needs a 'parameters' block")
        try:
            params = Parameters.from_dict(data["parameters"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        solver = dict(data.get("solver") or {})
        bad = set(solver) - set(SOLVER_KEYS)
        if bad:
            raise ConfigError(f"unknown solver keys: {sorted(bad)}")
        flags = dict(data.get("flags") or {})
        bad = set(flags) - set(FLAG_KEYS)
        if bad:
            raise ConfigError(f"unknown flag keys: {sorted(bad)}")
        cfg = cls(
            parameters=params,
            solver=solver,
            oracle=bool(flags.get("oracle", False)),
            decay_window=tuple(flags.get("decay_window", (0.5, 0.9))),
            adaptive_window=bool(flags.get("adaptive_window", True)),
            output=data.get("output"),
        )
        cfg._check_ranges()
        if "derived" in data:
            # echo of a previous run: must reproduce exactly
            now = derive(params, solver.get("alpha")).to_dict()
            if now != data["derived"]:
                raise ConfigError("derived constants in config do not match the parameters")
        return cfg

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def _check_ranges(self):
        s = self.solver
        if "N" in s and not (isinstance(s["N"], int) and 100 <= s["N"] <= 10**6):
            raise ConfigError("solver.N must be an integer in [100, 1e6]")
        if "fp_tol" in s and not (1e-14 <= float(s["fp_tol"]) <= 1e-2):
            raise ConfigError("solver.fp_tol must lie in [1e-14, 1e-2]")
        if "max_iters" in s and not (isinstance(s["max_iters"], int) and s["max_iters"] >= 0):
            raise ConfigError("solver.max_iters must be a non-negative integer")
        if "theta" in s and not (0.0 < float(s["theta"]) <= 1.0):
            raise ConfigError("solver.theta must lie in (0, 1]")
        if "depth" in s and not (isinstance(s["depth"], int) and 0 <= s["depth"] <= 50):
            raise ConfigError("solver.depth must be an integer in [0, 50]")
        if "accel" in s and s["accel"] not in ("anderson", "none"):
            raise ConfigError("solver.accel must be 'anderson' or 'none'")
        for key in ("r_start", "r_max"):
            if key in s and s[key] is not None and not (float(s[key]) > 0 and math.isfinite(float(s[key]))):
                raise ConfigError(f"solver.{key} must be positive")
        if s.get("r_start") and s.get("r_max") and float(s["r_start"]) >= float(s["r_max"]):
            raise ConfigError("solver.r_start must be below solver.r_max")
        w = self.decay_window
        if len(w) != 2 or not (0.0 <= w[0] < w[1] <= 1.0):
            raise ConfigError("flags.decay_window must be two fractions 0 <= a < b <= 1")

    def solve_options(self):
        return SolveOptions(**{k: v for k, v in self.solver.items()})

    def resolved(self, consts):
        """Config echo with defaults filled in; valid input for ``from_dict``."""
        opts = self.solve_options()
        solver = {f.name: getattr(opts, f.name) for f in fields(opts) if f.name in SOLVER_KEYS}
        solver["alpha"] = consts.alpha
        return {
            "parameters": self.parameters.to_dict(),
            "solver": solver,
            "flags": {"oracle": self.oracle, "decay_window": list(self.decay_window),
                      "adaptive_window": self.adaptive_window},
            "derived": consts.to_dict(),
        }


def _json(path, obj):
    path.write_text(json.dumps(obj, indent=2, default=_default, allow_nan=True) + "\n")


def _default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serializable: {type(x)}")


def write_profile_csv(path, profile: FieldProfile):
    cols = ["r", *FIELDS, *(f"d{k}" for k in FIELDS)]
    data = np.column_stack([profile.grid, profile.values.T, profile.derivs.T])
    np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def read_profile_csv(path) -> FieldProfile:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return FieldProfile(data[:, 0].copy(), data[:, 1:7].T.copy(), data[:, 7:13].T.copy(), {})


def emit_plot_data(profile: FieldProfile, consts, outdir, report=None):
    """Write plotdata_fields.csv and plotdata_decay.csv.

    The decay file holds log|q| for each tail quantity and a reference line
    with the predicted slope, matched to the data at the start of its fit window.
    """
    if profile is None or profile.grid.size == 0:
        raise ValueError("empty profile: nothing to plot")
    outdir = Path(outdir)
    r = profile.grid
    header = ",".join(["r", *FIELDS])
    np.savetxt(outdir / "plotdata_fields.csv", np.column_stack([r, profile.values.T]), delimiter=",",
               header=header, comments="", fmt="%.17g")
    if report is None:
        report = verify(profile, consts)
    qs = decay_quantities(profile, consts)
    cols, data = ["r"], [r]
    with np.errstate(divide="ignore"):
        for fit in report.decay_fits:
            name = fit.quantity_id
            lq = np.log(np.abs(qs[name]))
            r0 = fit.window[0]
            i0 = min(int(np.searchsorted(r, r0)), r.size - 1)
            slope = 0.0 if name == "A" else -fit.predicted_rate
            ref = slope * (r - r[i0]) + lq[i0]
            cols += [f"log_{name}", f"ref_{name}"]
            data += [lq, ref]
    np.savetxt(outdir / "plotdata_decay.csv", np.column_stack(data), delimiter=",", header=",".join(cols),
               comments="", fmt="%.17g")


def _error(outdir, kind, message, **extra):
    outdir.mkdir(parents=True, exist_ok=True)
    _json(outdir / "error.json", {"error": kind, "message": message, **extra})
    print(f"error: {kind}: {message}", file=sys.stderr)
    return 1


def run(config: RunConfig, outdir=None) -> int:
    outdir = Path(outdir or config.output or "dyonsolve_out")
    outdir.mkdir(parents=True, exist_ok=True)
    res = validate(config.parameters)
    if not res.ok:
        return _error(outdir, "ValidationError", "; ".join(res.violations), violations=list(res.violations))
    try:
        consts = derive(config.parameters, config.solver.get("alpha"))
        opts = config.solve_options()
        _json(outdir / "params.json", config.resolved(consts))
        profile, trace = solve_dyon(config.parameters, opts, raise_on_fail=True)
    except NotConverged as exc:
        tr = exc.trace.to_dict() if exc.trace is not None else None
        return _error(outdir, "NotConverged", str(exc), trace=tr)
    except DyonError as exc:
        return _error(outdir, type(exc).__name__, str(exc), field=getattr(exc, "field", None))

    write_profile_csv(outdir / "profile.csv", profile)
    _json(outdir / "trace.json", trace.to_dict())
    if opts.max_iters == 0:
        return _error(outdir, "NotConverged", "max_iters = 0: initial guess returned", trace=trace.to_dict())
    report = verify(profile, consts, window=config.decay_window, adaptive=config.adaptive_window)
    _json(outdir / "report.json", report.to_dict())
    emit_plot_data(profile, consts, outdir, report)
    ok = trace.converged and report.overall
    if config.oracle:
        try:
            col = oracle.solve_collocation(consts, profile.grid, profile)
        except DyonError as exc:
            return _error(outdir, type(exc).__name__, f"oracle: {exc}")
        write_profile_csv(outdir / "oracle_profile.csv", col)
        gaps = oracle.compare(profile, col)
        worst = max(v["gap"] for v in gaps.values())
        _json(outdir / "compare.json", {"gaps": gaps, "max_gap": worst, "tolerance": ORACLE_GAP_TOL,
                                         "passed": worst <= ORACLE_GAP_TOL,
                                         "newton_residuals": col.newton_history.residuals})
        ok = ok and worst <= ORACLE_GAP_TOL
    print(f"converged in {len(trace.iterations)} iterations; report overall: {report.overall}")
    return 0 if ok else 1


def check(config_path) -> int:
    try:
        cfg = RunConfig.load(config_path)
    except (OSError, DyonError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 1
    res = validate(cfg.parameters)
    if not res.ok:
        for v in res.violations:
            print(v, file=sys.stderr)
        return 1
    consts = derive(cfg.parameters, cfg.solver.get("alpha"))
    print(json.dumps(consts.to_dict(), indent=2))
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="dyonsolve", description="Radial dyon profile solver.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    pr = sub.add_parser("run", help="solve, verify and write results")
    pr.add_argument("--config", required=True)
    pr.add_argument("--oracle", action="store_true", help="cross-check against the collocation solver")
    pr.add_argument("--out", default=None, help="output directory")
    pc = sub.add_parser("check", help="validate a config only")
    pc.add_argument("--config", required=True)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.cmd == "check":
        return check(args.config)
    out = Path(args.out) if args.out else None
    try:
        cfg = RunConfig.load(args.config)
    except (OSError, DyonError, ValueError) as exc:
        return _error(out or Path("dyonsolve_out"), "ConfigError", str(exc))
    if args.oracle:
        cfg.oracle = True
    try:
        return run(cfg, out)
    except Exception as exc:  # last-resort record for batch use
        return _error(out or Path(cfg.output or "dyonsolve_out"), type(exc).__name__, str(exc),
                      traceback=traceback.format_exc())


if __name__ == "__main__":
    sys.exit(main())
