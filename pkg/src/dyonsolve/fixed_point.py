"""Outer fixed-point iteration over the six per-field connecting orbits.

The map sends a state (rho, A, h) to (rho~, A~, h~) by solving, in order,

    f   from (rho, A)
    B   from (rho, A, h)
    sigma from (h)
    h~  from (sigma, B)
    rho~ from (f, A, B)
    A~  from (f, rho~, B)

each with the other fields frozen.  Iteration is damped on the state and
stopped when the weighted sup norm of F(x) - x falls below ``fp_tol``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import GridMismatch, NotConverged, PreconditionError
from .params import DerivedConstants, Parameters, derive, validate
from .profile import FIELDS, INDEX, FieldProfile, make_grid
from .radial import SHOOT_PARAM_NAME
from .shooting import DEFAULT_ATOL, DEFAULT_RTOL, solve_field

log = logging.getLogger(__name__)

SOLVE_ORDER = ("f", "B", "sigma", "h", "rho", "A")
STATE_FIELDS = ("rho", "A", "h")
R_MAX_FACTOR = 24.0


@dataclass
class SolveOptions:
    alpha: float | None = None
    fp_tol: float = 1e-8
    max_iters: int = 200
    theta: float = 0.7
    N: int = 2000
    r_start: float | None = None
    r_max: float | None = None
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    precondition_tol: float = 1e-8
    # "anderson" mixes the last `depth` residuals on top of the damped step;
    # "none" is the plain damped iteration
    accel: str = "anderson"
    depth: int = 5


@dataclass
class IterationRecord:
    residual: float
    field_sup: dict
    shoot_params: dict
    min_B_minus_A: float = float("nan")


@dataclass
class FixedPointTrace:
    iterations: list = field(default_factory=list)
    converged: bool = False
    norm_alpha: float = float("nan")
    theta: float = float("nan")
    accel: str = "none"

    @property
    def residuals(self):
        return [it.residual for it in self.iterations]

    def to_dict(self):
        return {
            "converged": self.converged,
            "norm_alpha": self.norm_alpha,
            "theta": self.theta,
            "accel": self.accel,
            "iterations": [asdict(it) for it in self.iterations],
        }


def default_grid_bounds(consts: DerivedConstants):
    """(r_start, r_max) used when the caller gives none."""
    r_start = 1e-3 * min(1.0, 1.0 / consts.kappa_decay)
    r_max = R_MAX_FACTOR / consts.min_rate
    return r_start, r_max


def weighted_norm(delta_rho, delta_A, delta_Phi, alpha, grid):
    """sup_r r^-a (1 + r^a) (|d rho| + |d A| + |d Phi|) on a common grid."""
    d = [np.asarray(x, dtype=float) for x in (delta_rho, delta_A, delta_Phi)]
    grid = np.asarray(grid, dtype=float)
    if any(x.shape != grid.shape for x in d):
        raise GridMismatch("weighted_norm arguments must share the grid shape")
    if grid.size == 0:
        return 0.0
    w = grid ** (-alpha) * (1.0 + grid**alpha)
    return float(np.max(w * (np.abs(d[0]) + np.abs(d[1]) + np.abs(d[2]))))


def initial_guess(consts: DerivedConstants, grid) -> FieldProfile:
    """Smooth profile meeting every boundary condition and the invariant-set bounds."""
    p = consts.params
    r = np.asarray(grid, dtype=float)
    kap = consts.kappa_decay
    f = 1.0 / (1.0 + (r * kap) ** 2)
    df = -2.0 * kap**2 * r * f * f
    t_mu, t_xi, t_nu = np.tanh(p.mu * r), np.tanh(consts.xi * r), np.tanh(consts.nu * r)
    vals = np.empty((6, r.size))
    ders = np.empty((6, r.size))
    vals[INDEX["f"]], ders[INDEX["f"]] = f, df
    vals[INDEX["h"]], ders[INDEX["h"]] = f, df
    vals[INDEX["rho"]] = consts.rho0 * t_mu
    ders[INDEX["rho"]] = consts.rho0 * p.mu * (1 - t_mu**2)
    vals[INDEX["sigma"]] = consts.sigma0 * t_xi
    ders[INDEX["sigma"]] = consts.sigma0 * consts.xi * (1 - t_xi**2)
    for name, level in (("A", p.A0), ("B", p.B0)):
        vals[INDEX[name]] = level * t_nu
        ders[INDEX[name]] = level * consts.nu * (1 - t_nu**2)
    return FieldProfile(r, vals, ders, {})


def check_preconditions(profile: FieldProfile, consts: DerivedConstants, tol=1e-8):
    gap = profile["B"] - profile["A"]
    i = int(np.argmin(gap))
    if gap[i] < -tol:
        raise PreconditionError(
            f"B >= A violated: B - A = {gap[i]:.3e} at r = {profile.grid[i]:.6g}"
        )


def schauder_step(profile: FieldProfile, consts: DerivedConstants, r_max=None, rtol=DEFAULT_RTOL,
                  atol=DEFAULT_ATOL, precondition_tol=1e-8, warm=True) -> FieldProfile:
    """One application of the fixed-point map (undamped)."""
    check_preconditions(profile, consts, precondition_tol)
    cur = profile.copy()
    params = dict(profile.shoot_params)
    for name in SOLVE_ORDER:
        key = SHOOT_PARAM_NAME[name]
        guess = params.get(key) if warm else None
        sol = solve_field(name, cur, consts, r_max=r_max, rtol=rtol, atol=atol, guess=guess)
        cur = cur.with_field(name, sol.value, sol.derivative)
        params[key] = sol.param
    cur.shoot_params = params
    return cur


class _Anderson:
    """Anderson mixing of the state fields on top of the damped step.

    With depth 0 this is exactly new = theta * F(x) + (1 - theta) * x.
    Values and derivatives are mixed with the same coefficients, so the mixed
    profile stays consistent with its own slopes.
    """

    def __init__(self, depth, theta, weight):
        self.depth = depth
        self.theta = theta
        self.w = np.tile(weight, 2 * len(STATE_FIELDS))
        self.xs, self.gs = [], []

    @staticmethod
    def _pack(prof):
        idx = [INDEX[k] for k in STATE_FIELDS]
        return np.concatenate([prof.values[idx].ravel(), prof.derivs[idx].ravel()])

    def step(self, old: FieldProfile, new: FieldProfile) -> FieldProfile:
        x = self._pack(old)
        g = self._pack(new) - x
        self.xs.append(x)
        self.gs.append(g)
        if len(self.xs) > self.depth + 1:
            self.xs.pop(0)
            self.gs.pop(0)
        x_new = x + self.theta * g
        if len(self.xs) > 1:
            dX = np.diff(np.array(self.xs), axis=0).T
            dG = np.diff(np.array(self.gs), axis=0).T
            # only the value half carries the norm weight; derivatives ride along
            n = self.w.size // 2
            A = dG[:n] * self.w[:n, None]
            gamma, *_ = np.linalg.lstsq(A, g[:n] * self.w[:n], rcond=None)
            x_new = x_new - (dX + self.theta * dG) @ gamma
        out = _damp(old, new, self.theta)
        m = len(STATE_FIELDS)
        n = old.grid.size
        vals = x_new[: m * n].reshape(m, n)
        ders = x_new[m * n:].reshape(m, n)
        for j, k in enumerate(STATE_FIELDS):
            out.values[INDEX[k]] = vals[j]
            out.derivs[INDEX[k]] = ders[j]
        return out


def _damp(old: FieldProfile, new: FieldProfile, theta):
    vals = new.values.copy()
    ders = new.derivs.copy()
    for name in STATE_FIELDS:
        i = INDEX[name]
        vals[i] = theta * new.values[i] + (1 - theta) * old.values[i]
        ders[i] = theta * new.derivs[i] + (1 - theta) * old.derivs[i]
    return FieldProfile(new.grid, vals, ders, dict(new.shoot_params))


def solve_dyon(params: Parameters, options: SolveOptions | None = None, raise_on_fail=True):
    """Iterate the damped map from the initial guess to a fixed point.

    Returns (profile, trace).  Raises NotConverged (carrying the trace) when
    ``max_iters`` is exhausted, unless ``max_iters`` is 0 or ``raise_on_fail``
    is false.
    """
    opts = options or SolveOptions()
    res = validate(params)
    if not res.ok:
        from .errors import DomainError
        raise DomainError("; ".join(res.violations))
    consts = derive(params, opts.alpha)
    r0, r1 = default_grid_bounds(consts)
    grid = make_grid(opts.r_start or r0, opts.r_max or r1, opts.N)
    prof = initial_guess(consts, grid)
    if opts.accel not in ("anderson", "none"):
        raise ValueError(f"unknown accel {opts.accel!r}")
    trace = FixedPointTrace(norm_alpha=consts.alpha, theta=opts.theta, accel=opts.accel)
    if opts.max_iters == 0:
        return prof, trace
    mixer = _Anderson(opts.depth if opts.accel == "anderson" else 0, opts.theta,
                      grid ** (-consts.alpha) * (1.0 + grid**consts.alpha))
    for it in range(opts.max_iters):
        # intermediate iterates need not satisfy B >= A; only the output is checked
        new = schauder_step(prof, consts, rtol=opts.rtol, atol=opts.atol,
                            precondition_tol=math.inf)
        diff = new.values - prof.values
        resid = weighted_norm(diff[INDEX["rho"]], diff[INDEX["A"]], diff[INDEX["h"]], consts.alpha, grid)
        sup = {name: float(np.max(np.abs(diff[INDEX[name]]))) for name in FIELDS}
        gap = float(np.min(new["B"] - new["A"]))
        trace.iterations.append(IterationRecord(resid, sup, dict(new.shoot_params), gap))
        log.info("iteration %d residual %.3e", it + 1, resid)
        if resid < opts.fp_tol:
            trace.converged = True
            return new, trace
        prof = mixer.step(prof, new)
    if raise_on_fail:
        raise NotConverged(f"no convergence in {opts.max_iters} iterations", trace=trace,
                           history=trace.residuals)
    return prof, trace


def invariant_set_margins(profile: FieldProfile, consts: DerivedConstants, far_fraction=0.5):
    """Sample-wise margins of the invariant-set membership conditions.

    Non-negative margins mean the condition holds.  The far-field condition
    1/4 g^2 rho^2 >= 1/2 (1/4 g^2 rho0^2 + A0^2) is checked for
    r >= far_fraction * r_max, reading the unnamed coupling there as g.
    """
    p = consts.params
    r = profile.grid
    rho, A, B, h, sig = profile["rho"], profile["A"], profile["B"], profile["h"], profile["sigma"]
    near = r <= 1.0
    far = r >= far_fraction * r[-1]
    out = {
        "sup_r^-k_rho_near": float(np.max(np.abs(r[near] ** -consts.k_exp * rho[near]))) if near.any() else 0.0,
        "sup_r^-1_A_near": float(np.max(np.abs(A[near] / r[near]))) if near.any() else 0.0,
        "sup_r^-2_h-1_near": float(np.max(np.abs((h[near] - 1) / r[near] ** 2))) if near.any() else 0.0,
        "r_rho_increasing": float(np.min(np.diff(r * rho))),
        "r_A_increasing": float(np.min(np.diff(r * A))),
        "rho_cap": float(np.min(consts.rho_cap**2 - rho**2)),
        "gauge_A": float(np.min(0.25 * p.g**2 * rho**2 - A**2)),
        "gauge_B": float(np.min(p.g_prime**2 * sig**2 - B**2)),
        "far_field": float(np.min(0.25 * p.g**2 * rho[far] ** 2
                                  - 0.5 * (0.25 * p.g**2 * consts.rho0**2 + p.A0**2))) if far.any() else 0.0,
    }
    return out
