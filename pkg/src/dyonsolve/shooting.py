"""One-parameter shooting with set dichotomy and bisection.

Each field equation is integrated outward from its regular origin series with
every other field frozen.  A trajectory is classified by which of two
failure events fires first (SET1 / SET2); the connecting orbit lives on the
boundary between the two open sets and is located by bisection.

Event pairs (the first to fire wins):

    f, h    SET1: f' > 0            SET2: f < 0
    B       SET1: (rB)' < 0         SET2: B > B0
    A       SET1: (rA)' < 0         SET2: A > A0
    rho     SET1: (r rho)' < 0      SET2: rho > sqrt(rho0^2 + A0^2 / (2 lambda))
    sigma   SET1: (r sigma)' < 0    SET2: sigma > sigma0

The two SET2 thresholds for the scalars certify blow-up: above them the
right-hand side is positive while the slope is positive.  The gauge events do
not reference the frozen partner field: with A and B sharing the same origin
slope, a comparison event such as B < A fires at the first step for every
parameter.  Both gauge equations are linear with one growing mode, so the
target-crossing events split the parameter line the same way, and B >= A is
checked on the output instead.

Precision beyond the first bisection is recovered by restaging: once the two
final bracket trajectories separate, the agreed part is kept and shooting
resumes from the last agreed node with the value held fixed and the slope as
the new parameter.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import BracketNotFound, IntegratorStall, InvalidBracket
from .params import DerivedConstants
from .profile import FIELDS, INDEX, FieldProfile
from .radial import OriginSeries, const_vector, origin_series_eval, target_value

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
_BLOW = 1e8
# extension past r_max, in units of 1 / (slowest decay rate)
HORIZON = 40.0

# sign of the shooting parameter on the physically relevant half line
PARAM_SIGN = {"f": -1.0, "h": -1.0, "B": 1.0, "A": 1.0, "rho": 1.0, "sigma": 1.0}


class Classification(str, enum.Enum):
    SET1 = "SET1"
    SET2 = "SET2"
    SET3_CANDIDATE = "SET3_CANDIDATE"


_STATUS = {K.SET1: Classification.SET1, K.SET2: Classification.SET2, K.SET3: Classification.SET3_CANDIDATE}


@dataclass
class ShootOutcome:
    classification: Classification
    event_radius: float
    r: np.ndarray
    value: np.ndarray
    derivative: np.ndarray
    start_index: int = 0
    margins: dict = field(default_factory=dict)
    # event seen past r_max on the extended horizon, if any
    tendency: Classification | None = None

    @property
    def effective(self):
        """Classification used for bisection: SET3 candidates resolved by their tendency."""
        if self.classification is Classification.SET3_CANDIDATE and self.tendency is not None:
            return self.tendency
        return self.classification

    @property
    def last_index(self):
        return self.start_index + self.r.size - 1


@dataclass
class BisectResult:
    param_lo: float
    param_hi: float
    param_star: float
    iterations: int
    outcome_star: ShootOutcome
    widths: list = field(default_factory=list)
    outcome_set1: ShootOutcome | None = None
    outcome_set2: ShootOutcome | None = None


def _end_index(grid, r_max):
    if r_max is None:
        return grid.size - 1
    idx = int(np.searchsorted(grid, r_max * (1 + 1e-12), side="right")) - 1
    if idx < 1:
        raise ValueError(f"r_max={r_max!r} leaves no integration interval")
    return idx


class _Integrator:
    """Binds one field, one frozen background and the tolerances."""

    def __init__(self, field_id, frozen: FieldProfile, consts: DerivedConstants, r_max=None,
                 rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, horizon=HORIZON):
        self.field_id = field_id
        self.kind = INDEX[field_id]
        self.frozen = frozen
        self.consts = consts
        self.c = const_vector(consts)
        self.target = target_value(field_id, consts)
        self.iend = _end_index(frozen.grid, r_max)
        self.r_max = float(frozen.grid[self.iend])
        self.rtol = rtol
        self.atol = atol
        # frozen fields continue past r_max on their asymptotic forms so that a
        # trajectory surviving to r_max still reveals which event it heads for
        grid = frozen.grid[: self.iend + 1]
        dr = grid[-1] - grid[-2]
        n_ext = int(math.ceil(horizon / consts.min_rate / dr)) if horizon > 0 else 0
        ext = grid[-1] + dr * np.arange(1, n_ext + 1)
        levels = np.array([target_value(k, consts) for k in FIELDS])
        ext_vals = np.repeat(levels[:, None], n_ext, 1)
        ext_ders = np.zeros((6, n_ext))
        # gauge fields keep their Coulomb tail level - Q/r past r_max
        for name in ("A", "B"):
            i = INDEX[name]
            q = grid[-1] * (levels[i] - frozen.values[i, self.iend])
            ext_vals[i] = levels[i] - q / ext
            ext_ders[i] = q / ext**2
        self.grid = np.concatenate([grid, ext])
        self.vals = np.concatenate([frozen.values[:, : self.iend + 1], ext_vals], 1)
        self.ders = np.concatenate([frozen.derivs[:, : self.iend + 1], ext_ders], 1)
        self.vals = np.ascontiguousarray(self.vals)
        self.ders = np.ascontiguousarray(self.ders)
        n = self.grid.size
        self._y = np.empty(n)
        self._yp = np.empty(n)

    def run(self, i0, value, slope):
        y0 = value - self.target
        status, r_ev, last = K.integrate(
            self.kind, i0, self.grid.size - 1, float(y0), float(slope), self.grid, self.vals,
            self.ders, self.c, self.rtol, self.atol, self._y, self._yp, _BLOW,
        )
        if status == K.STALL:
            raise IntegratorStall(f"step size underflow at r={r_ev:.6g}", field=self.field_id)
        cls = _STATUS[status]
        tendency = None
        if status == K.SET3 or r_ev > self.r_max * (1 + 1e-12):
            tendency = None if status == K.SET3 else cls
            cls = Classification.SET3_CANDIDATE
        last = min(last, self.iend)
        sl = slice(i0, last + 1)
        out = ShootOutcome(
            classification=cls,
            event_radius=float(r_ev),
            r=self.grid[sl].copy(),
            value=self._y[sl] + self.target,
            derivative=self._yp[sl].copy(),
            start_index=i0,
            tendency=tendency,
        )
        if cls is Classification.SET3_CANDIDATE:
            out.margins = set3_margins(self.field_id, out, self.frozen, self.consts)
        return out

    def from_origin(self, param):
        series = OriginSeries(self.field_id, float(param), float(self.grid[0]))
        value, slope = origin_series_eval(series, series.r_start, self.frozen, self.consts)
        return self.run(0, value, slope)


def set3_margins(field_id, out: ShootOutcome, frozen, consts):
    """Worst margins of the connecting-orbit inequalities along a trajectory.

    Both a value band and a derivative band are recorded; negative means the
    inequality is violated somewhere.
    """
    y, yp, r = out.value, out.derivative, out.r
    if field_id in ("f", "h"):
        return {"value": float(min(np.min(y), np.min(1.0 - y))), "derivative": float(np.min(-yp))}
    fz = frozen.values[:, out.start_index: out.start_index + r.size]
    if field_id == "B":
        return {"value": float(min(np.min(y - fz[INDEX["A"]]), np.min(consts.params.B0 - y))),
                "derivative": float(np.min(y + r * yp))}
    if field_id == "A":
        return {"value": float(np.min(fz[INDEX["B"]] - y)), "derivative": float(np.min(y + r * yp))}
    cap = consts.rho_cap if field_id == "rho" else consts.sigma0
    return {"value": float(np.min(cap - y)), "derivative": float(np.min(y + r * yp))}


def shoot(field_id, shoot_param, frozen: FieldProfile, consts: DerivedConstants, r_max=None,
          rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> ShootOutcome:
    """Integrate one field from its origin series and classify the trajectory."""
    return _Integrator(field_id, frozen, consts, r_max, rtol, atol).from_origin(shoot_param)


def _bisect_core(run, p_a, out_a, p_b, out_b, tol, max_iter=400):
    cls_a, cls_b = out_a.effective, out_b.effective
    if cls_a is Classification.SET3_CANDIDATE:
        return BisectResult(p_a, p_a, p_a, 0, out_a)
    if cls_b is Classification.SET3_CANDIDATE:
        return BisectResult(p_b, p_b, p_b, 0, out_b)
    if cls_a == cls_b:
        raise InvalidBracket(f"both endpoints classify as {cls_a.value}")
    if cls_a is Classification.SET1:
        p1, o1, p2, o2 = p_a, out_a, p_b, out_b
    else:
        p1, o1, p2, o2 = p_b, out_b, p_a, out_a
    widths = [abs(p2 - p1)]
    it = 0
    while it < max_iter:
        mid = 0.5 * (p1 + p2)
        if abs(p2 - p1) <= tol or mid == p1 or mid == p2:
            break
        o = run(mid)
        it += 1
        if o.effective is Classification.SET3_CANDIDATE:
            widths.append(abs(p2 - p1) / 2)
            return BisectResult(min(p1, p2), max(p1, p2), mid, it, o, widths, o1, o2)
        if o.effective is Classification.SET1:
            p1, o1 = mid, o
        else:
            p2, o2 = mid, o
        widths.append(abs(p2 - p1))
    star = o1 if o1.event_radius >= o2.event_radius else o2
    p_star = p1 if star is o1 else p2
    return BisectResult(min(p1, p2), max(p1, p2), p_star, it, star, widths, o1, o2)


def bisect(field_id, bracket_lo, bracket_hi, frozen: FieldProfile, consts: DerivedConstants,
           r_max=None, tol=0.0, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> BisectResult:
    """Bisect the origin shooting parameter between two opposite classifications.

    ``tol = 0`` bisects to floating-point exhaustion.  A SET3 candidate hit at
    an endpoint is returned directly as the accepted parameter.
    """
    integ = _Integrator(field_id, frozen, consts, r_max, rtol, atol)
    out_lo = integ.from_origin(bracket_lo)
    out_hi = integ.from_origin(bracket_hi)
    return _bisect_core(integ.from_origin, bracket_lo, out_lo, bracket_hi, out_hi, tol)


def auto_bracket(field_id, frozen: FieldProfile, consts: DerivedConstants, r_max=None,
                 max_doublings=60, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, start=None):
    """Geometric search from |param| = 1 for two opposite classifications.

    ``start`` replaces the initial magnitude (warm start from a previous
    solve).  Returns the pair sorted ascending.  If a SET3 candidate turns up
    (e.g. the exact zero solution) the pair collapses onto it.
    """
    integ = _Integrator(field_id, frozen, consts, r_max, rtol, atol)
    sign = PARAM_SIGN[field_id]
    mag = 1.0 if not start else abs(float(start))
    p = sign * mag
    o = integ.from_origin(p)
    if o.effective is Classification.SET3_CANDIDATE:
        return p, p
    want = Classification.SET2 if o.effective is Classification.SET1 else Classification.SET1
    # warm starts sit next to the root, so step finely first
    factor = 2.0 if want is Classification.SET2 else 0.5
    expo = 1.0 / 64 if start else 1.0
    prev = p
    for _ in range(max_doublings + (6 if start else 0)):
        q = prev * factor ** expo
        expo = min(1.0, 2 * expo)
        oq = integ.from_origin(q)
        if oq.effective is Classification.SET3_CANDIDATE:
            return q, q
        if oq.effective is want:
            return tuple(sorted((prev, q)))
        prev = q
    # nothing on the half line: the exact zero solution or the other side
    o0 = integ.from_origin(0.0)
    if o0.effective is Classification.SET3_CANDIDATE:
        return 0.0, 0.0
    if o0.effective is want:
        return tuple(sorted((0.0, prev)))
    raise BracketNotFound(
        f"no {want.value} parameter found for field {field_id} after {max_doublings} steps",
        field=field_id,
    )


@dataclass
class FieldSolve:
    value: np.ndarray
    derivative: np.ndarray
    param: float
    stages: int
    bisections: list


def _agreement_index(o1: ShootOutcome, o2: ShootOutcome, star: ShootOutcome, field_id, frozen,
                     consts, rel, floor):
    """Last node up to which the two bracket trajectories agree."""
    i0 = star.start_index
    last = min(o1.last_index, o2.last_index, star.last_index)
    if last <= i0:
        return i0
    n = last - i0 + 1
    y1, y2 = o1.value[:n], o2.value[:n]
    tgt = target_value(field_id, consts)
    scale = np.abs(star.value[:n] - tgt)
    fz = frozen.values[:, i0: i0 + n]
    if field_id == "B":
        scale = np.minimum(scale, np.abs(star.value[:n] - fz[INDEX["A"]]))
    elif field_id == "A":
        scale = np.minimum(scale, np.abs(fz[INDEX["B"]] - star.value[:n]))
    bad = np.nonzero(np.abs(y1 - y2) > rel * scale + floor)[0]
    if bad.size == 0:
        return last
    return i0 + max(int(bad[0]) - 1, 0)


def solve_field(field_id, frozen: FieldProfile, consts: DerivedConstants, r_max=None,
                rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, agree_rel=1e-8, agree_floor=1e-13,
                max_stages=200, guess=None) -> FieldSolve:
    """Connecting orbit of one field on the whole grid of ``frozen``."""
    integ = _Integrator(field_id, frozen, consts, r_max, rtol, atol)
    n = frozen.grid.size
    val = np.full(n, np.nan)
    der = np.full(n, np.nan)

    lo, hi = auto_bracket(field_id, frozen, consts, r_max, rtol=rtol, atol=atol, start=guess)
    res = _bisect_core(integ.from_origin, lo, integ.from_origin(lo), hi, integ.from_origin(hi), 0.0)
    param = res.param_star
    bisections = [res]
    stages = 1
    while True:
        star = res.outcome_star
        if star.effective is Classification.SET3_CANDIDATE:
            keep = star.last_index
        else:
            keep = _agreement_index(res.outcome_set1, res.outcome_set2, star, field_id, frozen,
                                    consts, agree_rel, agree_floor)
        i0 = star.start_index
        val[i0: keep + 1] = star.value[: keep - i0 + 1]
        der[i0: keep + 1] = star.derivative[: keep - i0 + 1]
        if keep >= integ.iend:
            break
        if keep <= i0 or stages >= max_stages:
            raise IntegratorStall(
                f"restaging made no progress for field {field_id} at r={frozen.grid[keep]:.6g}",
                field=field_id,
            )
        # resume from node `keep`, value fixed, slope is the new parameter
        v0 = val[keep]
        s0 = der[keep]

        def run(s, _k=keep, _v=v0):
            return integ.run(_k, _v, s)

        o_mid = run(s0)
        if o_mid.effective is Classification.SET3_CANDIDATE:
            res = BisectResult(s0, s0, s0, 0, o_mid)
        else:
            d = max(abs(s0) * 1e-12, 1e-300)
            for _ in range(2000):
                oa, ob = run(s0 - d), run(s0 + d)
                if oa.effective != ob.effective or Classification.SET3_CANDIDATE in (
                    oa.effective, ob.effective
                ):
                    break
                d *= 2.0
            else:
                raise BracketNotFound(f"restage bracket not found for {field_id}", field=field_id)
            res = _bisect_core(run, s0 - d, oa, s0 + d, ob, 0.0)
        bisections.append(res)
        stages += 1
    iend = integ.iend
    if iend < n - 1:
        val[iend + 1:] = val[iend]
        der[iend + 1:] = 0.0
    return FieldSolve(val, der, param, stages, bisections)
