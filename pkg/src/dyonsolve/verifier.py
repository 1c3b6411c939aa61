"""Structural and asymptotic checks on a solved profile.

Five groups of clause checks (regularity, bounds, monotonicity, weighted
monotonicity, origin boundedness) and six tail-rate fits (f, rho, A, h, B - A,
sigma).  Failures are data, not exceptions.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InsufficientSignal
from .params import DerivedConstants
from .profile import FieldProfile
from .radial import LEADING_EXPONENT

CLAUSE_GROUPS = ("regularity", "bounds", "monotonicity", "weighted_monotonicity", "origin_boundedness")
DECAY_QUANTITIES = ("f", "rho", "A", "h", "B-A", "sigma")
DECAY_TOL = 0.10
ORIGIN_TOL = 0.15
NOISE = 1e3 * np.finfo(float).eps
ABS_FLOOR = 1e-11
REL_FLOOR = {"B-A": 1e-6}


@dataclass
class ClauseResult:
    clause_id: str
    group: str
    passed: bool
    worst_margin: float
    worst_radius: float


@dataclass
class DecayFit:
    quantity_id: str
    fitted_rate: float
    predicted_rate: float
    relative_gap: float
    window: tuple
    passed: bool
    note: str = ""
    alternate_rate: float | None = None
    alternate_gap: float | None = None


@dataclass
class OriginOrder:
    field_id: str
    slope: float
    expected: float
    relative_gap: float
    passed: bool


@dataclass
class VerificationReport:
    clauses: list
    decay_fits: list
    origin_orders: list = field(default_factory=list)

    def __post_init__(self):
        groups = {c.group for c in self.clauses}
        if groups != set(CLAUSE_GROUPS):
            raise ValueError(f"clause groups incomplete: {sorted(groups)}")
        ids = [d.quantity_id for d in self.decay_fits]
        if sorted(ids) != sorted(DECAY_QUANTITIES):
            raise ValueError(f"decay quantities must be exactly {DECAY_QUANTITIES}, got {ids}")

    @property
    def overall(self):
        # origin orders are reported alongside but are not part of the verdict
        return all(c.passed for c in self.clauses) and all(d.passed for d in self.decay_fits)

    def to_dict(self):
        return {
            "overall": self.overall,
            "clauses": [asdict(c) for c in self.clauses],
            "decay_fits": [asdict(d) for d in self.decay_fits],
            "origin_orders": [asdict(o) for o in self.origin_orders],
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, default=_json_default)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(type(x))


def _margin(cid, group, m, r, tol):
    """Clause from a sample-wise margin array (>= 0 means satisfied)."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return ClauseResult(cid, group, True, math.inf, math.nan)
    i = int(np.argmin(m))
    return ClauseResult(cid, group, bool(m[i] >= -tol), float(m[i]), float(r[i]))


def _increasing(cid, group, q, r, tol, mask=None):
    d = np.diff(q)
    rr = r[1:]
    if mask is not None:
        keep = mask[1:] & mask[:-1]
        d, rr = d[keep], rr[keep]
    return _margin(cid, group, d, rr, tol)


def check_theorem1(profile: FieldProfile, consts: DerivedConstants, tol=1e-6):
    p = consts.params
    r = profile.grid
    f, rho, A, B, h, sig = (profile[k] for k in ("f", "rho", "A", "B", "h", "sigma"))
    out = []
    g = "regularity"
    r0 = r[0]
    for name in ("f", "h"):
        d0 = abs(profile.deriv(name)[0])
        out.append(ClauseResult(f"{name}_prime_origin", g, bool(d0 <= 10 * r0 + tol), float(10 * r0 - d0), float(r0)))
    # derivative continuity proxy: stored slope vs central difference of values
    for name in ("f", "A", "B", "h"):
        v, dv = profile[name], profile.deriv(name)
        fd = (v[2:] - v[:-2]) / (r[2:] - r[:-2])
        scale = np.max(np.abs(dv)) + 1e-300
        mism = np.abs(fd - dv[1:-1]) / scale
        out.append(_margin(f"{name}_C1", g, 1e-2 - mism, r[1:-1], 0.0))

    g = "bounds"
    out += [
        _margin("f>=0", g, f, r, tol),
        _margin("f<=1", g, 1 - f, r, tol),
        _margin("h>=0", g, h, r, tol),
        _margin("h<=1", g, 1 - h, r, tol),
        _margin("rho^2<=cap^2", g, consts.rho_cap**2 - rho**2, r, tol),
        _margin("A<=A0", g, p.A0 - A, r, tol),
        _margin("B<=A0", g, p.A0 - B, r, tol),
        _margin("B>=A", g, B - A, r, tol),
    ]

    g = "monotonicity"
    out += [
        _increasing("r*rho increasing", g, r * rho, r, tol),
        _increasing("r*A increasing", g, r * A, r, tol),
        _increasing("r*B increasing", g, r * B, r, tol),
        _increasing("r*sigma increasing", g, r * sig, r, tol),
        _increasing("f decreasing", g, -f, r, tol),
        _increasing("h decreasing", g, -h, r, tol),
        _increasing("A/r decreasing", g, -A / r, r, tol),
        _increasing("B/r decreasing", g, -B / r, r, tol),
    ]

    g = "weighted_monotonicity"
    out += [
        _increasing("r^-k*rho decreasing (rho<=rho0)", g, -(r ** -consts.k_exp) * rho, r, tol,
                    mask=rho <= consts.rho0),
        _increasing("r^-2*sigma decreasing (sigma<=sigma0)", g, -sig / r**2, r, tol,
                    mask=sig <= consts.sigma0),
    ]

    g = "origin_boundedness"
    near = r <= 10 * r0
    for name, q in (("A", A), ("B", B)):
        ratio = np.abs(q[near] / r[near])
        ref = ratio[-1] if ratio.size else 0.0
        # bounded near 0: the quotient stays within a factor 2 of its value at 10 r_start
        out.append(_margin(f"{name}/r bounded", g, 2 * ref - ratio + tol, r[near], tol)
                   if np.all(np.isfinite(ratio)) else ClauseResult(f"{name}/r bounded", g, False, -math.inf, float(r0)))
    return out


def decay_quantities(profile: FieldProfile, consts: DerivedConstants):
    """Tail quantities whose log is linear in r, with the 1/r prefactor removed."""
    r = profile.grid
    return {
        "f": profile["f"],
        "h": profile["h"],
        "B-A": r * (profile["B"] - profile["A"]),
        "rho": r * (profile["rho"] - consts.rho0),
        "sigma": r * (profile["sigma"] - consts.sigma0),
        "A": r * (profile["A"] - consts.params.A0),
    }


def predicted_rates(consts: DerivedConstants):
    return {
        "f": consts.kappa_decay,
        "h": consts.zeta,
        "B-A": consts.nu0,
        "rho": math.sqrt(2.0) * consts.mu0,
        "sigma": math.sqrt(2.0) * consts.xi,
    }


def alternate_rho_rate(consts: DerivedConstants):
    """Rate of rho - rho0 read off the linearized equation.

    The Higgs mass term gives sqrt(2) mu; the f^2 and (A - B)^2 sources decay
    at 2 kappa and 2 nu0.  The slowest of the three wins.
    """
    return min(math.sqrt(2.0) * consts.params.mu, 2 * consts.kappa_decay, 2 * consts.nu0)


def fit_rate(r, q, window):
    """Decay rate of |q| over [window] by least squares on log|q|."""
    lo, hi = window
    m = (r >= lo) & (r <= hi)
    rr, qq = r[m], np.abs(q[m])
    if rr.size < 3 or np.all(qq < NOISE):
        raise InsufficientSignal(f"no signal above {NOISE:.1e} on [{lo:.4g}, {hi:.4g}]")
    keep = qq >= NOISE
    if keep.sum() < 3:
        raise InsufficientSignal(f"fewer than 3 samples above {NOISE:.1e}")
    slope = np.polyfit(rr[keep], np.log(qq[keep]), 1)[0]
    return -float(slope)


def resolvable_radius(r, q, floor):
    """First radius past the peak of |q| where it sinks below ``floor``."""
    a = np.abs(q)
    if a.size == 0 or not np.any(np.isfinite(a)):
        return float(r[-1])
    i0 = int(np.nanargmax(a))
    below = np.nonzero(a[i0:] < floor)[0]
    return float(r[i0 + below[0]]) if below.size else float(r[-1])


def noise_floor(name, q):
    """Level below which a tail quantity is dominated by rounding or solver noise.

    Scalars are stored as absolute values near rho0, sigma0, so their
    deviations round away near 1e-16; B - A is a difference of two separately
    solved fields and is only as consistent as the fixed-point tolerance.
    """
    floor = ABS_FLOOR
    if name in REL_FLOOR:
        floor = max(floor, REL_FLOOR[name] * float(np.max(np.abs(q))))
    return floor


def fit_decay(profile: FieldProfile, consts: DerivedConstants, window=(0.5, 0.9), tol=DECAY_TOL,
              adaptive=True):
    """Fit each tail rate against its prediction.

    ``window`` is a pair of fractions of the resolvable radius of each
    quantity (see ``noise_floor``).  Tails that sink into rounding or
    fixed-point noise before r_max are fitted where they still carry signal.
    ``adaptive=False`` uses fractions of r_max.
    """
    r = profile.grid
    qs = decay_quantities(profile, consts)
    pred = predicted_rates(consts)
    fits = []
    for name in ("f", "rho", "h", "B-A", "sigma"):
        if not np.any(qs[name]):
            # e.g. B = A = 0 exactly: the O() bound holds trivially
            W = (window[0] * r[-1], window[1] * r[-1])
            fits.append(DecayFit(name, math.nan, pred[name], 0.0, W, True, "identically zero"))
            continue
        r_eff = resolvable_radius(r, qs[name], noise_floor(name, qs[name])) if adaptive else float(r[-1])
        W = (window[0] * r_eff, window[1] * r_eff)
        try:
            rate = fit_rate(r, qs[name], W)
        except InsufficientSignal as exc:
            fits.append(DecayFit(name, math.nan, pred[name], math.nan, W, False, f"insufficient signal: {exc}"))
            continue
        gap = (rate - pred[name]) / pred[name]
        fit = DecayFit(name, rate, pred[name], gap, W, bool(abs(gap) <= tol))
        if name == "rho":
            alt = alternate_rho_rate(consts)
            fit.alternate_rate = alt
            fit.alternate_gap = (rate - alt) / alt
            fit.note = "predicted = sqrt(2)*mu0 as printed; alternate = min(sqrt(2) mu, 2 kappa, 2 nu0)"
        fits.append(fit)
    W = (window[0] * r[-1], window[1] * r[-1])
    # A: r |A - A0| bounded over the window
    m = (r >= W[0]) & (r <= W[1])
    qa = np.abs(qs["A"][m])
    if qa.size and np.max(qa) > 0:
        spread = float((np.max(qa) - np.min(qa)) / np.max(qa))
        fits.append(DecayFit("A", math.nan, 0.0, spread, W, bool(spread <= tol and np.all(np.isfinite(qa))),
                             "boundedness of r|A - A0|: relative spread over window"))
    else:
        fits.append(DecayFit("A", math.nan, 0.0, 0.0, W, True, "A identically A0 on window"))
    return fits


def check_origin_orders(profile: FieldProfile, consts: DerivedConstants, span=10.0, tol=ORIGIN_TOL):
    """Log-log slope of |field - limit| near r_start against the leading exponent."""
    r = profile.grid
    m = r <= span * r[0]
    out = []
    for name in ("f", "h", "A", "B", "sigma", "rho"):
        v = profile[name][m]
        q = np.abs(v - 1.0) if name in ("f", "h") else np.abs(v)
        exp = LEADING_EXPONENT[name]
        if np.all(q == 0):
            # identically zero field (e.g. vanishing gauge sector): nothing to fit
            out.append(OriginOrder(name, math.nan, exp, 0.0, True))
            continue
        slope = float(np.polyfit(np.log(r[m]), np.log(q), 1)[0])
        gap = (slope - exp) / exp
        out.append(OriginOrder(name, slope, exp, gap, bool(abs(gap) <= tol)))
    return out


def verify(profile: FieldProfile, consts: DerivedConstants, tol=1e-6, window=(0.5, 0.9), adaptive=True):
    return VerificationReport(
        check_theorem1(profile, consts, tol),
        fit_decay(profile, consts, window, adaptive=adaptive),
        check_origin_orders(profile, consts),
    )
