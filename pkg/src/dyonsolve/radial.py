"""The six coupled radial equations and their regular-origin series.

Second-order explicit forms (bare fields):

    f''   = (f^2 - 1) f / r^2 + (g^2 rho^2 / 4 - A^2) f
    rho'' = -2 rho'/r + f^2 rho / (2 r^2) - (A - B)^2 rho / 4 + (lambda/2)(rho^2 - rho0^2) rho
    A''   = -2 A'/r + 2 f^2 A / r^2 + (g^2 rho^2 / 4)(A - B)
    B''   = -2 B'/r + 2 h^2 B / r^2 + (g'^2 rho^2 / 4)(B - A)
    h''   = (h^2 - 1) h / r^2 + (g'^2 sigma^2 - B^2) h
    sigma'' = -2 sigma'/r + 2 h^2 sigma / r^2 + kappa (sigma^2 - sigma0^2) sigma
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import InterpolationOutOfRange, SingularRadius
from .params import K_EXP, DerivedConstants
from .profile import FIELDS, INDEX, FieldProfile

R_MIN_MACHINE = 1e-12

SHOOT_PARAM_NAME = {"f": "C", "B": "b", "sigma": "D", "h": "E", "rho": "F", "A": "a"}
LEADING_EXPONENT = {"f": 2.0, "h": 2.0, "B": 1.0, "A": 1.0, "sigma": 1.0, "rho": K_EXP}


@dataclass(frozen=True)
class FieldState:
    """Field values and first derivatives at one radius, in FIELDS order."""

    r: float
    values: tuple
    derivs: tuple

    def __post_init__(self):
        if len(self.values) != 6 or len(self.derivs) != 6:
            raise ValueError("FieldState needs six values and six derivatives")
        if not all(math.isfinite(v) for v in (self.r, *self.values, *self.derivs)):
            raise ValueError("FieldState entries must be finite")

    @classmethod
    def from_mapping(cls, r, values, derivs=None):
        derivs = derivs or {}
        return cls(
            r,
            tuple(float(values.get(n, 0.0)) for n in FIELDS),
            tuple(float(derivs.get(n, 0.0)) for n in FIELDS),
        )


def const_vector(consts: DerivedConstants) -> np.ndarray:
    p = consts.params
    return np.array(
        [
            p.g, p.g_prime, p.lam, p.mu, p.kappa_param, p.m, p.A0, p.B0,
            consts.rho0, consts.sigma0, consts.rho_cap, consts.k_exp,
        ],
        dtype=float,
    )


def target_value(field_id, consts):
    p = consts.params
    return {"f": 0.0, "h": 0.0, "rho": consts.rho0, "sigma": consts.sigma0, "A": p.A0, "B": p.B0}[field_id]


def rhs_full(state: FieldState, consts: DerivedConstants) -> np.ndarray:
    """Second derivatives of (f, rho, A, B, h, sigma) at ``state``."""
    r = state.r
    if r <= R_MIN_MACHINE:
        raise SingularRadius(f"r = {r!r} is at the singular origin")
    return rhs_full_array(r, np.asarray(state.values, float), np.asarray(state.derivs, float), consts)


def rhs_full_array(r, values, derivs, consts):
    """Vectorised rhs_full: ``values``/``derivs`` shaped (6, ...) broadcast with r."""
    p = consts.params
    f, rho, A, B, h, sig = values
    _, drho, dA, dB, _, dsig = derivs
    r2 = r * r
    return np.array(
        [
            (f * f - 1.0) * f / r2 + (0.25 * p.g**2 * rho * rho - A * A) * f,
            -2.0 * drho / r + f * f * rho / (2.0 * r2) - 0.25 * (A - B) ** 2 * rho
            + 0.5 * p.lam * (rho * rho - consts.rho0**2) * rho,
            -2.0 * dA / r + 2.0 * f * f * A / r2 + 0.25 * p.g**2 * rho * rho * (A - B),
            -2.0 * dB / r + 2.0 * h * h * B / r2 + 0.25 * p.g_prime**2 * rho * rho * (B - A),
            (h * h - 1.0) * h / r2 + (p.g_prime**2 * sig * sig - B * B) * h,
            -2.0 * dsig / r + 2.0 * h * h * sig / r2
            + p.kappa_param * (sig * sig - consts.sigma0**2) * sig,
        ]
    )


def rhs_single(field_id, r, value, deriv, frozen: FieldProfile, consts: DerivedConstants) -> float:
    """Second derivative of one field with every other field read from ``frozen``.

    This is the single-equation problem each shooting solve integrates; it
    evaluates the same compiled kernel the integrator uses.
    """
    if r <= R_MIN_MACHINE:
        raise SingularRadius(f"r = {r!r} is at the singular origin")
    if r > frozen.r_max * (1 + 1e-12):
        raise InterpolationOutOfRange(f"r = {r!r} beyond frozen grid end {frozen.r_max!r}")
    fz = np.empty(6)
    K.frozen_at(float(r), frozen.grid, frozen.values, frozen.derivs, fz)
    c = const_vector(consts)
    kind = INDEX[field_id]
    y = value - target_value(field_id, consts)
    return float(K.rhs_single(kind, float(r), y, float(deriv), fz, c))


@dataclass(frozen=True)
class OriginSeries:
    field_id: str
    shoot_param: float
    r_start: float

    @property
    def param_name(self):
        return SHOOT_PARAM_NAME[self.field_id]

    @property
    def exponent(self):
        return LEADING_EXPONENT[self.field_id]


_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)
_U = 0.5 * (_GL_X + 1.0)
_UW = 0.5 * _GL_W


def _quad(r, integrand):
    """Integral over (0, r) via s = r u^2, which tames the s^(2k - 1) endpoint."""
    s = r * _U * _U
    return np.sum(_UW * 2.0 * r * _U * integrand(s))


def origin_series_eval(series: OriginSeries, r, frozen: FieldProfile, consts: DerivedConstants):
    """Value and derivative of the field at small ``r`` from its integral form.

    Leading term plus one Picard correction: the integral kernel is applied
    once with the leading behaviour substituted for the unknown field.
    """
    if not 0.0 < r:
        raise SingularRadius(f"series needs r > 0, got {r!r}")
    p = consts.params
    fid = series.field_id
    c = series.shoot_param

    def fz(s):
        return frozen.evaluate(s)

    if fid in ("f", "h"):
        if fid == "f":
            def source(s):
                v = fz(s)
                lead = c * s * s
                return (0.25 * p.g**2 * v[1] ** 2 - v[2] ** 2) * (1 + lead) + 3 * c * c * s * s + c**3 * s**4
        else:
            def source(s):
                v = fz(s)
                lead = c * s * s
                return (p.g_prime**2 * v[5] ** 2 - v[3] ** 2) * (1 + lead) + 3 * c * c * s * s + c**3 * s**4
        # psi'' - 2 psi / r^2 = S with Green kernel (r^2/s - s^2/r) / 3
        val = c * r * r + _quad(r, lambda s: (r * r / s - s * s / r) * source(s)) / 3.0
        der = 2 * c * r + _quad(r, lambda s: (2 * r / s + s * s / (r * r)) * source(s)) / 3.0
        return 1.0 + val, der

    if fid in ("A", "B"):
        if fid == "B":
            def bracket(s):
                v = fz(s)
                lead = c * s
                return 2 * (v[4] ** 2 - 1) * lead + 0.25 * p.g_prime**2 * v[1] ** 2 * s * s * (lead - v[2])
        else:
            def bracket(s):
                v = fz(s)
                lead = c * s
                return 2 * (v[0] ** 2 - 1) * lead - 0.25 * p.g**2 * v[1] ** 2 * s * s * (v[3] - lead)
        # r^2 X'' + 2 r X' - 2 X = bracket, kernel (r - s^3/r^2) / (3 s^2)
        val = c * r + _quad(r, lambda s: (r - s**3 / r**2) * bracket(s) / (s * s)) / 3.0
        der = c + _quad(r, lambda s: (1 + 2 * s**3 / r**3) * bracket(s) / (s * s)) / 3.0
        return val, der

    if fid == "sigma":
        def source(s):
            v = fz(s)
            lead = c * s * s
            return lead * (p.kappa_param * (lead * lead / (s * s) - consts.sigma0**2) + 2 * (v[4] ** 2 - 1) / (s * s))
        H = c * r * r + _quad(r, lambda s: (r * r / s - s * s / r) * source(s)) / 3.0
        dH = 2 * c * r + _quad(r, lambda s: (2 * r / s + s * s / (r * r)) * source(s)) / 3.0
        return H / r, dH / r - H / (r * r)

    if fid == "rho":
        k = consts.k_exp
        root3 = math.sqrt(3.0)

        def source(s):
            v = fz(s)
            lead = c * s ** (k + 1)
            T = (
                -0.25 * (v[2] - v[3]) ** 2
                + 0.5 * p.lam * (lead * lead / (s * s) - consts.rho0**2)
                + (v[0] ** 2 - 1) / (2 * s * s)
            )
            return lead * T
        Q = c * r ** (k + 1) + _quad(r, lambda s: (s**-k * r ** (k + 1) - r**-k * s ** (k + 1)) * source(s)) / root3
        dQ = (k + 1) * c * r**k + _quad(
            r, lambda s: ((k + 1) * s**-k * r**k + k * r ** (-k - 1) * s ** (k + 1)) * source(s)
        ) / root3
        return Q / r, dQ / r - Q / (r * r)

    raise KeyError(fid)
