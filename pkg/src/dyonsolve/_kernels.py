"""Compiled inner loops: frozen-field interpolation, single-field right-hand
sides, dichotomy event functions and an adaptive Dormand-Prince 5(4) stepper.

Field kinds follow FIELDS order: 0 f, 1 rho, 2 A, 3 B, 4 h, 5 sigma.  Each
field is integrated as its deviation ``y = field - target`` from the value at
infinity so the exponentially small tails keep relative precision.

Constant vector layout ``c``:
    0 g, 1 g', 2 lambda, 3 mu, 4 kappa_param, 5 m, 6 A0, 7 B0,
    8 rho0, 9 sigma0, 10 rho_cap, 11 k
"""
import math

import numpy as np
from numba import njit

from .params import K_EXP

SET3 = 0
SET1 = 1
SET2 = 2
STALL = 3

_K = K_EXP


@njit(cache=True)
def frozen_at(r, grid, vals, ders, out):
    n = grid.size
    r0 = grid[0]
    if r <= r0:
        s = r / r0
        out[0] = 1.0 + (vals[0, 0] - 1.0) * s * s
        out[1] = vals[1, 0] * s**_K
        out[2] = vals[2, 0] * s
        out[3] = vals[3, 0] * s
        out[4] = 1.0 + (vals[4, 0] - 1.0) * s * s
        out[5] = vals[5, 0] * s
        return
    if r >= grid[n - 1]:
        i = n - 2
    else:
        i = np.searchsorted(grid, r) - 1
    h = grid[i + 1] - grid[i]
    t = (r - grid[i]) / h
    t1 = 1.0 - t
    h00 = (1.0 + 2.0 * t) * t1 * t1
    h10 = t * t1 * t1 * h
    h01 = t * t * (3.0 - 2.0 * t)
    h11 = t * t * (t - 1.0) * h
    for j in range(6):
        out[j] = h00 * vals[j, i] + h10 * ders[j, i] + h01 * vals[j, i + 1] + h11 * ders[j, i + 1]


@njit(cache=True)
def frozen_many(rs, grid, vals, ders):
    out = np.empty((6, rs.size))
    tmp = np.empty(6)
    for m in range(rs.size):
        frozen_at(rs[m], grid, vals, ders, tmp)
        for j in range(6):
            out[j, m] = tmp[j]
    return out


@njit(cache=True)
def target(kind, c):
    if kind == 1:
        return c[8]
    if kind == 2:
        return c[6]
    if kind == 3:
        return c[7]
    if kind == 5:
        return c[9]
    return 0.0


@njit(cache=True)
def rhs_single(kind, r, y, yp, fz, c):
    """Second derivative of field ``kind`` (deviation form) with the other
    fields read from ``fz``."""
    f = fz[0]
    rho = fz[1]
    A = fz[2]
    B = fz[3]
    h = fz[4]
    sig = fz[5]
    r2 = r * r
    if kind == 0:
        return (y * y - 1.0) * y / r2 + (0.25 * c[0] * c[0] * rho * rho - A * A) * y
    if kind == 4:
        return (y * y - 1.0) * y / r2 + (c[1] * c[1] * sig * sig - B * B) * y
    if kind == 1:
        R = y + c[8]
        return (
            -2.0 * yp / r
            + f * f * R / (2.0 * r2)
            - 0.25 * (A - B) ** 2 * R
            + 0.5 * c[2] * y * (y + 2.0 * c[8]) * R
        )
    if kind == 2:
        Av = y + c[6]
        return -2.0 * yp / r + 2.0 * f * f * Av / r2 + 0.25 * c[0] * c[0] * rho * rho * (Av - B)
    if kind == 3:
        Bv = y + c[7]
        return -2.0 * yp / r + 2.0 * h * h * Bv / r2 + 0.25 * c[1] * c[1] * rho * rho * (Bv - A)
    S = y + c[9]
    return -2.0 * yp / r + 2.0 * h * h * S / r2 + c[4] * y * (y + 2.0 * c[9]) * S


@njit(cache=True)
def event_values(kind, r, y, yp, fz, c):
    """(g1, g2): the SET1 / SET2 event fires when its function turns positive."""
    if kind == 0 or kind == 4:
        return yp, -y
    if kind == 1:
        R = y + c[8]
        return -(R + r * yp), R - c[10]
    if kind == 5:
        S = y + c[9]
        return -(S + r * yp), y
    if kind == 3:
        return -(y + c[7] + r * yp), y
    return -(y + c[6] + r * yp), y


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9
_A21 = 1.0 / 5
_A31, _A32 = 3.0 / 40, 9.0 / 40
_A41, _A42, _A43 = 44.0 / 45, -56.0 / 15, 32.0 / 9
_A51, _A52, _A53, _A54 = 19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729
_A61, _A62, _A63, _A64, _A65 = 9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84
_E1 = 71.0 / 57600
_E3 = -71.0 / 16695
_E4 = 71.0 / 1920
_E5 = -17253.0 / 339200
_E6 = 22.0 / 525
_E7 = -1.0 / 40


@njit(cache=True)
def _deriv(kind, r, y, yp, grid, vals, ders, c, fz):
    frozen_at(r, grid, vals, ders, fz)
    return yp, rhs_single(kind, r, y, yp, fz, c)


@njit(cache=True)
def _hermite(t, h, p0, d0, p1, d1):
    t1 = 1.0 - t
    return (
        (1.0 + 2.0 * t) * t1 * t1 * p0
        + t * t1 * t1 * h * d0
        + t * t * (3.0 - 2.0 * t) * p1
        + t * t * (t - 1.0) * h * d1
    )


@njit(cache=True)
def _event_at(kind, which, r, ra, h, ya, ypa, ydda, yb, ypb, yddb, grid, vals, ders, c, fz):
    t = (r - ra) / h
    y = _hermite(t, h, ya, ypa, yb, ypb)
    yp = _hermite(t, h, ypa, ydda, ypb, yddb)
    frozen_at(r, grid, vals, ders, fz)
    g1, g2 = event_values(kind, r, y, yp, fz, c)
    return g1 if which == 1 else g2


@njit(cache=True)
def _localize(kind, which, ra, rb, ga, gb, ya, ypa, ydda, yb, ypb, yddb, grid, vals, ders, c, fz, rtol_r):
    # Illinois regula falsi on the cubic Hermite interpolant of the step
    h = rb - ra
    a, b = ra, rb
    fa, fb = ga, gb
    side = 0
    for _ in range(200):
        if b - a <= rtol_r * max(1.0, abs(b)):
            break
        if fb != fa:
            x = b - fb * (b - a) / (fb - fa)
        else:
            x = 0.5 * (a + b)
        if not (a < x < b):
            x = 0.5 * (a + b)
        fx = _event_at(kind, which, x, ra, h, ya, ypa, ydda, yb, ypb, yddb, grid, vals, ders, c, fz)
        if fx > 0.0:
            b, fb = x, fx
            if side == 1:
                fa *= 0.5
            side = 1
        else:
            a, fa = x, fx
            if side == -1:
                fb *= 0.5
            side = -1
    return b


@njit(cache=True)
def integrate(kind, i0, iend, y0, yp0, grid, vals, ders, c, rtol, atol, out_y, out_yp, blow):
    """Integrate field ``kind`` from grid[i0] toward grid[iend].

    Every grid node is hit exactly and the state is written into out_y /
    out_yp.  Returns (status, event_r, last_index) where status is SET1 or
    SET2 when an event fired, SET3 when grid[iend] was reached and STALL when
    the step size underflowed.  Non-finite states or |y| > ``blow`` count as
    SET2 (blow-up).
    """
    fz = np.empty(6)
    r = grid[i0]
    y, yp = y0, yp0
    out_y[i0] = y
    out_yp[i0] = yp
    frozen_at(r, grid, vals, ders, fz)
    g1, g2 = event_values(kind, r, y, yp, fz, c)
    if g1 > 0.0 or g2 > 0.0:
        return (SET1 if g1 > 0.0 else SET2), r, i0
    h = 0.05 * (grid[i0 + 1] - grid[i0]) if iend > i0 else 0.0
    ypp = rhs_single(kind, r, y, yp, fz, c)
    for i in range(i0, iend):
        r_t = grid[i + 1]
        while r < r_t:
            last = h >= r_t - r
            hh = r_t - r if last else h
            k1y, k1p = yp, ypp
            k2y, k2p = _deriv(kind, r + _C2 * hh, y + hh * _A21 * k1y, yp + hh * _A21 * k1p, grid, vals, ders, c, fz)
            k3y, k3p = _deriv(kind, r + _C3 * hh, y + hh * (_A31 * k1y + _A32 * k2y),
                              yp + hh * (_A31 * k1p + _A32 * k2p), grid, vals, ders, c, fz)
            k4y, k4p = _deriv(kind, r + _C4 * hh, y + hh * (_A41 * k1y + _A42 * k2y + _A43 * k3y),
                              yp + hh * (_A41 * k1p + _A42 * k2p + _A43 * k3p), grid, vals, ders, c, fz)
            k5y, k5p = _deriv(kind, r + _C5 * hh,
                              y + hh * (_A51 * k1y + _A52 * k2y + _A53 * k3y + _A54 * k4y),
                              yp + hh * (_A51 * k1p + _A52 * k2p + _A53 * k3p + _A54 * k4p),
                              grid, vals, ders, c, fz)
            k6y, k6p = _deriv(kind, r + hh,
                              y + hh * (_A61 * k1y + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y),
                              yp + hh * (_A61 * k1p + _A62 * k2p + _A63 * k3p + _A64 * k4p + _A65 * k5p),
                              grid, vals, ders, c, fz)
            yn = y + hh * (_B1 * k1y + _B3 * k3y + _B4 * k4y + _B5 * k5y + _B6 * k6y)
            ypn = yp + hh * (_B1 * k1p + _B3 * k3p + _B4 * k4p + _B5 * k5p + _B6 * k6p)
            rn = r_t if last else r + hh
            k7y, k7p = _deriv(kind, rn, yn, ypn, grid, vals, ders, c, fz)
            ey = hh * (_E1 * k1y + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y + _E7 * k7y)
            ep = hh * (_E1 * k1p + _E3 * k3p + _E4 * k4p + _E5 * k5p + _E6 * k6p + _E7 * k7p)
            if not (math.isfinite(yn) and math.isfinite(ypn)) or abs(yn) > blow:
                if hh > 1e-6 * (r_t - r) and not math.isfinite(yn):
                    h = 0.25 * hh
                    continue
                return SET2, r, i
            sy = atol + rtol * max(abs(y), abs(yn))
            sp = atol + rtol * max(abs(yp), abs(ypn))
            err = max(abs(ey) / sy, abs(ep) / sp)
            if err <= 1.0:
                # fz holds frozen values at rn after the k7 evaluation
                n1, n2 = event_values(kind, rn, yn, ypn, fz, c)
                fired = 0
                re = rn
                if n1 > 0.0:
                    re = _localize(kind, 1, r, rn, g1, n1, y, yp, ypp, yn, ypn, k7p, grid, vals, ders, c, fz, 1e-10)
                    fired = SET1
                if n2 > 0.0:
                    re2 = _localize(kind, 2, r, rn, g2, n2, y, yp, ypp, yn, ypn, k7p, grid, vals, ders, c, fz, 1e-10)
                    if fired == 0 or re2 < re:
                        re = re2
                        fired = SET2
                if fired != 0:
                    return fired, re, i
                fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
                if not last or fac < 1.0:
                    h = hh * fac
                r, y, yp, ypp = rn, yn, ypn, k7p
                g1, g2 = n1, n2
            else:
                h = hh * max(0.2, 0.9 * err ** -0.2)
            if h < 1e-13 * r:
                return STALL, r, i
        out_y[i + 1] = y
        out_yp[i + 1] = yp
    return SET3, grid[iend], iend
