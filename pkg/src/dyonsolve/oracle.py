"""Global finite-difference collocation of the full six-field system.

An independent route to the same profiles: all six fields on the whole grid
at once, Newton on the discrete residual, no shooting.  It shares only the
parameter handling and the right-hand side with the shooting path.

Discretization.  The grid is uniform in x = ln r, so with central differences

    y'  = y_x / r,      y'' = (y_xx - y_x) / r^2,

and each interior row is r^2 (y'' - rhs), evaluated at the node.  Boundary
rows are Robin conditions (one-sided second-order differences):

    r_start:  f, h:  y' = 2 (y - 1) / r      rho:  rho' = k rho / r
              A, B, sigma:  y' = y / r
    r_max:    f' = -kappa f,  h' = -zeta h
              (r (rho - rho0))' = -sqrt(2) mu r (rho - rho0)
              (r (sigma - sigma0))' = -sqrt(2) xi r (sigma - sigma0)
              (r (A - A0))' = 0,  (r (B - B0))' = 0

The origin rows select the regular branch without knowing the shooting
parameters; the outer rows select the decaying tail (the gauge fields keep
their Coulomb tail instead of being pinned to A0 at a finite radius).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .errors import GridMismatch, InvalidGrid, NotConverged, SingularJacobian
from .params import DerivedConstants, Parameters, derive
from .profile import FIELDS, INDEX, FieldProfile, check_same_grid
from .radial import rhs_full_array

NF = 6
# a row touches its own node and both neighbours; boundary rows reach two nodes in
BAND = 3 * NF - 1


@dataclass
class NewtonHistory:
    residuals: list = field(default_factory=list)
    steps: list = field(default_factory=list)


def _log_spacing(grid):
    x = np.log(grid)
    hx = np.diff(x)
    if grid.size < 3:
        raise InvalidGrid("collocation needs at least one interior node")
    if not np.allclose(hx, hx[0], rtol=1e-9, atol=0):
        raise InvalidGrid("collocation grid must be uniform in log r")
    return float(hx[0])


def residual(U, grid, consts: DerivedConstants, hx=None):
    """Discrete residual, shape (n, 6), for node values ``U`` of shape (n, 6)."""
    hx = _log_spacing(grid) if hx is None else hx
    n = grid.size
    p = consts.params
    R = np.empty_like(U)
    r = grid[1:-1]
    um, u0, up = U[:-2], U[1:-1], U[2:]
    ux = (up - um) / (2 * hx)
    uxx = (up - 2 * u0 + um) / hx**2
    vals = u0.T
    ders = (ux / r[:, None]).T
    rhs = rhs_full_array(r, vals, ders, consts).T
    R[1:-1] = uxx - ux - (r * r)[:, None] * rhs

    # origin Robin rows
    a = U[0]
    ax = (-3 * U[0] + 4 * U[1] - U[2]) / (2 * hx)
    R[0, INDEX["f"]] = ax[INDEX["f"]] - 2 * (a[INDEX["f"]] - 1)
    R[0, INDEX["h"]] = ax[INDEX["h"]] - 2 * (a[INDEX["h"]] - 1)
    R[0, INDEX["rho"]] = ax[INDEX["rho"]] - consts.k_exp * a[INDEX["rho"]]
    for k in ("A", "B", "sigma"):
        R[0, INDEX[k]] = ax[INDEX[k]] - a[INDEX[k]]

    # asymptotic Robin rows
    rm = grid[-1]
    b = U[-1]
    bx = (3 * U[-1] - 4 * U[-2] + U[-3]) / (2 * hx)
    R[-1, INDEX["f"]] = bx[INDEX["f"]] + consts.kappa_decay * rm * b[INDEX["f"]]
    R[-1, INDEX["h"]] = bx[INDEX["h"]] + consts.zeta * rm * b[INDEX["h"]]
    R[-1, INDEX["rho"]] = bx[INDEX["rho"]] + (1 + math.sqrt(2) * p.mu * rm) * (b[INDEX["rho"]] - consts.rho0)
    R[-1, INDEX["sigma"]] = bx[INDEX["sigma"]] + (1 + math.sqrt(2) * consts.xi * rm) * (b[INDEX["sigma"]] - consts.sigma0)
    R[-1, INDEX["A"]] = bx[INDEX["A"]] + b[INDEX["A"]] - p.A0
    R[-1, INDEX["B"]] = bx[INDEX["B"]] + b[INDEX["B"]] - p.B0
    return R


def banded_jacobian(U, grid, consts, hx, R0=None):
    """Finite-difference Jacobian in LAPACK banded storage.

    Columns further apart than the bandwidth never share a row, so one
    residual evaluation per colour class recovers 2 BAND + 1 columns at once.
    """
    M = U.size
    u = U.ravel()
    R0 = residual(U, grid, consts, hx).ravel() if R0 is None else R0.ravel()
    ab = np.zeros((2 * BAND + 1, M))
    ncol = 2 * BAND + 1
    delta = 1e-7 * np.maximum(1.0, np.abs(u))
    for g in range(ncol):
        cols = np.arange(g, M, ncol)
        up = u.copy()
        up[cols] += delta[cols]
        dR = (residual(up.reshape(U.shape), grid, consts, hx).ravel() - R0)
        for d in range(-BAND, BAND + 1):
            rows = cols + d
            ok = (rows >= 0) & (rows < M)
            ab[BAND + d, cols[ok]] = dR[rows[ok]] / delta[cols[ok]]
    # storage: ab[BAND + i - j, j] = J[i, j]
    return ab


def default_initial_guess(consts: DerivedConstants, grid):
    """Smooth guess with the right boundary values (tanh / Lorentzian shapes)."""
    p = consts.params
    r = np.asarray(grid, float)
    U = np.empty((r.size, NF))
    U[:, INDEX["f"]] = 1.0 / (1.0 + (consts.kappa_decay * r) ** 2)
    U[:, INDEX["h"]] = 1.0 / (1.0 + (consts.zeta * r) ** 2)
    U[:, INDEX["rho"]] = consts.rho0 * np.tanh(p.mu * r) ** consts.k_exp
    U[:, INDEX["sigma"]] = consts.sigma0 * np.tanh(consts.xi * r)
    U[:, INDEX["A"]] = p.A0 * np.tanh(consts.nu * r)
    U[:, INDEX["B"]] = p.B0 * np.tanh(consts.nu * r)
    return U


def _as_array(guess, grid):
    if isinstance(guess, FieldProfile):
        if guess.grid.shape != grid.shape or not np.allclose(guess.grid, grid, rtol=1e-13, atol=0):
            raise GridMismatch("initial guess lives on a different grid")
        return guess.values.T.copy()
    U = np.array(guess, dtype=float)
    if U.shape == (NF, grid.size):
        U = U.T.copy()
    if U.shape != (grid.size, NF):
        raise GridMismatch(f"initial guess shape {U.shape} does not match grid of {grid.size}")
    return U


def solve_collocation(params, grid, initial_guess=None, tol=1e-10, max_iter=60) -> FieldProfile:
    """Damped Newton on the collocation residual to sup-norm ``tol``.

    ``params`` may be Parameters or DerivedConstants.  Raises NotConverged
    (with ``history``) or SingularJacobian (with the pivot node).
    """
    consts = params if isinstance(params, DerivedConstants) else derive(params)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise InvalidGrid("collocation needs at least one interior node")
    hx = _log_spacing(grid)
    U = default_initial_guess(consts, grid) if initial_guess is None else _as_array(initial_guess, grid)
    hist = NewtonHistory()
    R = residual(U, grid, consts, hx)
    norm = float(np.max(np.abs(R)))
    hist.residuals.append(norm)
    it = 0
    while norm >= tol:
        if it >= max_iter:
            raise NotConverged(f"Newton stalled at residual {norm:.3e}", history=hist)
        ab = banded_jacobian(U, grid, consts, hx, R)
        try:
            step = solve_banded((BAND, BAND), ab, -R.ravel())
        except (LinAlgError, ValueError) as exc:
            node = _pivot_node(str(exc))
            raise SingularJacobian(f"singular collocation Jacobian: {exc}", node=node) from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("non-finite Newton step", node=None)
        step = step.reshape(U.shape)
        # Armijo backtracking on the 2-norm
        phi0 = float(np.sum(R * R))
        t = 1.0
        while True:
            Ut = U + t * step
            Rt = residual(Ut, grid, consts, hx)
            phi = float(np.sum(Rt * Rt))
            if np.isfinite(phi) and phi <= (1 - 1e-4 * t) * phi0:
                break
            t *= 0.5
            if t < 1e-10:
                raise NotConverged(f"line search failed at residual {norm:.3e}", history=hist)
        U, R = Ut, Rt
        norm = float(np.max(np.abs(R)))
        hist.residuals.append(norm)
        hist.steps.append(t)
        it += 1
    return _to_profile(U, grid, consts, hx, hist)


def _pivot_node(msg):
    digits = [int(s) for s in msg.replace(",", " ").split() if s.isdigit()]
    return (digits[0] - 1) // NF if digits else None


def _to_profile(U, grid, consts, hx, hist):
    vals = U.T.copy()
    ders = np.empty_like(vals)
    ders[:, 1:-1] = (vals[:, 2:] - vals[:, :-2]) / (2 * hx) / grid[1:-1]
    ders[:, 0] = (-3 * vals[:, 0] + 4 * vals[:, 1] - vals[:, 2]) / (2 * hx) / grid[0]
    ders[:, -1] = (3 * vals[:, -1] - 4 * vals[:, -2] + vals[:, -3]) / (2 * hx) / grid[-1]
    r0 = grid[0]
    shoot = {
        "C": (vals[INDEX["f"], 0] - 1) / r0**2,
        "E": (vals[INDEX["h"], 0] - 1) / r0**2,
        "F": vals[INDEX["rho"], 0] / r0**consts.k_exp,
        "a": vals[INDEX["A"], 0] / r0,
        "b": vals[INDEX["B"], 0] / r0,
        "D": vals[INDEX["sigma"], 0] / r0,
    }
    prof = FieldProfile(grid.copy(), vals, ders, {k: float(v) for k, v in shoot.items()})
    prof.newton_history = hist
    return prof


def compare(profile_a: FieldProfile, profile_b: FieldProfile):
    """Per-field sup |a - b| and the radius where it is attained."""
    check_same_grid(profile_a, profile_b)
    out = {}
    for name in FIELDS:
        d = np.abs(profile_a[name] - profile_b[name])
        i = int(np.argmax(d))
        out[name] = {"gap": float(d[i]), "radius": float(profile_a.grid[i])}
    return out


def refine_grid(grid):
    """Grid with every log-interval halved (2 n - 1 nodes, same end points)."""
    x = np.log(grid)
    fine = np.empty(2 * grid.size - 1)
    fine[0::2] = x
    fine[1::2] = 0.5 * (x[:-1] + x[1:])
    out = np.exp(fine)
    out[0::2] = grid
    return out


def restrict(profile: FieldProfile, coarse_grid):
    """Fine-grid profile sampled at the coarse nodes (every other node)."""
    vals = profile.values[:, 0::2]
    ders = profile.derivs[:, 0::2]
    if vals.shape[1] != coarse_grid.size:
        raise GridMismatch("profile is not a refinement of the coarse grid")
    return FieldProfile(np.asarray(coarse_grid, float).copy(), vals.copy(), ders.copy(), dict(profile.shoot_params))


def solve_frozen_collocation(field_id, frozen: FieldProfile, consts: DerivedConstants, tol=1e-10,
                             max_iter=60) -> FieldProfile:
    """Collocation for one field with the other five held at ``frozen``.

    Uses the same rows as the full system, restricted to one column; the
    frozen profile's own column is the initial guess.
    """
    grid = frozen.grid
    hx = _log_spacing(grid)
    j = INDEX[field_id]
    U = frozen.values.T.copy()
    hist = NewtonHistory()

    def res(col):
        V = U.copy()
        V[:, j] = col
        return residual(V, grid, consts, hx)[:, j]

    y = U[:, j].copy()
    R = res(y)
    norm = float(np.max(np.abs(R)))
    hist.residuals.append(norm)
    band = 2
    it = 0
    while norm >= tol:
        if it >= max_iter:
            raise NotConverged(f"Newton stalled at residual {norm:.3e}", history=hist)
        n = y.size
        ab = np.zeros((2 * band + 1, n))
        delta = 1e-7 * np.maximum(1.0, np.abs(y))
        for g in range(2 * band + 1):
            cols = np.arange(g, n, 2 * band + 1)
            yp = y.copy()
            yp[cols] += delta[cols]
            dR = res(yp) - R
            for d in range(-band, band + 1):
                rows = cols + d
                ok = (rows >= 0) & (rows < n)
                ab[band + d, cols[ok]] = dR[rows[ok]] / delta[cols[ok]]
        try:
            step = solve_banded((band, band), ab, -R)
        except (LinAlgError, ValueError) as exc:
            raise SingularJacobian(f"singular collocation Jacobian: {exc}", node=_pivot_node(str(exc))) from exc
        phi0 = float(R @ R)
        t = 1.0
        while True:
            Rt = res(y + t * step)
            if np.all(np.isfinite(Rt)) and float(Rt @ Rt) <= (1 - 1e-4 * t) * phi0:
                break
            t *= 0.5
            if t < 1e-10:
                raise NotConverged(f"line search failed at residual {norm:.3e}", history=hist)
        y, R = y + t * step, Rt
        norm = float(np.max(np.abs(R)))
        hist.residuals.append(norm)
        hist.steps.append(t)
        it += 1
    U[:, j] = y
    return _to_profile(U, grid, consts, hx, hist)
