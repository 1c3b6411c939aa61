import json
import math

import numpy as np
import pytest

from dyonsolve.errors import InsufficientSignal
from dyonsolve.profile import FieldProfile, make_grid
from dyonsolve.verifier import (CLAUSE_GROUPS, DECAY_QUANTITIES, ClauseResult, DecayFit,
                                VerificationReport, check_origin_orders, check_theorem1,
                                decay_quantities, fit_decay, fit_rate, predicted_rates, verify)

SHIFT_TOL = 0.02


def _synthetic(consts, grid):
    """Profile whose tails are exact exponentials at the predicted rates."""
    r = grid
    rates = predicted_rates(consts)
    vals = np.empty((6, r.size))
    vals[0] = np.exp(-rates["f"] * r)
    vals[4] = np.exp(-rates["h"] * r)
    vals[1] = 1.0 - np.exp(-rates["rho"] * r) / r
    vals[5] = 1.0 - np.exp(-rates["sigma"] * r) / r
    vals[2] = 0.3 - 0.1 / r
    vals[3] = vals[2] + np.exp(-rates["B-A"] * r) / r
    ders = np.gradient(vals, r, axis=1)
    return FieldProfile(r, vals, ders, {})


def test_exact_exponential_rate():
    r = make_grid(1.0, 60.0, 2000)
    assert fit_rate(r, np.exp(-0.4 * r), (30.0, 54.0)) == pytest.approx(0.400, abs=1e-3)


def test_tau_fit_within_band(accept_consts):
    r = make_grid(1.0, 60.0, 2000)
    prof = _synthetic(accept_consts, r)
    prof.values[3] = prof.values[2] + np.exp(-0.7 * r) / r
    fit = {d.quantity_id: d for d in fit_decay(prof, accept_consts)}["B-A"]
    assert fit.fitted_rate == pytest.approx(0.700, abs=2e-3)
    assert fit.relative_gap == pytest.approx(-0.01, abs=2e-3)
    assert fit.passed


def test_insufficient_signal():
    r = make_grid(1.0, 60.0, 500)
    with pytest.raises(InsufficientSignal):
        fit_rate(r, np.full_like(r, 1e-15), (30.0, 54.0))
    with pytest.raises(InsufficientSignal):
        fit_rate(r, np.exp(-0.4 * r), (70.0, 80.0))


def test_synthetic_profile_fits_all_rates(accept_consts):
    prof = _synthetic(accept_consts, make_grid(1.0, 60.0, 2000))
    fits = fit_decay(prof, accept_consts)
    assert sorted(d.quantity_id for d in fits) == sorted(DECAY_QUANTITIES)
    for d in fits:
        if d.quantity_id != "A":
            assert abs(d.relative_gap) < 0.01, d
        assert d.passed, d


def test_report_requires_every_entry():
    clauses = [ClauseResult("x", g, True, 0.0, 1.0) for g in CLAUSE_GROUPS]
    fits = [DecayFit(q, 1.0, 1.0, 0.0, (1, 2), True) for q in DECAY_QUANTITIES]
    rep = VerificationReport(clauses, fits)
    assert rep.overall
    with pytest.raises(ValueError):
        VerificationReport(clauses[:-1], fits)
    with pytest.raises(ValueError):
        VerificationReport(clauses, fits[:-1])
    with pytest.raises(ValueError):
        VerificationReport(clauses, fits + fits[:1])
    fits[0].passed = False
    assert not VerificationReport(clauses, fits).overall


def test_vacuum_tail_weighted_monotonicity(accept_consts):
    grid = make_grid(1e-3, 10.0, 300)
    prof = FieldProfile.constant(grid, f=0.0, rho=1.0, A=0.0, B=0.0, h=0.0, sigma=1.0)
    clauses = {c.clause_id: c for c in check_theorem1(prof, accept_consts)}
    assert clauses["r^-k*rho decreasing (rho<=rho0)"].passed


def test_zero_solution_report(zero_solution):
    _, consts, prof, _ = zero_solution
    clauses = {c.clause_id: c for c in check_theorem1(prof, consts)}
    assert clauses["B>=A"].passed and clauses["B>=A"].worst_margin == 0.0
    assert all(c.passed for c in clauses.values())
    orders = {o.field_id: o for o in check_origin_orders(prof, consts)}
    assert orders["A"].passed and math.isnan(orders["A"].slope)


def test_report_json_round_trip(zero_solution):
    _, consts, prof, _ = zero_solution
    rep = verify(prof, consts)
    d = json.loads(rep.to_json())
    assert d["overall"] == rep.overall
    assert {c["group"] for c in d["clauses"]} == set(CLAUSE_GROUPS)
    assert sorted(x["quantity_id"] for x in d["decay_fits"]) == sorted(DECAY_QUANTITIES)


def test_origin_orders_on_power_laws(accept_consts):
    r = make_grid(1e-3, 1.0, 400)
    k = accept_consts.k_exp
    vals = np.array([1 - 0.2 * r**2, 0.9 * r**k, 0.1 * r, 0.12 * r, 1 - 0.4 * r**2, 0.8 * r])
    prof = FieldProfile(r, vals, np.gradient(vals, r, axis=1), {})
    for o in check_origin_orders(prof, accept_consts):
        assert abs(o.relative_gap) < 1e-6, o


@pytest.mark.parametrize("name", ["f", "rho", "h", "B-A", "sigma"])
def test_window_shift_self_consistency(name, accept_solution, accept_consts):
    # windows are fractions of each quantity's resolvable radius; shift by +10% of it
    prof, _, _ = accept_solution
    base = {d.quantity_id: d for d in fit_decay(prof, accept_consts, (0.5, 0.9))}[name]
    moved = {d.quantity_id: d for d in fit_decay(prof, accept_consts, (0.6, 1.0))}[name]
    change = abs(moved.fitted_rate - base.fitted_rate) / base.fitted_rate
    assert change < SHIFT_TOL, f"{name}: {base.fitted_rate:.4f} -> {moved.fitted_rate:.4f}"
