import math

import numpy as np
import pytest

from dyonsolve.errors import DomainError, GridMismatch, NotConverged, PreconditionError
from dyonsolve.fixed_point import (SolveOptions, check_preconditions, initial_guess,
                                   invariant_set_margins, schauder_step, solve_dyon, weighted_norm)
from dyonsolve.params import Parameters
from dyonsolve.profile import INDEX, make_grid

from conftest import ACCEPT


def _resid(a, b, consts):
    d = b.values - a.values
    return weighted_norm(d[INDEX["rho"]], d[INDEX["A"]], d[INDEX["h"]], consts.alpha, a.grid)


def test_weighted_norm_examples():
    r = make_grid(1e-3, 50.0, 300)
    a = 0.18
    z = np.zeros_like(r)
    unit = r**a / (1 + r**a)
    assert weighted_norm(z, z, z, a, r) == 0.0
    assert weighted_norm(unit, z, z, a, r) == pytest.approx(1.0, rel=1e-14)
    assert weighted_norm(unit, unit, unit, a, r) == pytest.approx(3.0, rel=1e-14)
    with pytest.raises(GridMismatch):
        weighted_norm(unit[:-1], z, z, a, r)


def test_initial_guess_meets_boundary_data(accept_consts):
    grid = make_grid(1e-3, 60.0, 500)
    g = initial_guess(accept_consts, grid)
    assert g["f"][0] == pytest.approx(1.0, abs=1e-6) and g["h"][0] == pytest.approx(1.0, abs=1e-6)
    for name, tgt in (("rho", 1.0), ("sigma", 1.0), ("A", 0.3), ("B", 0.3)):
        assert abs(g[name][0]) < 2e-3
        assert g[name][-1] == pytest.approx(tgt, abs=1e-9)
    assert g["f"][-1] < 0.01
    m = invariant_set_margins(g, accept_consts)
    for key in ("r_rho_increasing", "r_A_increasing", "rho_cap", "gauge_A", "gauge_B"):
        assert m[key] >= 0.0


def test_precondition_B_below_A(accept_consts):
    grid = make_grid(1e-3, 60.0, 200)
    prof = initial_guess(accept_consts, grid)
    vals = prof.values.copy()
    vals[INDEX["B"]] *= 0.5
    bad = prof.with_field("B", vals[INDEX["B"]], prof.derivs[INDEX["B"]])
    with pytest.raises(PreconditionError):
        check_preconditions(bad, accept_consts)
    with pytest.raises(PreconditionError):
        schauder_step(bad, accept_consts)


def test_max_iters_zero_returns_initial_guess(accept_params, accept_consts):
    prof, trace = solve_dyon(accept_params, SolveOptions(max_iters=0, N=400))
    assert not trace.converged
    assert trace.iterations == []
    ref = initial_guess(accept_consts, prof.grid)
    assert np.array_equal(prof.values, ref.values)


def test_not_converged_carries_trace(accept_params):
    with pytest.raises(NotConverged) as exc:
        solve_dyon(accept_params, SolveOptions(max_iters=2, N=400))
    assert len(exc.value.trace.iterations) == 2
    assert exc.value.trace.residuals == exc.value.history
    assert all(math.isfinite(x) for x in exc.value.history)


def test_invalid_parameters_rejected():
    with pytest.raises(DomainError):
        solve_dyon(Parameters(**{**ACCEPT, "B0": 0.2}))


def test_zero_gauge_targets_give_zero_gauge_fields(zero_solution):
    _, _, prof, trace = zero_solution
    assert trace.converged
    assert np.max(np.abs(prof["A"])) <= 1e-8
    assert np.max(np.abs(prof["B"])) <= 1e-8


def test_decoupled_fixed_point_reproduced(zero_solution):
    _, consts, prof, _ = zero_solution
    again = schauder_step(prof, consts)
    assert np.max(np.abs(again.values - prof.values)) < 1e-6


def test_trace_is_gapless(zero_solution):
    _, _, _, trace = zero_solution
    d = trace.to_dict()
    assert len(d["iterations"]) == len(trace.residuals) > 0
    assert all(math.isfinite(x) for x in trace.residuals)
    assert trace.residuals[-1] < 1e-8


def test_double_step_from_converged(accept_solution, accept_consts):
    prof, trace, _ = accept_solution
    s1 = schauder_step(prof, accept_consts)
    s2 = schauder_step(s1, accept_consts)
    r1 = _resid(prof, s1, accept_consts)
    assert _resid(s1, s2, accept_consts) < 2 * r1
    assert _resid(prof, s2, accept_consts) < 2 * r1


def test_step_output_in_invariant_set(accept_solution, accept_consts):
    prof, _, _ = accept_solution
    out = schauder_step(prof, accept_consts)
    m = invariant_set_margins(out, accept_consts)
    for key in ("r_rho_increasing", "r_A_increasing", "rho_cap", "gauge_A", "gauge_B", "far_field"):
        assert m[key] >= -1e-10, key
    for key in ("sup_r^-k_rho_near", "sup_r^-1_A_near", "sup_r^-2_h-1_near"):
        assert math.isfinite(m[key]) and m[key] < 10.0
