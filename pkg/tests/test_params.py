import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyonsolve.errors import DomainError
from dyonsolve.params import K_EXP, Parameters, derive, validate

BASE = dict(g=1.0, g_prime=1.0, lam=2.0, mu=1.0, kappa_param=1.0, m=1.0, A0=0.3, B0=0.3)


def test_acceptance_set_is_admissible():
    assert validate(Parameters(**BASE)).ok


def test_h2_requires_equal_asymptotic_levels():
    res = validate(Parameters(**{**BASE, "B0": 0.2}))
    assert not res.ok
    assert any(v.startswith("H2") for v in res.violations)


def test_h1_first_clause_violated():
    res = validate(Parameters(**{**BASE, "A0": 0.6, "B0": 0.6}))
    assert any(v.startswith("H1: (1/4) g^2 rho0^2") for v in res.violations)
    assert not any(v.startswith("H1: g'^2") for v in res.violations)


def test_positivity_violations_listed():
    res = validate(Parameters(**{**BASE, "g": -1.0, "m": 0.0}))
    assert sum(v.startswith("positivity") for v in res.violations) == 2


def test_derived_constants_acceptance():
    c = derive(Parameters(**BASE))
    assert c.rho0 == pytest.approx(1.0, abs=1e-15)
    assert c.sigma0 == pytest.approx(1.0, abs=1e-15)
    assert c.kappa_decay == pytest.approx(0.4, abs=1e-15)
    assert c.zeta == pytest.approx(math.sqrt(0.91), abs=1e-15)
    assert c.zeta == pytest.approx(0.95394, abs=1e-5)
    assert c.nu == pytest.approx(0.70711, abs=1e-5)
    assert c.nu0 == pytest.approx(0.70711, abs=1e-5)
    assert c.mu0 == pytest.approx(0.5, abs=1e-15)
    assert c.xi == pytest.approx(1.0, abs=1e-15)
    assert c.alpha == pytest.approx(K_EXP / 2)


def test_monopole_limit_kappa():
    c = derive(Parameters(**{**BASE, "A0": 0.0, "B0": 0.0}))
    assert c.kappa_decay == pytest.approx(0.5)


def test_k_exponent():
    assert K_EXP == pytest.approx(0.36602540378, abs=1e-11)


def test_negative_radicand_raises():
    with pytest.raises(DomainError):
        derive(Parameters(**{**BASE, "A0": 0.6, "B0": 0.6}))


def test_alpha_outside_range_raises():
    with pytest.raises(DomainError):
        derive(Parameters(**BASE), alpha=K_EXP)
    with pytest.raises(DomainError):
        derive(Parameters(**BASE), alpha=0.0)


def test_json_round_trip_and_strictness():
    p = Parameters(**BASE)
    assert Parameters.from_json(json.dumps(p.to_dict())) == p
    with pytest.raises(ValueError):
        Parameters.from_dict({**p.to_dict(), "extra": 1.0})
    d = p.to_dict()
    d.pop("mu")
    with pytest.raises(ValueError):
        Parameters.from_dict(d)


pos = st.floats(min_value=0.2, max_value=5.0, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(g=pos, gp=pos, lam=pos, mu=pos, kp=pos, m=pos, frac=st.floats(0.0, 0.95))
def test_validate_iff_real_positive_exponents(g, gp, lam, mu, kp, m, frac):
    rho0 = mu * math.sqrt(2 / lam)
    sigma0 = m / math.sqrt(kp)
    a0 = frac * min(0.5 * g * rho0, gp * sigma0)
    p = Parameters(g, gp, lam, mu, kp, m, a0, a0)
    assert validate(p).ok
    c = derive(p)
    for v in (c.kappa_decay, c.zeta, c.nu, c.nu0, c.mu0, c.xi):
        assert v > 0 and math.isfinite(v)
    assert c.nu0 <= c.nu and c.nu0 <= 2 * c.kappa_decay and c.mu0 <= p.mu
    assert c.kappa_decay**2 + a0**2 == pytest.approx(0.25 * g**2 * rho0**2)


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(0.1, 10.0), mu=pos, m=pos)
def test_scale_consistency(scale, mu, m):
    p = Parameters(**{**BASE, "mu": mu, "m": m, "A0": 0.0, "B0": 0.0})
    q = p.replace(mu=scale * mu, m=scale * m)
    c, d = derive(p), derive(q)
    assert d.rho0 == pytest.approx(scale * c.rho0)
    assert d.sigma0 == pytest.approx(scale * c.sigma0)
    assert d.kappa_decay == pytest.approx(scale * c.kappa_decay)
