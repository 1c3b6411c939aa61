"""Physical couplings, the (H1)/(H2) admissibility checks and derived scales."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

from .errors import DomainError

K_EXP = 0.5 * (math.sqrt(3.0) - 1.0)

PARAM_NAMES = ("g", "g_prime", "lambda", "mu", "kappa_param", "m", "A0", "B0")


@dataclass(frozen=True)
class Parameters:
    g: float
    g_prime: float
    lam: float
    mu: float
    kappa_param: float
    m: float
    A0: float
    B0: float

    @classmethod
    def from_dict(cls, data):
        """Build from a mapping keyed like the JSON config (``lambda`` not ``lam``)."""
        data = dict(data)
        unknown = set(data) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        missing = set(PARAM_NAMES) - set(data)
        if missing:
            raise ValueError(f"missing parameter keys: {sorted(missing)}")
        data["lam"] = data.pop("lambda")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {k: d[k] for k in PARAM_NAMES}

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def replace(self, **changes):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return Parameters(**values)


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


def validate(params: Parameters) -> ValidationResult:
    """Check positivity, (H1) and (H2). Violations are returned, not raised."""
    bad = []
    for name in ("g", "g_prime", "lam", "mu", "kappa_param", "m"):
        value = getattr(params, name)
        if not (math.isfinite(value) and value > 0):
            bad.append(f"positivity: {name} must be > 0 (got {value!r})")
    for name in ("A0", "B0"):
        value = getattr(params, name)
        if not (math.isfinite(value) and value >= 0):
            bad.append(f"positivity: {name} must be >= 0 (got {value!r})")
    if bad:
        return ValidationResult(tuple(bad))

    rho0 = params.mu * math.sqrt(2.0 / params.lam)
    sigma0 = params.m / math.sqrt(params.kappa_param)
    lhs1 = 0.25 * params.g**2 * rho0**2
    if not lhs1 > params.A0**2:
        bad.append(f"H1: (1/4) g^2 rho0^2 = {lhs1:.17g} must exceed A0^2 = {params.A0**2:.17g}")
    lhs2 = params.g_prime**2 * sigma0**2
    if not lhs2 > params.B0**2:
        bad.append(f"H1: g'^2 sigma0^2 = {lhs2:.17g} must exceed B0^2 = {params.B0**2:.17g}")
    if params.B0 != params.A0:
        bad.append(f"H2: B0 = {params.B0!r} must equal A0 = {params.A0!r}")
    return ValidationResult(tuple(bad))


@dataclass(frozen=True)
class DerivedConstants:
    rho0: float
    sigma0: float
    k_exp: float
    kappa_decay: float
    zeta: float
    nu: float
    nu0: float
    mu0: float
    xi: float
    alpha: float
    params: Parameters

    @property
    def rho_cap(self):
        """Upper bound sqrt(rho0^2 + A0^2 / (2 lambda)) on the Higgs modulus."""
        p = self.params
        return math.sqrt(self.rho0**2 + p.A0**2 / (2.0 * p.lam))

    @property
    def min_rate(self):
        return min(self.kappa_decay, self.zeta, self.nu0, self.mu0, self.xi)

    def to_dict(self):
        d = asdict(self)
        d.pop("params")
        return d


def derive(params: Parameters, alpha: float | None = None) -> DerivedConstants:
    """Closed-form scales and decay exponents.

    ``alpha`` is the weight exponent of the fixed-point norm; it must lie in
    (0, k) and defaults to k/2.
    """
    rho0 = params.mu * math.sqrt(2.0 / params.lam)
    sigma0 = params.m / math.sqrt(params.kappa_param)
    rad_kappa = 0.25 * params.g**2 * rho0**2 - params.A0**2
    rad_zeta = params.g_prime**2 * sigma0**2 - params.B0**2
    if rad_kappa <= 0 or rad_zeta <= 0:
        raise DomainError(
            f"negative radicand in decay exponents: kappa^2={rad_kappa!r}, zeta^2={rad_zeta!r}"
        )
    kappa_decay = math.sqrt(rad_kappa)
    zeta = math.sqrt(rad_zeta)
    nu = 0.5 * rho0 * math.hypot(params.g, params.g_prime)
    nu0 = min(2.0 * kappa_decay, nu)
    mu0 = min(params.mu, math.sqrt(2.0) * kappa_decay, nu / math.sqrt(2.0))
    xi = math.sqrt(params.kappa_param) * sigma0
    if alpha is None:
        alpha = 0.5 * K_EXP
    if not 0.0 < alpha < K_EXP:
        raise DomainError(f"alpha must lie in (0, {K_EXP}); got {alpha!r}")
    return DerivedConstants(
        rho0=rho0,
        sigma0=sigma0,
        k_exp=K_EXP,
        kappa_decay=kappa_decay,
        zeta=zeta,
        nu=nu,
        nu0=nu0,
        mu0=mu0,
        xi=xi,
        alpha=alpha,
        params=params,
    )
