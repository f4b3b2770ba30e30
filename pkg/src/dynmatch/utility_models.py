"""Matching-utility distributions and the extreme-value constants they induce.

Every family exposes its tail index ``alpha``, the Frechet normalizer
``kappa``, the asymptotic mean maximum ``m_asymptotic(k)``, the exact
``cdf_max`` and O(1) sampling of the maximum of k utilities.

Pareto(c, beta) uses F(v) = 1 - (c v)^-beta on v >= 1/c, so the minimum is
1/c and E[max of k] ~ Gamma(1 - 1/beta) k^(1/beta) / c.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import integrate

from .specfun import EULER_GAMMA, gamma_fn

__all__ = [
    "UtilityModel",
    "Exponential",
    "Uniform",
    "Pareto",
    "CorrelatedPareto",
    "FrechetCrowding",
    "parse_model",
    "alpha_of",
    "kappa_of",
    "m_asymptotic",
    "m_exact",
    "sample_max",
    "cdf_max",
]

# kind codes shared with the simulation kernel
EXPONENTIAL, UNIFORM, PARETO, CORRELATED_PARETO, FRECHET_CROWDING = range(5)

_SQRT3_2 = math.sqrt(3.0) / 2.0


@numba.njit(cache=True)
def max_from_uniforms(kind, p0, p1, p2, k, u1, u2):
    """Maximum of k utilities built from two uniforms on [0, 1).

    ``u1`` drives the maximum of the i.i.d. part via F^-1(u1^(1/k)); ``u2``
    is the common shock (U0 or W) of the correlated families and is ignored
    otherwise.  Parameters ``p0..p2`` follow ``UtilityModel.kernel_params``.
    """
    if k <= 0:
        return 0.0
    if u1 <= 0.0:
        log_p = -np.inf
        tail = 1.0
    else:
        log_p = math.log(u1) / k
        tail = -math.expm1(log_p)  # 1 - u1^(1/k) without cancellation
    if kind == EXPONENTIAL:
        return -math.log(tail) / p0
    if kind == UNIFORM:
        return p0 + (p1 - p0) * math.exp(log_p)
    if kind == PARETO:
        return tail ** (-1.0 / p1) / p0
    if kind == CORRELATED_PARETO:
        # base Pareto(sqrt(3)/2, 3); p0 = rho, p1 = sqrt(1 - rho^2)
        m = tail ** (-1.0 / 3.0) / _SQRT3_2
        u0 = (1.0 - u2) ** (-1.0 / 3.0) / _SQRT3_2
        return p0 * u0 + p1 * m
    # Frechet crowding: p0 = beta, p1 = Gamma(1 - 1/beta), p2 = 2^(-1/beta)
    m = tail ** (-1.0 / p0)
    if u2 <= 0.0:
        w = 0.0
    else:
        w = (-math.log(u2)) ** (-1.0 / p0)
    ck = k ** (1.0 / p0) * p1
    return p2 * max(ck * w, m)


@dataclass(frozen=True)
class UtilityModel:
    """Base class; use one of the concrete families."""

    kind: int = field(init=False, repr=False)
    iid: bool = field(init=False, repr=False, default=True)

    @property
    def alpha(self) -> float:
        raise NotImplementedError

    @property
    def kappa(self) -> float:
        a = self.alpha
        if a == 0.0:
            raise ValueError(f"{self} has alpha = 0; kappa is undefined")
        return gamma_fn(1.0 - a) ** (-1.0 / a)

    @property
    def lower(self) -> float:
        """Left end of the support of a single utility."""
        raise NotImplementedError

    def kernel_params(self) -> tuple[float, float, float]:
        raise NotImplementedError

    def m_asymptotic(self, k: float) -> float:
        raise NotImplementedError

    def cdf(self, v: float) -> float:
        """CDF of a single utility (i.i.d. families)."""
        raise NotImplementedError

    def inverse_cdf(self, u: np.ndarray) -> np.ndarray:
        """Vectorized F^-1 on uniforms in [0, 1) (i.i.d. families)."""
        raise ValueError(f"{type(self).__name__} is not an i.i.d. family")

    def cdf_max(self, k: int, v: float) -> float:
        if k == 0:
            return 1.0 if v >= 0 else 0.0
        return self.cdf(v) ** k

    def spec_string(self) -> str:
        raise NotImplementedError

    def sample_max(self, k: int, rng: np.random.Generator) -> float:
        p0, p1, p2 = self.kernel_params()
        u1 = rng.random()
        u2 = rng.random() if not self.iid else 0.0
        return max_from_uniforms(self.kind, p0, p1, p2, int(k), u1, u2)

    def sample_max_many(self, k: int, size: int, rng: np.random.Generator) -> np.ndarray:
        """Vectorized sample_max for a fixed k."""
        p0, p1, p2 = self.kernel_params()
        u = rng.random((size, 2))
        return _sample_many(self.kind, p0, p1, p2, int(k), u)


@numba.njit(cache=True)
def _sample_many(kind, p0, p1, p2, k, u):
    out = np.empty(u.shape[0])
    for i in range(u.shape[0]):
        out[i] = max_from_uniforms(kind, p0, p1, p2, k, u[i, 0], u[i, 1])
    return out


@dataclass(frozen=True)
class Exponential(UtilityModel):
    nu: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("Exponential requires nu > 0")
        object.__setattr__(self, "kind", EXPONENTIAL)

    alpha = property(lambda self: 0.0)
    lower = property(lambda self: 0.0)

    def kernel_params(self):
        return (self.nu, 0.0, 0.0)

    def m_asymptotic(self, k):
        _check_k(k)
        return (EULER_GAMMA + math.log(k)) / self.nu

    def cdf(self, v):
        return -math.expm1(-self.nu * v) if v > 0 else 0.0

    def inverse_cdf(self, u):
        return -np.log1p(-u) / self.nu

    def spec_string(self):
        return f"exponential:nu={self.nu:g}"


@dataclass(frozen=True)
class Uniform(UtilityModel):
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("Uniform requires a < b")
        object.__setattr__(self, "kind", UNIFORM)

    alpha = property(lambda self: 0.0)
    lower = property(lambda self: self.a)

    def kernel_params(self):
        return (self.a, self.b, 0.0)

    def m_asymptotic(self, k):
        _check_k(k)
        return self.b - (self.b - self.a) / k

    def cdf(self, v):
        return min(1.0, max(0.0, (v - self.a) / (self.b - self.a)))

    def inverse_cdf(self, u):
        return self.a + (self.b - self.a) * u

    def spec_string(self):
        return f"uniform:a={self.a:g},b={self.b:g}"


@dataclass(frozen=True)
class Pareto(UtilityModel):
    c: float = 1.0
    beta: float = 2.0

    def __post_init__(self):
        if not (self.c > 0 and self.beta > 1):
            raise ValueError("Pareto requires c > 0 and beta > 1")
        object.__setattr__(self, "kind", PARETO)

    alpha = property(lambda self: 1.0 / self.beta)
    lower = property(lambda self: 1.0 / self.c)

    def kernel_params(self):
        return (self.c, self.beta, 0.0)

    def m_asymptotic(self, k):
        _check_k(k)
        return gamma_fn(1.0 - 1.0 / self.beta) * k ** (1.0 / self.beta) / self.c

    def cdf(self, v):
        cv = self.c * v
        return -math.expm1(-self.beta * math.log(cv)) if cv > 1.0 else 0.0

    def inverse_cdf(self, u):
        if self.beta == 2.0:
            return 1.0 / (np.sqrt(1.0 - u) * self.c)
        return (1.0 - u) ** (-1.0 / self.beta) / self.c

    @property
    def mean(self) -> float:
        return self.beta / ((self.beta - 1.0) * self.c)

    def spec_string(self):
        return f"pareto:c={self.c:g},beta={self.beta:g}"


_BASE = Pareto(_SQRT3_2, 3.0)


@dataclass(frozen=True)
class CorrelatedPareto(UtilityModel):
    """V_i = rho U0 + sqrt(1 - rho^2) U_i with U0, U_i i.i.d. Pareto(sqrt(3)/2, 3)."""

    rho: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("CorrelatedPareto requires 0 <= rho < 1")
        object.__setattr__(self, "kind", CORRELATED_PARETO)
        object.__setattr__(self, "iid", False)

    alpha = property(lambda self: 1.0 / 3.0)

    @property
    def lower(self):
        return (self.rho + self._s) * _BASE.lower

    @property
    def _s(self) -> float:
        return math.sqrt(1.0 - self.rho ** 2)

    def kernel_params(self):
        return (self.rho, self._s, 0.0)

    def m_asymptotic(self, k):
        _check_k(k)
        return self.rho * _BASE.mean + self._s * _BASE.m_asymptotic(k)

    def m_leading(self, k: float) -> float:
        """Regularly varying part of m(k), without the bounded rho E[U0] term."""
        return self._s * _BASE.m_asymptotic(k)

    def cdf_max(self, k, v):
        if k == 0:
            return 1.0 if v >= 0 else 0.0
        if self.rho == 0.0:
            return _BASE.cdf(v / self._s) ** k
        lo = _BASE.lower
        hi = (v - self._s * lo) / self.rho  # U0 beyond hi makes the event impossible
        if hi <= lo:
            return 0.0
        # condition on U0 = u with density 3 (c u)^-3 / u
        def integrand(u):
            dens = 3.0 * (_SQRT3_2 * u) ** -3 / u
            return dens * _BASE.cdf((v - self.rho * u) / self._s) ** k

        val, _ = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200)
        return min(1.0, val)

    def spec_string(self):
        return f"correlated_pareto:rho={self.rho:g}"


@dataclass(frozen=True)
class FrechetCrowding(UtilityModel):
    """V_i = 2^(-1/beta) max(c_k W, U_i), W Frechet(beta), U_i Pareto(1, beta).

    c_k = k^(1/beta) Gamma(1 - 1/beta).  For large k, max U_i / k^(1/beta)
    and c_k W / k^(1/beta) are independent Frechet laws with scales 1 and
    Gamma(1 - 1/beta); their maximum is Frechet with scale
    (1 + Gamma(1 - 1/beta)^beta)^(1/beta), which gives m(k).
    """

    beta: float = 2.0

    def __post_init__(self):
        if not self.beta > 1:
            raise ValueError("FrechetCrowding requires beta > 1")
        object.__setattr__(self, "kind", FRECHET_CROWDING)
        object.__setattr__(self, "iid", False)

    alpha = property(lambda self: 1.0 / self.beta)
    lower = property(lambda self: 2.0 ** (-1.0 / self.beta))

    @property
    def _g(self) -> float:
        return gamma_fn(1.0 - 1.0 / self.beta)

    def kernel_params(self):
        return (self.beta, self._g, 2.0 ** (-1.0 / self.beta))

    def m_asymptotic(self, k):
        _check_k(k)
        b = self.beta
        g = self._g
        return 2.0 ** (-1.0 / b) * (k * (1.0 + g ** b)) ** (1.0 / b) * g

    def cdf_max(self, k, v):
        if k == 0:
            return 1.0 if v >= 0 else 0.0
        b = self.beta
        x = 2.0 ** (1.0 / b) * v
        if x <= 1.0:
            return 0.0
        ck = k ** (1.0 / b) * self._g
        return (-math.expm1(-b * math.log(x))) ** k * math.exp(-((x / ck) ** (-b)))

    def spec_string(self):
        return f"frechet_crowding:beta={self.beta:g}"


def _check_k(k: float) -> None:
    if not k >= 1:
        raise ValueError(f"m(k) requires k >= 1, got {k!r}")


_FAMILIES = {
    "exponential": (Exponential, {"nu"}),
    "uniform": (Uniform, {"a", "b"}),
    "pareto": (Pareto, {"c", "beta"}),
    "correlated_pareto": (CorrelatedPareto, {"rho"}),
    "frechet_crowding": (FrechetCrowding, {"beta"}),
}


def parse_model(text: str) -> UtilityModel:
    """Parse strings such as ``"pareto:c=1,beta=2"``; omitted keys take defaults."""
    name, _, args = text.strip().partition(":")
    name = name.strip().lower()
    if name not in _FAMILIES:
        raise ValueError(f"unknown utility family {name!r}; choose from {sorted(_FAMILIES)}")
    cls, allowed = _FAMILIES[name]
    kwargs = {}
    for item in filter(None, (s.strip() for s in args.split(","))):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq or key not in allowed:
            raise ValueError(f"bad parameter {item!r} for {name}; allowed: {sorted(allowed)}")
        kwargs[key] = float(val)
    return cls(**kwargs)


# functional aliases

def alpha_of(model: UtilityModel) -> float:
    return model.alpha


def kappa_of(model: UtilityModel) -> float:
    return model.kappa


def m_asymptotic(model: UtilityModel, k: float) -> float:
    return model.m_asymptotic(k)


def sample_max(model: UtilityModel, k: int, rng: np.random.Generator) -> float:
    return model.sample_max(k, rng)


def cdf_max(model: UtilityModel, k: int, v: float) -> float:
    return model.cdf_max(k, v)


def m_exact(model: UtilityModel, k: int) -> float:
    """E[max of k i.i.d. utilities] = lower + int (1 - F^k) dv by quadrature."""
    if not model.iid:
        raise ValueError(f"m_exact supports i.i.d. families only, not {type(model).__name__}")
    k = int(k)
    if k < 1:
        raise ValueError("m_exact requires k >= 1")
    if isinstance(model, Uniform):
        lo, hi = model.a, model.b
        w = hi - lo
        val, _ = integrate.quad(lambda t: -math.expm1(k * math.log(t)) if t > 0 else 1.0,
                                0.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200)
        return lo + w * val
    if isinstance(model, Exponential):
        # in units of 1/nu; 1 - (1 - e^-t)^k, median of the max near ln k
        f = lambda t: -math.expm1(k * math.log1p(-math.exp(-t))) if t > 0 else 1.0
        pts = [0.0, max(1.0, math.log(k)), math.log(k) + 40.0]
        val = sum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
                  for a, b in zip(pts[:-1], pts[1:]))
        return val / model.nu
    # Pareto: substitute v = t / c, t >= 1, with 1 - F^k = -expm1(k log1p(-t^-beta))
    b = model.beta
    f = lambda t: -math.expm1(k * math.log1p(-t ** -b))
    scale = k ** (1.0 / b)
    pts = [1.0, 1.0 + scale, 1.0 + 100.0 * scale]
    val = sum(integrate.quad(f, a, c, epsabs=0.0, epsrel=1e-12, limit=400)[0]
              for a, c in zip(pts[:-1], pts[1:]))
    val += integrate.quad(f, pts[-1], math.inf, epsabs=0.0, epsrel=1e-12, limit=400)[0]
    return (1.0 + val) / model.c
