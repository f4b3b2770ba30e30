"""Asymptotically optimal thresholds, predicted utility rates and bounds.

All rates are long-run utility per unit time in the n-th system.  Utility
thresholds are returned on the original utility scale, i.e. the fluid-scale
value times m(n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .specfun import ConvergenceError, gamma_fn, lower_incomplete_gamma
from .utility_models import Uniform, UtilityModel

__all__ = [
    "MarketParams",
    "ThresholdSolution",
    "bisect",
    "golden_max",
    "upper_bound_rate",
    "greedy_rate",
    "population_threshold",
    "utility_threshold_opt",
    "v_of_x",
    "utility_threshold_heuristic_exp",
    "utility_threshold_heuristic_uniform",
    "unbalanced_utility_threshold",
    "batch_window",
    "batch_rate_profile",
    "unbalanced_batch_window",
    "BATCH_LOWER_CONSTANT",
]

# lower bound on lim E[assignment value]/k^(alpha+1) for Pareto utilities
BATCH_LOWER_CONSTANT = (1.0 - 1.5 * math.exp(-0.5)) ** 2


@dataclass(frozen=True)
class MarketParams:
    lambda_b: float = 1.0
    lambda_s: float = 1.0
    eta_b: float = 1.0
    eta_s: float = 1.0
    n: int = 1000

    def __post_init__(self):
        # zero arrival rates are allowed (an empty market can be simulated);
        # the analytic solvers call require_positive()
        for name in ("lambda_b", "lambda_s"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be nonnegative and finite, got {v!r}")
        for name in ("eta_b", "eta_s"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")

    @classmethod
    def symmetric(cls, lam: float = 1.0, eta: float = 1.0, n: int = 1000) -> "MarketParams":
        return cls(lam, lam, eta, eta, n)

    @property
    def is_symmetric(self) -> bool:
        return self.lambda_b == self.lambda_s and self.eta_b == self.eta_s

    @property
    def lam(self) -> float:
        self._require_symmetric()
        return self.lambda_b

    @property
    def eta(self) -> float:
        self._require_symmetric()
        return self.eta_b

    @property
    def rho_b(self) -> float:
        return self.lambda_b / self.eta_b

    @property
    def rho_s(self) -> float:
        return self.lambda_s / self.eta_s

    def require_positive(self) -> "MarketParams":
        if min(self.lambda_b, self.lambda_s) <= 0:
            raise ValueError("degenerate market: arrival rates must be positive")
        return self

    def _require_symmetric(self):
        if not self.is_symmetric:
            raise ValueError("operation requires symmetric rates (lambda_b = lambda_s, eta_b = eta_s)")


@dataclass
class ThresholdSolution:
    threshold: float
    fluid_point: tuple[float, float]
    predicted_rate: float
    auxiliary: dict = field(default_factory=dict)


# root finding and maximization

def bisect(f, lo: float, hi: float, *, xtol: float = 1e-15, ftol: float = 1e-12,
           max_iter: int = 400) -> float:
    """Root of a continuous f with a sign change on [lo, hi].

    Stops when |f| <= ftol or the bracket is at floating resolution.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ConvergenceError(f"no sign change on [{lo}, {hi}]: f = {flo}, {fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= ftol or hi - lo <= xtol * max(1.0, abs(mid)):
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    raise ConvergenceError("bisection did not converge")


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo: float, hi: float, *, tol: float = 1e-10, max_iter: int = 500) -> float:
    """Maximizer of a unimodal f on [lo, hi] by golden-section search."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            return 0.5 * (a + b)
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    raise ConvergenceError("golden-section search did not converge")


def _require_frechet(model: UtilityModel, what: str) -> float:
    a = model.alpha
    if not 0.0 < a < 1.0:
        raise ValueError(f"{what} needs a heavy-tailed model with alpha in (0, 1); "
                         f"{model.spec_string()} has alpha = {a}")
    return a


# bounds and greedy

def upper_bound_rate(model: UtilityModel, params: MarketParams) -> float:
    """lambda n m(lambda n / eta): every agent matched at the best possible thickness."""
    params.require_positive()
    lam, eta, n = params.lam, params.eta, params.n
    return lam * n * model.m_asymptotic(lam * n / eta)


def greedy_rate(model: UtilityModel, params: MarketParams, corrected: bool = True) -> float:
    """Greedy utility rate from the diffusion approximation of |B - S|.

    With ``corrected`` the rate carries the finite-n factor 1 - 1/sqrt(2 pi n)
    for the fraction of agents that abandon.
    """
    params.require_positive()
    lam, eta, n = params.lam, params.eta, params.n
    k = max(1.0, (lam / eta) * math.sqrt(2.0 * n / math.pi))
    rate = n * lam * model.m_asymptotic(k)
    if corrected:
        rate *= 1.0 - 1.0 / math.sqrt(2.0 * math.pi * n)
    return rate


# population threshold

def population_threshold(model: UtilityModel, params: MarketParams,
                         delta: float | None = None) -> ThresholdSolution:
    """Asymptotically optimal population threshold and its predicted rate.

    Light tails (alpha = 0) use z_n = n / ln n, or n / m(n)^delta when
    ``delta`` is given.  Uniform utilities return the greedy policy.  Heavy
    tails use z_n = n z* with z* = lambda alpha / (eta (1 + alpha)).
    """
    params.require_positive()
    lam, eta, n = params.lam, params.eta, params.n
    alpha = model.alpha
    if alpha == 0.0:
        if isinstance(model, Uniform):
            g = greedy_rate(model, params)
            return ThresholdSolution(0.0, (0.0, 0.0), g, {
                "rule": "greedy", "limit_rate": greedy_rate(model, params, corrected=False)})
        if n < 3:
            raise ValueError("alpha = 0 population threshold needs n >= 3 (ln n > 1)")
        if delta is None:
            z = n / math.log(n)
        else:
            z = n / model.m_asymptotic(n) ** delta
        rate = lam * n * model.m_asymptotic(max(z, 1.0))
        return ThresholdSolution(z, (0.0, 0.0), rate, {
            "rule": "n/ln n" if delta is None else f"n/m(n)^{delta:g}", "limit_rate": rate})
    z_star = lam * alpha / (eta * (1.0 + alpha))
    z = n * z_star
    rate = lam * n * model.m_asymptotic(max(z, 1.0)) * (1.0 - eta * z_star / lam)
    return ThresholdSolution(z, (z_star, z_star), rate, {"z_star": z_star, "limit_rate": rate})


# symmetric utility threshold

def v_of_x(x: float, lam: float, eta: float, alpha: float, kappa: float) -> float:
    """Fluid-scale utility threshold whose stationary point is (x, x)."""
    y = math.log(2.0 * lam / (eta * x + lam))
    return (kappa * x / y) ** alpha


def utility_threshold_opt(model: UtilityModel, params: MarketParams) -> ThresholdSolution:
    """Optimal symmetric utility threshold for heavy-tailed utilities.

    x* solves x^(1-alpha) v(x) eta / (2 lambda alpha kappa^alpha) = G(y(x)),
    y(x) = ln(2 lambda / (eta x + lambda)), G(y) = gamma(1 - alpha, y).
    """
    params.require_positive()
    alpha = _require_frechet(model, "utility_threshold_opt")
    lam, eta, n = params.lam, params.eta, params.n
    kappa = model.kappa
    rho = lam / eta
    ka = kappa ** alpha

    def residual(x):
        y = math.log(2.0 * lam / (eta * x + lam))
        v = (kappa * x / y) ** alpha
        return x ** (1.0 - alpha) * v * eta / (2.0 * lam * alpha * ka) - lower_incomplete_gamma(1.0 - alpha, y)

    x_star = bisect(residual, rho * 1e-12, rho * (1.0 - 1e-12), ftol=1e-13)
    y = math.log(2.0 * lam / (eta * x_star + lam))
    v_scaled = (kappa * x_star / y) ** alpha
    mn = model.m_asymptotic(n)
    g = lower_incomplete_gamma(1.0 - alpha, y)
    rate = 2.0 * lam * n * mn * x_star ** alpha * ka * g
    return ThresholdSolution(v_scaled * mn, (x_star, x_star), rate, {
        "x_star": x_star,
        "v_scaled": v_scaled,
        "residual": residual(x_star),
        "m_n": mn,
        "limit_rate": rate,
    })


def utility_threshold_heuristic_exp(params: MarketParams, nu: float = 1.0) -> float:
    """Heuristic utility threshold for Exponential(nu) utilities."""
    params.require_positive()
    lam, eta, n = params.lam, params.eta, params.n
    if n < 3 or not nu > 0:
        raise ValueError("heuristic needs n >= 3 and nu > 0")
    ln = math.log(n)
    inner = 2.0 * lam * ln / (lam * ln + eta)
    if inner <= 1.0:
        raise ValueError(f"inner logarithm argument {inner:.6g} <= 1; heuristic undefined")
    return (ln - math.log(ln) - math.log(math.log(inner))) / nu


def utility_threshold_heuristic_uniform(params: MarketParams, a: float = 0.0, b: float = 1.0) -> float:
    """Heuristic utility threshold for Uniform(a, b) utilities."""
    params.require_positive()
    if not a < b:
        raise ValueError("need a < b")
    lam, eta, n = params.lam, params.eta, params.n
    base = 1.0 / math.sqrt(2.0 * n * math.pi) + 0.5
    return a + (b - a) * base ** ((eta / lam) * math.sqrt(math.pi / (2.0 * n)))


# unbalanced utility threshold

def _tau_of_s(s: float, b: float, params: MarketParams) -> float:
    lb, ls = params.lambda_b, params.lambda_s
    rhs = s * params.eta_s + lb
    f = lambda t: lb * math.exp(-s * t) + ls * math.exp(-b * t) - rhs
    hi = 1.0
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise ConvergenceError("tau(s) bracket expansion failed")
    return bisect(f, 0.0, hi, ftol=1e-13)


def unbalanced_utility_threshold(model: UtilityModel, params: MarketParams) -> ThresholdSolution:
    """Common optimal utility threshold for unequal arrival/abandonment rates.

    For each s, b(s) = (s eta_s + lambda_b - lambda_s) / eta_b and tau(s)
    solves lambda_b e^(-s tau) + lambda_s e^(-b tau) = s eta_s + lambda_b.
    The concave H(s) = lambda_s b^alpha G(b tau) + lambda_b s^alpha G(s tau)
    is maximized by golden section.
    """
    params.require_positive()
    alpha = _require_frechet(model, "unbalanced_utility_threshold")
    lb, ls, eb, es, n = params.lambda_b, params.lambda_s, params.eta_b, params.eta_s, params.n
    kappa = model.kappa
    G = lambda y: lower_incomplete_gamma(1.0 - alpha, y)
    b_of = lambda s: (s * es + lb - ls) / eb

    def H(s):
        b = b_of(s)
        tau = _tau_of_s(s, b, params)
        return ls * b ** alpha * G(b * tau) + lb * s ** alpha * G(s * tau)

    s_lo = max(0.0, (ls - lb) / es)
    s_hi = params.rho_s
    width = s_hi - s_lo
    s_star = golden_max(H, s_lo + 1e-12 * width, s_hi - 1e-12 * width, tol=1e-10)
    b_star = b_of(s_star)
    tau = _tau_of_s(s_star, b_star, params)
    mn = model.m_asymptotic(n)
    v_scaled = (kappa / tau) ** alpha
    bracket = lb * s_star ** alpha * G(s_star * tau) + ls * b_star ** alpha * G(b_star * tau)
    rate = n * mn * kappa ** alpha * bracket
    return ThresholdSolution(v_scaled * mn, (b_star, s_star), rate, {
        "s_star": s_star,
        "b_star": b_star,
        "tau_star": tau,
        "H_star": H(s_star),
        "v_scaled": v_scaled,
        "m_n": mn,
        "limit_rate": rate,
    })


# batch-and-match

def batch_rate_profile(delta: float, params: MarketParams, alpha: float, scale: float = 1.0) -> float:
    """Upper-bound utility rate of window ``delta`` (symmetric market).

    ``scale`` multiplies the utilities; it is 1/c for Pareto(c, beta).
    """
    lam, eta, n = params.lam, params.eta, params.n
    level = (lam / eta) * -math.expm1(-eta * delta)
    return scale * gamma_fn(1.0 - alpha) * level ** (alpha + 1.0) * n ** (alpha + 1.0) / delta


def batch_window(params: MarketParams, alpha: float, scale: float = 1.0) -> ThresholdSolution:
    """Asymptotically optimal batch window: root of e^(eta D) = (1 + alpha) eta D + 1."""
    params.require_positive()
    if not 0.0 < alpha < 1.0:
        raise ValueError("batch_window needs alpha in (0, 1)")
    lam, eta, n = params.lam, params.eta, params.n
    u = _batch_root(alpha)
    delta = u / eta
    level = (lam / eta) * -math.expm1(-u)
    bound = batch_rate_profile(delta, params, alpha, scale)
    return ThresholdSolution(delta, (level, level), bound, {
        "delta_star": delta,
        "matches_per_cycle": level * n,
        "upper_bound": bound,
        "lower_bound_constant": BATCH_LOWER_CONSTANT,
        "lower_bound": BATCH_LOWER_CONSTANT * scale * (level * n) ** (alpha + 1.0) / delta,
        "residual": math.expm1(u) - (1.0 + alpha) * u,
    })


def _batch_root(alpha: float) -> float:
    # u = eta D solves expm1(u) = (1 + alpha) u; negative below the root, positive above
    g = lambda u: math.expm1(u) - (1.0 + alpha) * u
    hi = 1.0
    while g(hi) <= 0.0:
        hi *= 2.0
    return bisect(g, 2.0 * alpha * 1e-6, hi, ftol=1e-14)


def unbalanced_batch_window(params: MarketParams, alpha: float, scale: float = 1.0) -> ThresholdSolution:
    """Batch window maximizing xi(D)^(alpha+1) / D, xi = min_i rho_i (1 - e^(-eta_i D)).

    On a stretch where side i is the binding constraint the objective has the
    balanced stationary point eta_i D = u*, so the maximizer is either such a
    point (if side i binds there) or a crossing of the two constraint curves.
    """
    params.require_positive()
    if not 0.0 < alpha < 1.0:
        raise ValueError("unbalanced_batch_window needs alpha in (0, 1)")
    n = params.n
    sides = ((params.rho_b, params.eta_b), (params.rho_s, params.eta_s))
    curve = lambda side, d: side[0] * -math.expm1(-side[1] * d)
    xi = lambda d: min(curve(sides[0], d), curve(sides[1], d))
    obj = lambda d: xi(d) ** (alpha + 1.0) / d

    u = _batch_root(alpha)
    candidates = []
    for i, side in enumerate(sides):
        d = u / side[1]
        if curve(side, d) <= curve(sides[1 - i], d):
            candidates.append(d)
    # curve crossings: scan a log grid for sign changes of the difference
    diff = lambda d: curve(sides[0], d) - curve(sides[1], d)
    eta_min = min(params.eta_b, params.eta_s)
    grid = [10.0 ** (k / 20.0) / eta_min for k in range(-120, 61)]
    for a, b in zip(grid[:-1], grid[1:]):
        if diff(a) == 0.0:
            candidates.append(a)
        elif (diff(a) > 0) != (diff(b) > 0):
            candidates.append(bisect(diff, a, b, ftol=0.0))
    delta = max(candidates, key=obj)
    level = xi(delta)
    bound = scale * gamma_fn(1.0 - alpha) * level ** (alpha + 1.0) * n ** (alpha + 1.0) / delta
    return ThresholdSolution(delta, (level, level), bound, {
        "delta_star": delta,
        "xi": level,
        "matches_per_cycle": level * n,
        "upper_bound": bound,
    })
