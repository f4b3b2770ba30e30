"""Special functions used by the analytic and fluid code.

Gamma and erf wrap the C library through :mod:`math`.  The lower incomplete
gamma function and the principal branch of Lambert W are implemented here.
"""
from __future__ import annotations

import math

__all__ = [
    "ConvergenceError",
    "gamma_fn",
    "lower_incomplete_gamma",
    "erf",
    "lambert_w0",
    "lambert_w0_log",
    "EULER_GAMMA",
]

EULER_GAMMA = 0.57721566490153286061

_EPS = 1e-16
_MAX_ITER = 500
_W_MAX_ITER = 50
_INV_E = math.exp(-1.0)


class ConvergenceError(ArithmeticError):
    """An iterative routine failed to reach its tolerance."""


def gamma_fn(x: float) -> float:
    """Gamma function for x > 0."""
    if not x > 0:
        raise ValueError(f"gamma_fn requires x > 0, got {x!r}")
    return math.gamma(x)


def _gamma_series(a: float, x: float) -> float:
    # sum_{n>=0} x^n / (a (a+1) ... (a+n)), then scale by x^a e^-x
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x))
    raise ConvergenceError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_upper_cf(a: float, x: float) -> float:
    # modified Lentz on the continued fraction of Gamma(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x)) * h
    raise ConvergenceError(f"incomplete gamma fraction did not converge (a={a}, x={x})")


def lower_incomplete_gamma(a: float, x: float) -> float:
    """gamma(a, x) = int_0^x t^(a-1) e^-t dt, unregularized.

    Uses the power series when x < a + 1 and the continued fraction for the
    upper function otherwise.  ``x = inf`` returns Gamma(a).
    """
    if not a > 0:
        raise ValueError(f"lower_incomplete_gamma requires a > 0, got {a!r}")
    if x < 0 or math.isnan(x):
        raise ValueError(f"lower_incomplete_gamma requires x >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.gamma(a)
    if x < a + 1.0:
        return _gamma_series(a, x)
    return math.gamma(a) - _gamma_upper_cf(a, x)


def erf(x: float) -> float:
    """Error function."""
    return math.erf(x)


def _w0_initial(x: float) -> float:
    if x < -0.32:
        # expansion about the branch point -1/e
        p = math.sqrt(max(0.0, 2.0 * (math.e * x + 1.0)))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    if x < 3.0:
        return math.log1p(x) * (1.0 - math.log1p(math.log1p(x)) / (2.0 + math.log1p(x)))
    l1 = math.log(x)
    l2 = math.log(l1)
    return l1 - l2 + l2 / l1


def lambert_w0(x: float) -> float:
    """Principal branch W0 of the Lambert W function, real x >= -1/e.

    Halley iteration from an asymptotic starting guess.  Raises
    :class:`ConvergenceError` after 50 iterations without convergence.
    """
    if math.isnan(x) or x < -_INV_E:
        # tolerate the rounding of -1/e itself
        if not (x >= -_INV_E - 1e-15):
            raise ValueError(f"lambert_w0 requires x >= -1/e, got {x!r}")
        x = -_INV_E
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x <= -_INV_E:
        return -1.0
    if x > 1e300:
        return lambert_w0_log(math.log(x))
    w = _w0_initial(x)
    for _ in range(_W_MAX_ITER):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0 or abs(f) <= 2 * _EPS * max(1e-3, abs(x)):
            # near the branch point the step is noise once f is at rounding level
            return w
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= 4 * _EPS * (1.0 + abs(w)):
            return w
    raise ConvergenceError(f"lambert_w0 did not converge for x={x!r}")


def lambert_w0_log(log_x: float) -> float:
    """W0(exp(log_x)) for arguments too large to form directly.

    Solves w + ln w = log_x by Newton's method; valid for log_x > 1.
    """
    if log_x <= 1.0:
        return lambert_w0(math.exp(log_x))
    w = log_x - math.log(log_x)
    for _ in range(_W_MAX_ITER):
        f = w + math.log(w) - log_x
        step = f / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 4 * _EPS * (1.0 + abs(w)):
            return w
    raise ConvergenceError(f"lambert_w0_log did not converge for log_x={log_x!r}")
