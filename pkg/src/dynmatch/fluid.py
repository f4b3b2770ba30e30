"""Fluid limits of the scaled populations (B/n, S/n) and their stationary points.

Every trajectory carries ``l_reflection``: the cumulative fluid mass matched
per side.  Under the population threshold policy it is the reflection
process that keeps both coordinates below z.

A threshold of ``math.inf`` means "never match"; it is handled by branching,
never by arithmetic on the infinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .analytics import MarketParams
from .specfun import lambert_w0, lambert_w0_log
from .utility_models import UtilityModel

__all__ = [
    "FluidTrajectory",
    "integrate_population_fluid",
    "integrate_utility_fluid",
    "integrate_unbalanced_fluid",
    "integrate_batch_fluid",
    "stationary_xbar",
    "stationary_point_unbalanced",
]


@dataclass
class FluidTrajectory:
    times: np.ndarray
    b_bar: np.ndarray
    s_bar: np.ndarray
    l_reflection: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def terminal(self) -> tuple[float, float]:
        return float(self.b_bar[-1]), float(self.s_bar[-1])

    def rows(self):
        return zip(self.times, self.b_bar, self.s_bar, self.l_reflection)


def _grid(t_end: float, dt: float) -> tuple[int, float]:
    if not (dt > 0 and t_end > 0):
        raise ValueError("need t_end > 0 and dt > 0")
    steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    return steps, t_end / steps


def integrate_population_fluid(z: float, lam: float, eta: float, b0: float, s0: float,
                               t_end: float, dt: float = 1e-3) -> FluidTrajectory:
    """Reflected fluid of the population threshold policy.

    Each step advances the unreflected M/M/inf flow exactly over dt, then
    pushes the state back below z.  The push dL = max(0, b - z, s - z) is
    removed from both sides (each fluid match takes one buyer and one seller)
    and accumulated into L.
    """
    if b0 < 0 or s0 < 0 or b0 > z or s0 > z:
        raise ValueError(f"initial state ({b0}, {s0}) must lie in [0, z] with z = {z}")
    steps, h = _grid(t_end, dt)
    decay = math.exp(-eta * h)
    rho = lam / eta
    b = np.empty(steps + 1)
    s = np.empty(steps + 1)
    l = np.empty(steps + 1)
    b[0], s[0], l[0] = b0, s0, 0.0
    bi, si, li = b0, s0, 0.0
    finite = math.isfinite(z)
    for i in range(1, steps + 1):
        bi = rho + (bi - rho) * decay
        si = rho + (si - rho) * decay
        if finite:
            push = max(0.0, bi - z, si - z)
            if push > 0.0:
                bi -= push
                si -= push
                li += push
        b[i], s[i], l[i] = bi, si, li
    times = np.linspace(0.0, steps * h, steps + 1)
    return FluidTrajectory(times, b, s, l, {"policy": "population", "z": z})


@numba.njit(cache=True)
def _utility_rhs(b, s, lb, ls, eb, es, ab, as_):
    # ab = kappa / v_b^(1/alpha) governs arriving sellers, as_ arriving buyers
    jb = math.exp(-as_ * s)  # arriving buyer finds no acceptable seller
    js = math.exp(-ab * b)
    db = lb * jb - eb * b - ls * (1.0 - js)
    ds = ls * js - es * s - lb * (1.0 - jb)
    dl = lb * (1.0 - jb) + ls * (1.0 - js)
    return db, ds, dl


@numba.njit(cache=True)
def _rk4(b0, s0, lb, ls, eb, es, ab, as_, h, steps, sub):
    # ``sub`` internal steps per output step keep stiff (small-v) systems stable
    out = np.empty((steps + 1, 3))
    b, s, l = b0, s0, 0.0
    out[0, 0], out[0, 1], out[0, 2] = b, s, l
    g = h / sub
    for i in range(1, steps + 1):
        for _ in range(sub):
            k1b, k1s, k1l = _utility_rhs(b, s, lb, ls, eb, es, ab, as_)
            k2b, k2s, k2l = _utility_rhs(b + 0.5 * g * k1b, s + 0.5 * g * k1s, lb, ls, eb, es, ab, as_)
            k3b, k3s, k3l = _utility_rhs(b + 0.5 * g * k2b, s + 0.5 * g * k2s, lb, ls, eb, es, ab, as_)
            k4b, k4s, k4l = _utility_rhs(b + g * k3b, s + g * k3s, lb, ls, eb, es, ab, as_)
            b += g * (k1b + 2.0 * k2b + 2.0 * k3b + k4b) / 6.0
            s += g * (k1s + 2.0 * k2s + 2.0 * k3s + k4s) / 6.0
            l += g * (k1l + 2.0 * k2l + 2.0 * k3l + k4l) / 6.0
        out[i, 0], out[i, 1], out[i, 2] = b, s, l
    return out


def _match_intensity(v: float, alpha: float, kappa: float) -> float:
    if v <= 0:
        raise ValueError("utility threshold must be positive")
    if math.isinf(v):
        return 0.0
    return kappa / v ** (1.0 / alpha)


def integrate_unbalanced_fluid(vb: float, vs: float, model: UtilityModel, params: MarketParams,
                               b0: float, s0: float, t_end: float, dt: float = 1e-3) -> FluidTrajectory:
    """RK4 integration of the utility-threshold fluid with separate side rates.

    ``vb`` is the fluid-scale threshold applied to arriving sellers (who look
    at the buyers) and ``vs`` the one applied to arriving buyers.
    """
    alpha = model.alpha
    if not 0.0 < alpha < 1.0:
        raise ValueError("utility fluid needs alpha in (0, 1)")
    kappa = model.kappa
    ab = _match_intensity(vb, alpha, kappa)
    as_ = _match_intensity(vs, alpha, kappa)
    steps, h = _grid(t_end, dt)
    # Jacobian spectral radius is at most eta + lambda_s ab + lambda_b as_;
    # RK4 is stable on the negative real axis up to about 2.78
    stiff = max(params.eta_b, params.eta_s) + params.lambda_s * ab + params.lambda_b * as_
    sub = max(1, int(math.ceil(h * stiff / 2.0)))
    out = _rk4(float(b0), float(s0), params.lambda_b, params.lambda_s, params.eta_b, params.eta_s,
               ab, as_, h, steps, sub)
    times = np.linspace(0.0, steps * h, steps + 1)
    return FluidTrajectory(times, out[:, 0], out[:, 1], out[:, 2],
                           {"policy": "utility", "vb": vb, "vs": vs})


def integrate_utility_fluid(v: float, model: UtilityModel, lam: float, eta: float, b0: float,
                            s0: float, t_end: float, dt: float = 1e-3) -> FluidTrajectory:
    """Symmetric utility-threshold fluid with fluid-scale threshold v."""
    params = MarketParams.symmetric(lam, eta, 1)
    return integrate_unbalanced_fluid(v, v, model, params, b0, s0, t_end, dt)


def stationary_xbar(v: float, lam: float, eta: float, alpha: float, kappa: float) -> float:
    """Symmetric stationary point x of the utility fluid at fluid-scale threshold v.

    Solves 0 = -eta x - lambda + 2 lambda exp(-q x), q = kappa / v^(1/alpha),
    in closed form through Lambert W.
    """
    if not v > 0:
        raise ValueError("v must be positive")
    if math.isinf(v):
        return lam / eta
    q = kappa / v ** (1.0 / alpha)
    c = q * lam / eta
    # W(2c e^c) / q - lambda / eta
    log_arg = math.log(2.0 * c) + c
    if log_arg > 690.0:
        w = lambert_w0_log(log_arg)
    else:
        w = lambert_w0(2.0 * c * math.exp(c))
    return w / q - lam / eta


def stationary_point_unbalanced(vb: float, vs: float, model: UtilityModel,
                                params: MarketParams) -> tuple[float, float]:
    """Stationary (b, s) of the unbalanced utility fluid.

    Uses b = (eta_s s + lambda_b - lambda_s) / eta_b and bisection in s on
    lambda_b e^(-a_s s) + lambda_s e^(-a_b b) = eta_s s + lambda_b.
    """
    from .analytics import bisect

    alpha, kappa = model.alpha, model.kappa
    ab = _match_intensity(vb, alpha, kappa)
    as_ = _match_intensity(vs, alpha, kappa)
    lb, ls, eb, es = params.lambda_b, params.lambda_s, params.eta_b, params.eta_s
    b_of = lambda s: (es * s + lb - ls) / eb
    f = lambda s: lb * math.exp(-as_ * s) + ls * math.exp(-ab * b_of(s)) - es * s - lb
    lo = max(0.0, (ls - lb) / es)
    hi = params.rho_s
    if f(hi) >= 0.0:
        return b_of(hi), hi
    s = bisect(f, lo, hi, ftol=1e-14)
    return b_of(s), s


def integrate_batch_fluid(params: MarketParams, delta: float, cycles: int,
                          b0: float = 0.0, s0: float = 0.0, points_per_cycle: int = 50) -> FluidTrajectory:
    """Batch-and-match fluid: exact M/M/inf growth within a cycle, min(B, S) removed at each boundary.

    Samples are post-match at the boundaries; ``meta["pre_match"]`` holds the
    matched mass min(B, S) of each cycle.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if cycles < 1:
        raise ValueError("need at least one cycle")
    rb, rs = params.rho_b, params.rho_s
    tau = np.linspace(0.0, delta, points_per_cycle + 1)[1:]
    decay_b = np.exp(-params.eta_b * tau)
    decay_s = np.exp(-params.eta_s * tau)
    times, bs, ss, ls = [0.0], [b0], [s0], [0.0]
    pre = []
    b, s, l = b0, s0, 0.0
    for k in range(cycles):
        bpath = rb + (b - rb) * decay_b
        spath = rs + (s - rs) * decay_s
        m = min(bpath[-1], spath[-1])
        pre.append(m)
        b, s, l = bpath[-1] - m, spath[-1] - m, l + m
        bpath[-1], spath[-1] = b, s
        times.extend(k * delta + tau)
        bs.extend(bpath)
        ss.extend(spath)
        ls.extend([ls[-1]] * (points_per_cycle - 1) + [l])
    return FluidTrajectory(np.array(times), np.array(bs), np.array(ss), np.array(ls),
                           {"policy": "batch", "delta": delta, "pre_match": np.array(pre)})
