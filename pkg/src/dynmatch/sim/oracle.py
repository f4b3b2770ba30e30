"""Exact stationary analysis of the population-threshold chain for small n."""
from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from ..analytics import MarketParams
from ..utility_models import UtilityModel, m_exact

__all__ = ["exact_ctmc_oracle", "TruncationError"]


class TruncationError(RuntimeError):
    """Stationary mass on the truncation boundary is not negligible."""


def exact_ctmc_oracle(model: UtilityModel, params: MarketParams, policy, state_cap: int,
                      tol: float = 1e-8) -> tuple[np.ndarray, float]:
    """Stationary law of (B, S) on {0..cap}^2 and the exact utility rate.

    ``policy`` is a PopulationThreshold (or Greedy).  Transitions leaving
    the box are dropped; if the stationary mass on its outer edge exceeds
    ``tol`` a :class:`TruncationError` is raised.  Returns ``(pi, rate)``
    with ``pi[b, s]``.
    """
    z = float(getattr(policy, "z", 0.0))
    zmin = max(z, 1.0)
    cap = int(state_cap)
    n = params.n
    ab, as_ = n * params.lambda_b, n * params.lambda_s
    size = (cap + 1) ** 2
    idx = lambda b, s: b * (cap + 1) + s
    rows, cols, vals = [], [], []

    def add(i, j, rate):
        if rate > 0:
            rows.append(i)
            cols.append(j)
            vals.append(rate)

    for b in range(cap + 1):
        for s in range(cap + 1):
            i = idx(b, s)
            # buyer arrival
            if s >= zmin:
                add(i, idx(b, s - 1), ab)
            elif b < cap:
                add(i, idx(b + 1, s), ab)
            # seller arrival
            if b >= zmin:
                add(i, idx(b - 1, s), as_)
            elif s < cap:
                add(i, idx(b, s + 1), as_)
            if b > 0:
                add(i, idx(b - 1, s), params.eta_b * b)
            if s > 0:
                add(i, idx(b, s - 1), params.eta_s * s)
    Q = sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))
    Q = Q - sparse.diags(np.asarray(Q.sum(axis=1)).ravel())
    # pi Q = 0 with sum(pi) = 1: replace one balance equation by normalization
    A = Q.T.tolil()
    A[0, :] = np.ones(size)
    rhs = np.zeros(size)
    rhs[0] = 1.0
    pi = spsolve(A.tocsc(), rhs)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    pi = pi.reshape(cap + 1, cap + 1)
    edge = pi[cap, :].sum() + pi[:, cap].sum()
    if edge > tol:
        raise TruncationError(f"boundary mass {edge:.3g} exceeds {tol:g}; raise state_cap")
    k = np.arange(cap + 1)
    m = np.array([m_exact(model, j) if j >= 1 else 0.0 for j in k])
    gate = (k >= zmin).astype(float)
    # buyers arriving see S sellers, sellers arriving see B buyers
    rate = ab * float(pi.sum(axis=0) @ (gate * m)) + as_ * float(pi.sum(axis=1) @ (gate * m))
    return pi, rate
