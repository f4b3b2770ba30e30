"""Compiled event loop of the n-th market.

Scheduling is next-reaction style: arrivals of each side run on their own
exponential streams, and each abandonment channel is a unit-rate Poisson
process run on its own internal clock T_i = int eta_i X_i(t) dt.  This is
exact in distribution and keeps every channel on a private stream, so the
same seed drives aligned paths under different thresholds.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from ..utility_models import max_from_uniforms

# policy codes
POP, UTIL, BATCH = 0, 1, 2

# float state slots
F_T, F_TDB, F_PDB, F_TDS, F_PDS, F_NAB, F_NAS, F_UTIL, F_AREA_B, F_AREA_S, F_PROBE = range(11)
N_FSTATE = 11
# integer state slots; *_PW counters start at warmup
(I_B, I_S, I_MATCH, I_ABN_B, I_ABN_S, I_ARR_B, I_ARR_S,
 I_MATCH_PW, I_ABN_B_PW, I_ABN_S_PW, I_ARR_B_PW, I_ARR_S_PW) = range(12)
N_ISTATE = 12


@numba.njit(cache=True, nogil=True)
def advance(fs, ist, t_stop, warmup, policy, z, v_b, v_s, probe,
            kind, p0, p1, p2, arr_b, arr_s, eta_b, eta_s,
            g_arr_b, g_arr_s, g_abn_b, g_abn_s, g_util_b, g_util_s):
    """Run events with epochs < t_stop, then move the clock to t_stop.

    ``arr_b``/``arr_s`` are the total arrival rates n lambda.  ``probe`` is a
    buyer level whose post-warmup time fraction B >= probe is accumulated.
    """
    t = fs[F_T]
    B = ist[I_B]
    S = ist[I_S]
    zmin = max(z, 1.0)
    while True:
        # candidate epochs
        t_next = t_stop
        which = -1
        if fs[F_NAB] < t_next:
            t_next = fs[F_NAB]
            which = 0
        if fs[F_NAS] < t_next:
            t_next = fs[F_NAS]
            which = 1
        if B > 0:
            tb = t + (fs[F_PDB] - fs[F_TDB]) / (eta_b * B)
            if tb < t_next:
                t_next = tb
                which = 2
        if S > 0:
            ts = t + (fs[F_PDS] - fs[F_TDS]) / (eta_s * S)
            if ts < t_next:
                t_next = ts
                which = 3
        # integrate clocks and post-warmup areas over [t, t_next]
        dt = t_next - t
        fs[F_TDB] += eta_b * B * dt
        fs[F_TDS] += eta_s * S * dt
        if t_next > warmup:
            w = t_next - max(t, warmup)
            fs[F_AREA_B] += B * w
            fs[F_AREA_S] += S * w
            if B >= probe:
                fs[F_PROBE] += w
        t = t_next
        if which < 0:
            break
        post = t > warmup
        if which == 0 or which == 1:
            buyer = which == 0
            if buyer:
                u1 = g_util_b.random()
                u2 = g_util_b.random()
                fs[F_NAB] = t + g_arr_b.standard_exponential() / arr_b
                ist[I_ARR_B] += 1
                if post:
                    ist[I_ARR_B_PW] += 1
                k = S
                thr = v_s
            else:
                u1 = g_util_s.random()
                u2 = g_util_s.random()
                fs[F_NAS] = t + g_arr_s.standard_exponential() / arr_s
                ist[I_ARR_S] += 1
                if post:
                    ist[I_ARR_S_PW] += 1
                k = B
                thr = v_b
            matched = False
            value = 0.0
            if policy == POP:
                if k >= zmin:
                    matched = True
                    value = max_from_uniforms(kind, p0, p1, p2, k, u1, u2)
            elif policy == UTIL:
                if k >= 1:
                    value = max_from_uniforms(kind, p0, p1, p2, k, u1, u2)
                    matched = value > thr
            if matched:
                ist[I_MATCH] += 1
                if post:
                    ist[I_MATCH_PW] += 1
                    fs[F_UTIL] += value
                if buyer:
                    S -= 1
                else:
                    B -= 1
            elif buyer:
                B += 1
            else:
                S += 1
        elif which == 2:
            fs[F_TDB] = fs[F_PDB]
            fs[F_PDB] += g_abn_b.standard_exponential()
            B -= 1
            ist[I_ABN_B] += 1
            if post:
                ist[I_ABN_B_PW] += 1
        else:
            fs[F_TDS] = fs[F_PDS]
            fs[F_PDS] += g_abn_s.standard_exponential()
            S -= 1
            ist[I_ABN_S] += 1
            if post:
                ist[I_ABN_S_PW] += 1
    fs[F_T] = t
    ist[I_B] = B
    ist[I_S] = S
