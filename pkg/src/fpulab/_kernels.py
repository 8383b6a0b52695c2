"""Compiled inner loops for force evaluation and splitting steps.

Arrays are ``(batch, M)``.  Each row is an independent trajectory; rows that
leave the finite region are frozen and flagged instead of aborting the batch.
"""

import numpy as np
from numba import njit

MODEL_FPU = 0
MODEL_TODA = 1

BLOWUP_LIMIT = 1e8
EXP_LIMIT = 700.0


@njit(cache=True, nogil=True)
def _dpot(r, model, A):
    if model == MODEL_FPU:
        return r + 0.5 * r * r + A * r * r * r / 6.0
    return np.exp(r)


@njit(cache=True, nogil=True)
def accel_row(q, out, model, periodic, A):
    """Forces on one chain; returns False if a Toda bond overflows the exp guard."""
    M = q.shape[0]
    if periodic:
        r_prev = q[M - 1] - q[0]
        if model == MODEL_TODA and abs(r_prev) > EXP_LIMIT:
            return False
        f_prev = _dpot(r_prev, model, A)
        f_last = f_prev
        for j in range(M):
            if j < M - 1:
                r = q[j] - q[j + 1]
                if model == MODEL_TODA and abs(r) > EXP_LIMIT:
                    return False
                f = _dpot(r, model, A)
            else:
                f = f_last
            out[j] = f_prev - f
            f_prev = f
    else:
        r_prev = -q[0]
        if model == MODEL_TODA and abs(r_prev) > EXP_LIMIT:
            return False
        f_prev = _dpot(r_prev, model, A)
        for j in range(M):
            r = q[j] - q[j + 1] if j < M - 1 else q[j]
            if model == MODEL_TODA and abs(r) > EXP_LIMIT:
                return False
            f = _dpot(r, model, A)
            out[j] = f_prev - f
            f_prev = f
    return True


@njit(cache=True, nogil=True)
def _finite_row(q, p):
    for j in range(q.shape[0]):
        a = q[j]
        b = p[j]
        if not (abs(a) <= BLOWUP_LIMIT and abs(b) <= BLOWUP_LIMIT):
            return False
    return True


@njit(cache=True, nogil=True)
def advance(q, p, dt, n_steps, coeffs, model, periodic, A, alive, fail_step):
    """Apply ``n_steps`` composed velocity-Verlet steps in place.

    ``coeffs`` are the sub-step weights (``[1]`` for Verlet, Yoshida triple for
    4th order).  Rows with ``alive[b] == False`` are skipped; a row that blows up
    records the step index in ``fail_step[b]`` and is frozen.
    """
    B, M = q.shape
    force = np.empty(M)
    for b in range(B):
        if not alive[b]:
            continue
        qb = q[b]
        pb = p[b]
        if not accel_row(qb, force, model, periodic, A):
            alive[b] = False
            fail_step[b] = 0
            continue
        for s in range(n_steps):
            ok = True
            for c in coeffs:
                h = c * dt
                for j in range(M):
                    pb[j] += 0.5 * h * force[j]
                for j in range(M):
                    qb[j] += h * pb[j]
                if not accel_row(qb, force, model, periodic, A):
                    ok = False
                    break
                for j in range(M):
                    pb[j] += 0.5 * h * force[j]
            if not ok or not _finite_row(qb, pb):
                alive[b] = False
                fail_step[b] = s + 1
                break
    return 0
