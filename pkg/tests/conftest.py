"""Shared test oracles: dense linear solves of the implicit feedback systems.

These deliberately re-derive the controlled updates from their implicit
definitions (control expressed through the post-interaction state) so the
closed-form implementations are checked against an independent route.
"""

import numpy as np

from kinopt.micro import _interaction_drift


def implicit_pair_oracle(w, v, rule):
    """Solve the implicit two-agent system (w', v', u) exactly.

    w' = w + (dt/2) P(w,v) (v-w) + dt*u
    v' = v + (dt/2) P(v,w) (w-v) + dt*u
    u  = -(dt/(2 nu)) ((w'-w_d) + (v'-w_d))
    with dt = 2*alpha.
    """
    dt, nu, wd = 2.0 * rule.alpha, rule.nu, rule.w_d
    pwv = float(rule.P(w, v))
    pvw = float(rule.P(v, w))
    A = np.array([
        [1.0, 0.0, -dt],
        [0.0, 1.0, -dt],
        [dt / (2 * nu), dt / (2 * nu), 1.0],
    ])
    b = np.array([
        w + 0.5 * dt * pwv * (v - w),
        v + 0.5 * dt * pvw * (w - v),
        dt / nu * wd,
    ])
    wp, vp, u = np.linalg.solve(A, b)
    return wp, vp, u


def implicit_micro_oracle(w, dt, P, nu, w_d):
    """Solve the implicit N-agent system for (w'_1..w'_N, u); returns u.

    w'_i = w_i + (dt/N) sum_j P_ij (w_j - w_i) + dt*u
    u    = -(dt/(nu N)) sum_j (w'_j - w_d)
    """
    n = w.size
    A = np.zeros((n + 1, n + 1))
    b = np.zeros(n + 1)
    drift = _interaction_drift(w, P)
    for i in range(n):
        A[i, i] = 1.0
        A[i, n] = -dt
        b[i] = w[i] + dt * drift[i]
    A[n, :n] = dt / (nu * n)
    A[n, n] = 1.0
    b[n] = dt / nu * w_d
    return float(np.linalg.solve(A, b)[n])
