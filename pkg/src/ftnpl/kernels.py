"""Compiled inner loops for the long-horizon baselines.

Each kernel is plain numpy-compatible Python decorated with :func:`njit`,
so ``kernel.py_func`` is always the uncompiled reference and the
``FTNPL_NO_NUMBA`` switch swaps the whole module back to Python.
Randomness is drawn by the caller and passed in, which keeps both paths
on the same sample stream.
"""
from __future__ import annotations

import numpy as np

from ._jit import njit

__all__ = [
    "replicator_rk4_bimatrix",
    "mw_selfplay",
    "ftrl_pennies_run",
    "ftpl_pennies_run",
    "pgd_box_linear",
]

# Largest simplex violation tolerated before renormalization.
SIMPLEX_TOL = 1e-6

# Geometric step decay of the box-constrained inner solver. The steps sum
# to 10 * bound, enough to cross the box, and the last of 50 is ~1e-4 *
# bound, so the solver settles on kinks of piecewise-linear objectives.
PGD_DECAY = 0.8


@njit(cache=True)
def _replicator_field(mp, md, pay_pi, pay_d, out_p, out_d):
    n, m = mp.shape[0], md.shape[0]
    up = np.zeros(n)
    ud = np.zeros(m)
    for a in range(n):
        for b in range(m):
            up[a] += pay_pi[a, b] * md[b]
            ud[b] += pay_d[a, b] * mp[a]
    avg_p = 0.0
    for a in range(n):
        avg_p += mp[a] * up[a]
    avg_d = 0.0
    for b in range(m):
        avg_d += md[b] * ud[b]
    for a in range(n):
        out_p[a] = mp[a] * (up[a] - avg_p)
    for b in range(m):
        out_d[b] = md[b] * (ud[b] - avg_d)


@njit(cache=True)
def replicator_rk4_bimatrix(pay_pi, pay_d, mu_pi0, mu_d0, h, n_steps):
    """RK4 integration of two-population replicator dynamics.

    Returns ``(traj_pi, traj_d, drift, status)``. ``drift[t]`` is the
    largest ``|sum(mu) - 1|`` over both players before the renormalization
    of step ``t``. ``status`` is the index of the first step that left the
    simplex by more than ``SIMPLEX_TOL`` or -1 if none did; trajectories
    are filled up to that point.
    """
    n, m = mu_pi0.shape[0], mu_d0.shape[0]
    tp = np.empty((n_steps + 1, n))
    td = np.empty((n_steps + 1, m))
    drift = np.zeros(n_steps)
    tp[0] = mu_pi0
    td[0] = mu_d0
    k1p, k2p, k3p, k4p = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
    k1d, k2d, k3d, k4d = np.empty(m), np.empty(m), np.empty(m), np.empty(m)
    p = mu_pi0.copy()
    d = mu_d0.copy()
    for t in range(n_steps):
        _replicator_field(p, d, pay_pi, pay_d, k1p, k1d)
        _replicator_field(p + 0.5 * h * k1p, d + 0.5 * h * k1d, pay_pi, pay_d, k2p, k2d)
        _replicator_field(p + 0.5 * h * k2p, d + 0.5 * h * k2d, pay_pi, pay_d, k3p, k3d)
        _replicator_field(p + h * k3p, d + h * k3d, pay_pi, pay_d, k4p, k4d)
        p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        d = d + (h / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)
        sp = p.sum()
        sd = d.sum()
        dr = max(abs(sp - 1.0), abs(sd - 1.0))
        drift[t] = dr
        if dr > SIMPLEX_TOL or p.min() < -SIMPLEX_TOL or d.min() < -SIMPLEX_TOL:
            return tp[: t + 1], td[: t + 1], drift[: t + 1], t
        p = p / sp
        d = d / sd
        tp[t + 1] = p
        td[t + 1] = d
    return tp, td, drift, -1


@njit(cache=True)
def mw_selfplay(loss_pi, loss_d, mu_pi0, mu_d0, eta, n_steps):
    """Simultaneous multiplicative-weights self-play on a bimatrix game.

    ``loss_pi[a, b]`` / ``loss_d[a, b]`` are the losses of each player when
    the agent plays ``a`` and the discriminator ``b``. Plays are mixed
    strategies and losses are expected losses.

    Returns ``(traj_pi, traj_d, regret_pi, regret_d)`` where ``regret_x[t]``
    is the external regret after ``t + 1`` rounds. A non-positive weight
    sum is reported by returning NaN regrets from that round on.
    """
    n, m = mu_pi0.shape[0], mu_d0.shape[0]
    tp = np.empty((n_steps + 1, n))
    td = np.empty((n_steps + 1, m))
    rp = np.full(n_steps, np.nan)
    rd = np.full(n_steps, np.nan)
    tp[0] = mu_pi0
    td[0] = mu_d0
    p = mu_pi0.copy()
    d = mu_d0.copy()
    cum_p = np.zeros(n)
    cum_d = np.zeros(m)
    real_p = 0.0
    real_d = 0.0
    for t in range(n_steps):
        up = loss_pi @ d
        ud = loss_d.T @ p
        real_p += p @ up
        real_d += d @ ud
        cum_p += up
        cum_d += ud
        rp[t] = real_p - cum_p.min()
        rd[t] = real_d - cum_d.min()
        # shift by the minimum loss before exponentiating; cancels on normalizing
        wp = p * np.exp(-eta * (up - up.min()))
        wd = d * np.exp(-eta * (ud - ud.min()))
        sp = wp.sum()
        sd = wd.sum()
        if not (sp > 0.0 and sd > 0.0):
            rp[t] = np.nan
            rd[t] = np.nan
            return tp[: t + 1], td[: t + 1], rp, rd
        p = wp / sp
        d = wd / sd
        tp[t + 1] = p
        td[t + 1] = d
    return tp, td, rp, rd


@njit(cache=True)
def _soft_leader(y0, eta, pos, neg):
    # argmin_y (y - y0)^2 / (2 eta) + pos * max(y, 0) - neg * min(y, 0)
    if y0 - eta * pos > 0.0:
        return y0 - eta * pos
    if y0 + eta * neg < 0.0:
        return y0 + eta * neg
    return 0.0


@njit(cache=True)
def ftrl_pennies_run(A, phi0, om0, eta, n_steps, nonconvex):
    """Full-history l2-FTRL on continuous matching pennies.

    Both players update simultaneously. Linear histories (the agent in both
    variants, the discriminator in the zero-sum variant) use the closed
    form ``theta0 - eta * G``. The discriminator's hinge history in the
    non-convex variant uses the exact regularized leader, which is a soft
    threshold along the range direction of ``A`` (``A`` must be
    ``2 e e^T`` with ``e = (1, -1)/sqrt(2)``).

    Returns the ``(n_steps + 1, 4)`` trajectory of ``(phi, omega)``.
    """
    traj = np.empty((n_steps + 1, 4))
    phi = phi0.copy()
    om = om0.copy()
    traj[0, :2] = phi
    traj[0, 2:] = om
    g_phi = np.zeros(2)
    g_om = np.zeros(2)
    r2 = 1.0 / np.sqrt(2.0)
    y0 = (om0[0] - om0[1]) * r2
    rest0 = om0[0] - y0 * r2
    rest1 = om0[1] + y0 * r2
    pos = 0.0
    neg = 0.0
    for t in range(n_steps):
        g_phi += A @ om
        if nonconvex:
            alpha = 2.0 * (phi[0] - phi[1]) * r2
            if alpha < 0.0:
                pos -= alpha
            else:
                neg += alpha
            y = _soft_leader(y0, eta, pos, neg)
            new_om = np.empty(2)
            new_om[0] = rest0 + y * r2
            new_om[1] = rest1 - y * r2
        else:
            g_om -= A.T @ phi
            new_om = om0 - eta * g_om
        phi = phi0 - eta * g_phi
        om = new_om
        traj[t + 1, :2] = phi
        traj[t + 1, 2:] = om
    return traj


@njit(cache=True)
def pgd_box_linear(x, g, bound, m):
    """Projected descent on a linear objective ``g . x`` over ``[-bound, bound]^d``.

    Normalized steps of length ``2 * bound * PGD_DECAY**k``; stops early when
    ``g`` vanishes.
    """
    x = x.copy()
    gn = np.sqrt((g * g).sum())
    if gn == 0.0:
        return x
    for k in range(m):
        x = np.minimum(np.maximum(x - (2.0 * bound * PGD_DECAY**k) * g / gn, -bound), bound)
    return x


@njit(cache=True)
def ftpl_pennies_run(A, phi0, om0, noise_pi, noise_d, bound, m, nonconvex):
    """Follow-the-perturbed-leader on continuous matching pennies.

    Round ``t`` minimizes the cumulative history loss plus
    ``noise[t] . theta`` over the box with ``m`` projected descent steps,
    warm-started at the previous play. The discriminator's hinge history
    in the non-convex variant is piecewise linear along the range
    direction of ``A``; its gradient is recomputed at every inner step.
    """
    n_steps = noise_pi.shape[0]
    traj = np.empty((n_steps + 1, 4))
    phi = phi0.copy()
    om = om0.copy()
    traj[0, :2] = phi
    traj[0, 2:] = om
    sum_om = np.zeros(2)
    sum_phi = np.zeros(2)
    e = np.array([1.0, -1.0]) / np.sqrt(2.0)
    pos = 0.0
    neg = 0.0
    for t in range(n_steps):
        sum_om += om
        sum_phi += phi
        if nonconvex:
            alpha = 2.0 * (phi @ e)
            if alpha < 0.0:
                pos -= alpha
            else:
                neg += alpha
        new_phi = pgd_box_linear(phi, A @ sum_om + noise_pi[t], bound, m)
        if nonconvex:
            x = om.copy()
            for k in range(m):
                y = x @ e
                if y > 0.0:
                    g = pos * e + noise_d[t]
                elif y < 0.0:
                    g = -neg * e + noise_d[t]
                else:
                    g = noise_d[t].copy()
                gn = np.sqrt((g * g).sum())
                if gn == 0.0:
                    break
                x = np.minimum(np.maximum(x - (2.0 * bound * PGD_DECAY**k) * g / gn, -bound), bound)
            new_om = x
        else:
            new_om = pgd_box_linear(om, -(A.T @ sum_phi) + noise_d[t], bound, m)
        phi = new_phi
        om = new_om
        traj[t + 1, :2] = phi
        traj[t + 1, 2:] = om
    return traj
