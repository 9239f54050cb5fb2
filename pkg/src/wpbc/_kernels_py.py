"""Pure numpy grid kernels; the fallback for the compiled ``_kernels`` module.

Both kernels take per-node tables already reduced to one entry per grid
choice (see ``wpbc.oracle``) and return ``(energy, index..., p0)`` of the
cheapest feasible combination, or ``energy = inf`` when none is feasible.
"""

from __future__ import annotations

import numpy as np


def _slot0_power(deficit, t_rem, h, gain, v):
    """Smallest slot-0 power whose harvest covers ``deficit`` within ``t_rem``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(deficit > 0, deficit / t_rem, 0.0)
        x = np.where(y * v < gain, y * v * v / (gain - y * v), np.inf)
    return x / h


@np.errstate(all="ignore")
def dynamic_kernel(net, tau, ptau, cross, h, gain, v, t_lim, p_max):
    """Search all per-node choice combinations for ``K <= 2`` nodes.

    ``net[k, m]`` is node k's own-slot consumption minus harvest (J) for
    choice ``m``, ``cross[k, m]`` the energy node k's slot delivers to the
    other node, ``ptau[k, m]`` the PB energy spent in the slot.
    """
    K, M = tau.shape
    best = (np.inf, -1, -1, 0.0)
    if K == 1:
        t_rem = t_lim - tau[0]
        p0 = _slot0_power(net[0], t_rem, h[0], gain, v)
        ok = np.isfinite(tau[0]) & (t_rem >= 0) & (p0 <= p_max)
        e = np.where(ok, ptau[0] + np.where(net[0] > 0, p0 * t_rem, 0.0), np.inf)
        m = int(np.argmin(e))
        if np.isfinite(e[m]):
            best = (float(e[m]), m, -1, float(p0[m]) if net[0, m] > 0 else 0.0)
        return best
    fin2 = np.isfinite(tau[1])
    for m1 in range(M):
        if not np.isfinite(tau[0, m1]):
            continue
        t_rem = t_lim - tau[0, m1] - tau[1]
        d1 = net[0, m1] - cross[1]
        d2 = net[1] - cross[0, m1]
        p0 = np.maximum(_slot0_power(d1, t_rem, h[0], gain, v), _slot0_power(d2, t_rem, h[1], gain, v))
        need = (d1 > 0) | (d2 > 0)
        ok = fin2 & (t_rem >= 0) & (p0 <= p_max)
        e = np.where(ok, ptau[0, m1] + ptau[1] + np.where(need, p0 * t_rem, 0.0), np.inf)
        m2 = int(np.argmin(e))
        if e[m2] < best[0]:
            best = (float(e[m2]), m1, m2, float(p0[m2]) if need[m2] else 0.0)
    return best


@np.errstate(all="ignore")
def static_kernel(net, tau, fz, P, t_lim):
    """Shared-power search: ``net``/``tau`` are ``(nP, K, nB)``, ``fz[i, k]`` is
    node k's harvest rate at the full power ``P[i]``."""
    nP, K, nB = tau.shape
    best = (np.inf, -1, -1, -1)
    for i in range(nP):
        if K == 1:
            t = tau[i, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                t0 = np.where(net[i, 0] > 0, net[i, 0] / fz[i, 0], 0.0)
            total = t0 + t
            ok = np.isfinite(total) & (total <= t_lim)
            e = np.where(ok, P[i] * total, np.inf)
            b = int(np.argmin(e))
            if e[b] < best[0]:
                best = (float(e[b]), i, b, -1)
            continue
        t1 = tau[i, 0][:, None]
        t2 = tau[i, 1][None, :]
        d1 = net[i, 0][:, None] - fz[i, 0] * t2
        d2 = net[i, 1][None, :] - fz[i, 1] * t1
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = np.maximum(np.where(d1 > 0, d1 / fz[i, 0], 0.0), np.where(d2 > 0, d2 / fz[i, 1], 0.0))
        total = t0 + t1 + t2
        ok = np.isfinite(total) & (total <= t_lim)
        e = np.where(ok, P[i] * total, np.inf)
        flat = int(np.argmin(e))
        b1, b2 = divmod(flat, nB)
        if e[b1, b2] < best[0]:
            best = (float(e[b1, b2]), i, b1, b2)
    return best
