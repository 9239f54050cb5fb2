"""Brute-force grid search for tiny instances (K <= 2).

The search never touches the LP or the convex solvers. Slot lengths are not
gridded: with the other variables fixed, the cheapest feasible choice makes
every throughput constraint tight, so ``tau_k = R_k / rate_k``. In dynamic
mode the slot-0 power is eliminated as well: ``P0 * tau0`` grows with ``P0``
(``f(x)/x`` is decreasing), so slot 0 uses the smallest power that covers
every node's energy deficit within the time left. Dynamic mode then grids
``(P_k, beta_k)`` per node and static mode grids ``(P, beta_1..beta_K)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import (
    Allocation,
    NetworkInstance,
    Tolerances,
    check_feasibility,
    harvested_power,
    pb_energy,
)

GRID_SLACK = 1e-3  # relative time slack so tight constraints keep grid points
SHRINK = 4.0


@dataclass
class OracleResult:
    allocation: Allocation
    energy: float
    feasible: bool
    mode: str
    resolution: int
    evaluations: int

    def __iter__(self):
        return iter((self.allocation, self.energy))


def _axis(lo, hi, n):
    return np.linspace(lo, hi, n)


def _refine(center, lo, hi, width):
    half = width / (2.0 * SHRINK)
    a = max(lo, center - half)
    b = min(hi, center + half)
    return a, b


def _slot_tables(inst, k, P, B):
    """Per-choice tables for node k over the outer product of ``P`` and ``B``."""
    PP, BB = np.meshgrid(P, B, indexing="ij")
    PP, BB = PP.ravel(), BB.ravel()
    rate = inst.W * np.log2(1.0 + inst.snr_coeff[k] * PP * BB)
    R = inst.r_min[k]
    with np.errstate(divide="ignore"):
        tau = np.where(R > 0, R / rate, 0.0) if R > 0 else np.zeros_like(rate)
    bad = ~np.isfinite(tau)
    own = harvested_power(inst.h[k] * PP * (1.0 - BB), inst.eh)
    with np.errstate(invalid="ignore"):
        net = np.where(bad, np.inf, (inst.p_c[k] - own) * tau)
        ptau = np.where(bad, np.inf, PP * tau)
    other = 1 - k if inst.K == 2 else k
    with np.errstate(invalid="ignore"):
        cross = np.where(bad, 0.0, harvested_power(inst.h[other] * PP, inst.eh) * tau)
    return PP, BB, tau, net, ptau, cross


def _dynamic_pass(inst, boxes, n, t_lim):
    K = inst.K
    tabs = [_slot_tables(inst, k, _axis(*boxes[k][0], n), _axis(*boxes[k][1], n)) for k in range(K)]
    stack = lambda i: np.ascontiguousarray(np.vstack([t[i] for t in tabs]), dtype=float)
    energy, m1, m2, p0 = kernels.dynamic_kernel(stack(3), stack(2), stack(4), stack(5),
                                                np.ascontiguousarray(inst.h, dtype=float),
                                                inst.eh.gain, inst.eh.v, t_lim, inst.p_max)
    if not np.isfinite(energy):
        return None
    picks = [m1, m2][:K]
    P = np.array([tabs[k][0][m] for k, m in enumerate(picks)])
    B = np.array([tabs[k][1][m] for k, m in enumerate(picks)])
    tau = np.array([tabs[k][2][m] for k, m in enumerate(picks)])
    t_rem = t_lim - tau.sum()
    tau0 = t_rem if p0 > 0 else 0.0
    return energy, P, B, tau, p0, tau0


def _static_pass(inst, pbox, bboxes, n, t_lim):
    K = inst.K
    P = _axis(*pbox, n)
    B = np.vstack([_axis(*bboxes[k], n) for k in range(K)])
    rate = inst.W * np.log2(1.0 + inst.snr_coeff[None, :, None] * P[:, None, None] * B[None, :, :])
    R = inst.r_min[None, :, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.where(R > 0, R / rate, 0.0)
    tau = np.where(np.isnan(tau), np.inf, tau)
    own = harvested_power(inst.h[None, :, None] * P[:, None, None] * (1.0 - B[None, :, :]), inst.eh)
    with np.errstate(invalid="ignore"):
        net = np.where(np.isfinite(tau), (inst.p_c[None, :, None] - own) * tau, np.inf)
    fz = harvested_power(inst.h[None, :] * P[:, None], inst.eh)
    energy, i, b1, b2 = kernels.static_kernel(np.ascontiguousarray(net), np.ascontiguousarray(tau),
                                              np.ascontiguousarray(fz), P, t_lim)
    if not np.isfinite(energy):
        return None
    idx = [b1, b2][:K]
    beta = np.array([B[k, j] for k, j in enumerate(idx)])
    tk = np.array([tau[i, k, j] for k, j in enumerate(idx)])
    tau0 = energy / P[i] - tk.sum() if P[i] > 0 else 0.0
    return energy, P[i], beta, tk, max(tau0, 0.0)


def _finish(inst, tau0, tau, beta, p0, p, mode, n, evals):
    used = tau > 0
    alloc = Allocation(tau0=float(tau0), tau=tau, beta=np.where(used, beta, 0.0),
                       p0=float(p0) if tau0 > 0 else 0.0, p=np.where(used, p, 0.0))
    return OracleResult(alloc, pb_energy(alloc), True, mode, n, evals)


def grid_search(inst: NetworkInstance, resolution: int = 64, mode: str = "dynamic", refine: bool = True) -> OracleResult:
    if inst.K > 2:
        raise ValueError("grid_search supports K <= 2")
    if resolution < 16:
        raise ValueError("resolution must be >= 16")
    if mode not in ("dynamic", "static"):
        raise ValueError(f"unknown mode {mode!r}")
    K, n = inst.K, int(resolution)
    t_lim = inst.T * (1.0 + GRID_SLACK)
    pmax = inst.p_max
    passes = 2 if refine else 1
    best = None
    if mode == "dynamic":
        boxes = [((0.0, pmax), (0.0, 1.0)) for _ in range(K)]
        evals = 0
        for _ in range(passes):
            out = _dynamic_pass(inst, boxes, n, t_lim)
            evals += n ** (2 * K)
            if out is not None and (best is None or out[0] < best[0]):
                best = out
            if best is None:
                break
            _, P, B, _, _, _ = best
            boxes = [(_refine(P[k], 0.0, pmax, boxes[k][0][1] - boxes[k][0][0]),
                      _refine(B[k], 0.0, 1.0, boxes[k][1][1] - boxes[k][1][0])) for k in range(K)]
        if best is None:
            return OracleResult(Allocation.zeros(K), 0.0, False, mode, n, evals)
        _, P, B, tau, p0, tau0 = best
        return _finish(inst, tau0, tau, B, p0, P, mode, n, evals)

    pbox = (0.0, pmax)
    bboxes = [(0.0, 1.0)] * K
    evals = 0
    for _ in range(passes):
        out = _static_pass(inst, pbox, bboxes, n, t_lim)
        evals += n ** (K + 1)
        if out is not None and (best is None or out[0] < best[0]):
            best = out
        if best is None:
            break
        _, P, beta, _, _ = best
        pbox = _refine(P, 0.0, pmax, pbox[1] - pbox[0])
        bboxes = [_refine(beta[k], 0.0, 1.0, bboxes[k][1] - bboxes[k][0]) for k in range(K)]
    if best is None:
        return OracleResult(Allocation.zeros(K), 0.0, False, mode, n, evals)
    _, P, beta, tau, tau0 = best
    tau0 = tau0 if tau0 > 0 else 0.0
    alloc = Allocation.static(tau0, tau, np.where(tau > 0, beta, 0.0), P)
    return OracleResult(alloc, pb_energy(alloc), True, mode, n, evals)


def grid_tolerances() -> Tolerances:
    """Feasibility tolerances matching the grid's relaxed time budget."""
    return Tolerances(time_rel=GRID_SLACK * (1.0 + 1e-9))


def verify(result: OracleResult, inst: NetworkInstance):
    return check_feasibility(result.allocation, inst, grid_tolerances())
