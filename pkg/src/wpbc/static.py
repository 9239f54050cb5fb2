"""Static PB power scheme: one PB power for the whole block.

Block coordinate descent alternates two subproblems:

* time/reflection at fixed power, in the variables ``tau`` and
  ``L_k = beta_k tau_k``, solved by successive convex approximation of the
  own-slot harvest term;
* power at fixed time/reflection, a monotone one-dimensional problem.

The alternation stops as soon as every constraint is tight, which usually
happens after one round. Because of that, :func:`run_static` adds a search over
the shared power. That search uses :func:`min_block_time`, an exact evaluation
of the time subproblem. The final BCD pass restarts from the best power found.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .dynamic import _trivial, _zero_feasible, solve_time_allocation
from .model import (
    LN2,
    Allocation,
    NetworkInstance,
    SolveReport,
    check_feasibility,
    harvested_power,
    harvested_power_slope,
    pb_energy,
    sentinel_report,
)
from .solvers import SmoothConvexProgram, SolverOptions, bisect_decreasing, solve_smooth_convex

SCHEME = "static"


@dataclass
class StaticIterate:
    p: float
    tau0: float
    tau: np.ndarray
    L: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float).copy()
        self.L = np.asarray(self.L, dtype=float).copy()
        self.Y = np.asarray(self.Y, dtype=float).copy()

    @classmethod
    def start(cls, inst: NetworkInstance, p: float | None = None, y0: float = 0.5) -> "StaticIterate":
        K = inst.K
        return cls(inst.p_max / 2 if p is None else p, 0.0, np.zeros(K), np.zeros(K), np.full(K, y0))

    @property
    def beta(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            b = np.where(self.tau > 0, self.L / np.where(self.tau > 0, self.tau, 1.0), 0.0)
        return np.clip(b, 0.0, 1.0)

    def allocation(self) -> Allocation:
        return Allocation.static(self.tau0, self.tau, self.beta, self.p)


@dataclass(frozen=True)
class StaticOptions:
    sca_tol: float = 1e-6
    sca_max_iter: int = 20
    bcd_tol: float = 1e-5
    bcd_max_iter: int = 20
    y0: float = 0.5
    power_search: bool = True
    scan_points: int = 24
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(tol=1e-9))


# ---------------------------------------------------------------------------
# Lemma-1 linearisation
# ---------------------------------------------------------------------------


def linearized_energy(k: int, Y_j: float, L_k: float, durations, p: float, inst: NetworkInstance) -> float:
    """Energy of node ``k`` with its own-slot harvest linearised around ``L_k / tau_k = Y_j``.

    ``durations`` holds all slot lengths ``tau_0..tau_K``. The own-slot term
    ``tau_k f(P h_k (1 - L_k/tau_k))`` is replaced by its tangent plane along
    the ray ``L_k = Y_j tau_k``. The two agree on that ray.
    """
    eh = inst.eh
    d = np.asarray(durations, dtype=float)
    tau_k = d[k + 1]
    ph = p * inst.h[k]
    own = harvested_power(ph * (1.0 - Y_j), eh) * tau_k
    slope = (ph * eh.d - eh.a * ph * eh.v) / (ph - Y_j * ph + eh.v) ** 2
    others = harvested_power(ph, eh) * (d.sum() - tau_k)
    return float(own + slope * (L_k - Y_j * tau_k) + others)


# ---------------------------------------------------------------------------
# time / reflection subproblem
# ---------------------------------------------------------------------------


@dataclass
class TimeSubproblemResult:
    tau0: float
    tau: np.ndarray
    L: np.ndarray
    status: str
    objective: float = math.nan
    trace: list = field(default_factory=list)
    iterations: int = 0
    Y: np.ndarray | None = None

    def __iter__(self):
        yield self.tau0
        yield self.tau
        yield self.L
        yield self.status


def _sca_program(p, Y, inst, hint=None):
    """Linearised time subproblem in normalised variables ``s = tau/T``, ``l = L/T``.

    Layout ``z = [s_0, s_1..s_K, l_1..l_K]``.
    """
    K = inst.K
    eh = inst.eh
    h = inst.h
    T = inst.T
    n = 2 * K + 1
    active = inst.r_min > 0
    idx_a = np.nonzero(active)[0]
    A = inst.W * T / np.where(active, inst.r_min, 1.0)
    b = inst.snr_coeff * p
    F = harvested_power(h * p, eh)
    G = harvested_power(h * p * (1.0 - Y), eh)
    Sl = -p * h * harvested_power_slope(h * p * (1.0 - Y), eh)
    norm = np.maximum(F, inst.p_c)
    norm = np.where(norm > 0, norm, 1.0)
    pc = inst.p_c
    n_thr = idx_a.size
    m = n_thr + 2 * K + 1
    scale = p / inst.p_max

    def objective(z):
        g = np.zeros(n)
        g[: K + 1] = scale
        return scale * z[: K + 1].sum(), g, None

    # rows after the throughput block are affine: vals = J0 z + off
    J0 = np.zeros((m, n))
    off = np.zeros(m)
    ar = np.arange(K)
    r = n_thr
    # p_c s_k - [F_k (S - s_k) + G_k s_k + Sl_k (l_k - Y_k s_k)] <= 0
    J0[r + ar, : K + 1] = -(F / norm)[:, None]
    J0[r + ar, 1 + ar] = (pc - G + Sl * Y) / norm
    J0[r + ar, K + 1 + ar] = -Sl / norm
    r += K
    J0[r, : K + 1] = 1.0
    off[r] = -1.0
    r += 1
    J0[r + ar, 1 + ar] = -1.0
    J0[r + ar, K + 1 + ar] = 1.0
    thr_rows = np.arange(n_thr)
    s_cols = 1 + idx_a
    l_cols = K + 1 + idx_a
    ba = b[idx_a]
    Aa = A[idx_a]

    def constraints(z):
        vals = J0 @ z + off
        J = J0.copy()
        if n_thr:
            sa = z[s_cols]
            la = z[l_cols]
            with np.errstate(divide="ignore", invalid="ignore"):
                q = ba * la / sa
                lg = np.log1p(q) / LN2
            vals[:n_thr] = 1.0 - Aa * sa * lg
            J[thr_rows, s_cols] = -Aa * (lg - q / ((1.0 + q) * LN2))
            J[thr_rows, l_cols] = -Aa * ba / ((1.0 + q) * LN2)
        return vals, J

    def hessian(z, w):
        H = np.zeros((n, n))
        if n_thr:
            sa = z[1 + idx_a]
            la = z[K + 1 + idx_a]
            ba = b[idx_a]
            Aa = A[idx_a]
            q = ba * la / sa
            c0 = w[:n_thr] * Aa * ba**2 / (LN2 * (1.0 + q) ** 2)
            si = 1 + idx_a
            li = K + 1 + idx_a
            H[si, si] += c0 * la**2 / sa**3
            H[li, li] += c0 / sa
            H[si, li] -= c0 * la / sa**2
            H[li, si] -= c0 * la / sa**2
        return H

    lb = np.zeros(n)
    ub = np.full(n, 1.0)
    return SmoothConvexProgram(n, objective, constraints, hessian, lb, ub, hint)


def _repair(p, beta, inst):
    """Exact slot lengths at fixed ``(P, beta)``; every constraint is linear there."""
    K = inst.K
    ta = solve_time_allocation(p, np.full(K, p), beta, inst)
    if ta.status != "optimal":
        return None
    return ta


def solve_time_subproblem(p: float, inst: NetworkInstance, init: StaticIterate | None = None,
                          opts: StaticOptions | None = None) -> TimeSubproblemResult:
    """SCA on the time/reflection subproblem at fixed power ``p``.

    Each round solves the linearised program, then re-times the slots
    exactly at the new reflection coefficients. Rounds whose exact objective
    would increase are rejected, so the trace is non-increasing.
    """
    opts = opts or StaticOptions()
    K = inst.K
    T = inst.T
    Y = np.full(K, opts.y0) if init is None else np.clip(np.asarray(init.Y, dtype=float), 1e-9, 1.0)
    trace = []
    best = None
    status = "infeasible"
    it = 0
    for it in range(1, opts.sca_max_iter + 1):
        prog = _sca_program(p, Y, inst)
        res = solve_smooth_convex(prog, opts.solver)
        if res.status == "infeasible":
            break
        z = res.x
        s = z[1 : K + 1]
        l = z[K + 1 :]
        with np.errstate(divide="ignore", invalid="ignore"):
            Y_new = np.where(s > 1e-300, np.clip(l / np.where(s > 0, s, 1.0), 0.0, 1.0), Y)
        ta = _repair(p, Y_new, inst)
        if ta is None:
            # the linearised optimum can be off the true feasible set early on
            Y = np.clip(Y_new, 1e-9, 1.0)
            trace.append({"iteration": it, "objective": math.nan})
            continue
        obj = p * (ta.tau0 + ta.tau.sum())
        if best is not None and obj > best[0] + 1e-12 * max(1.0, best[0]):
            trace.append({"iteration": it, "objective": best[0], "rejected": obj})
            break
        prev = None if best is None else best[0]
        best = (obj, ta, Y_new.copy())
        status = "optimal"
        trace.append({"iteration": it, "objective": obj})
        Y = np.clip(Y_new, 1e-9, 1.0)
        if prev is not None and abs(prev - obj) <= opts.sca_tol * max(abs(prev), 1e-300):
            break
    if best is None:
        return TimeSubproblemResult(0.0, np.zeros(K), np.zeros(K), status, trace=trace, iterations=it)
    obj, ta, Yb = best
    L = Yb * ta.tau
    return TimeSubproblemResult(ta.tau0, ta.tau, L, "optimal", obj, trace, it, Yb)


# ---------------------------------------------------------------------------
# power subproblem
# ---------------------------------------------------------------------------


@dataclass
class PowerSubproblemResult:
    p: float
    status: str

    def __iter__(self):
        yield self.p
        yield self.status


def _throughput_power(tau, beta, inst):
    need = inst.r_min > 0
    if np.any(need & ((tau <= 0) | (beta <= 0))):
        return math.inf
    if not np.any(need):
        return 0.0
    expo = inst.r_min[need] / (inst.W * tau[need])
    if np.any(expo > 1000):
        return math.inf
    return float(np.max(np.expm1(expo * LN2) / (inst.snr_coeff[need] * beta[need])))


def _energy_shortfall(p, tau0, tau, beta, inst):
    h = inst.h
    total = tau0 + tau.sum()
    harvest = harvested_power(h * p, inst.eh) * (total - tau) + harvested_power(h * p * (1.0 - beta), inst.eh) * tau
    return float(np.max(inst.p_c * tau - harvest))


def solve_power_subproblem(tau0, tau, beta, inst: NetworkInstance, init=None, opts=None) -> PowerSubproblemResult:
    """Smallest shared power meeting throughput and energy at fixed slots.

    Throughput has a closed-form inverse. Energy harvest is increasing in the
    power, so the energy requirement is found by bisection.
    """
    tau = np.asarray(tau, dtype=float)
    beta = np.asarray(beta, dtype=float)
    p_thr = _throughput_power(tau, beta, inst)
    if p_thr > inst.p_max:
        return PowerSubproblemResult(inst.p_max, "infeasible")
    if _energy_shortfall(inst.p_max, tau0, tau, beta, inst) > 0:
        return PowerSubproblemResult(inst.p_max, "infeasible")
    p_en = bisect_decreasing(lambda x: _energy_shortfall(x, tau0, tau, beta, inst), 0.0, 0.0, inst.p_max,
                             tol=1e-15 * inst.p_max)
    # bisection returns a bracket midpoint; step to the feasible side
    if _energy_shortfall(p_en, tau0, tau, beta, inst) > 0:
        p_en = min(inst.p_max, p_en * (1 + 1e-15) + 1e-18)
    p = max(p_thr, p_en)
    if p <= 0:
        return PowerSubproblemResult(0.0, "infeasible")
    return PowerSubproblemResult(min(p, inst.p_max), "optimal")


# ---------------------------------------------------------------------------
# exact block time at fixed power
# ---------------------------------------------------------------------------


@dataclass
class BlockTime:
    total: float  # minimal sum of slot lengths, s
    beta: np.ndarray
    tau: np.ndarray

    @property
    def tau0(self) -> float:
        return max(self.total - float(self.tau.sum()), 0.0)


def min_block_time(p: float, inst: NetworkInstance) -> BlockTime | None:
    """Least total time ``S`` that serves every node at shared power ``p``.

    With ``tau_k`` set by its throughput requirement, node ``k``'s energy
    condition reads ``F_k S >= (p_c + F_k - G_k(beta_k)) tau_k(beta_k)``, where
    ``F_k`` and ``G_k`` are the harvest rates in other slots and in its own slot.
    The ratio on the right is quasiconvex in ``beta_k``. So for a candidate
    ``S``, each node takes the largest admissible ``beta_k``, which gives the
    shortest slot, and feasibility is monotone in ``S``. Returns ``None`` if
    ``S`` would exceed ``T``.
    """
    K = inst.K
    eh = inst.eh
    h = inst.h
    W = inst.W
    c = inst.snr_coeff * p
    F = harvested_power(h * p, eh)
    r = inst.r_min
    pc = inst.p_c
    nodes = [k for k in range(K) if r[k] > 0]
    beta = np.zeros(K)
    if not nodes:
        return BlockTime(0.0, beta, np.zeros(K))
    if np.any(F[nodes] <= 0):
        return None

    def slot(k, y):
        return r[k] / (W * math.log2(1.0 + c[k] * y))

    def need(k, y):
        g = eh.gain * h[k] * p * (1.0 - y) / (eh.v * (h[k] * p * (1.0 - y) + eh.v))
        return slot(k, y) * (pc[k] + F[k] - g) / F[k]

    y_best = {}
    b_best = {}
    for k in nodes:
        res = minimize_scalar(lambda y: need(k, y), bounds=(1e-12, 1.0), method="bounded",
                              options={"xatol": 1e-12})
        y_best[k] = min(float(res.x), 1.0)
        b_best[k] = float(res.fun)
        if need(k, 1.0) <= b_best[k]:
            y_best[k], b_best[k] = 1.0, need(k, 1.0)

    def largest_beta(k, S):
        if need(k, 1.0) <= S:
            return 1.0
        return brentq(lambda y: need(k, y) - S, y_best[k], 1.0, xtol=1e-15, rtol=1e-15)

    def excess(S):
        return sum(slot(k, largest_beta(k, S)) for k in nodes) - S

    lo = max(b_best.values())
    T = inst.T
    if lo > T or excess(T) > 0:
        return None
    if excess(lo) <= 0:
        S = lo
    else:
        S = brentq(excess, lo, T, xtol=1e-14 * T, rtol=1e-15)
    for k in nodes:
        beta[k] = largest_beta(k, S)
    tau = np.zeros(K)
    for k in nodes:
        tau[k] = slot(k, beta[k])
    return BlockTime(max(S, float(tau.sum())), beta, tau)


def _block_energy(p, inst):
    bt = min_block_time(p, inst)
    return math.inf if bt is None else p * bt.total


def _power_search(inst: NetworkInstance, opts: StaticOptions):
    """Minimise ``P * S(P)`` over the shared power; returns ``(p, energy)``."""
    pm = inst.p_max
    grid = pm * np.geomspace(1.0, 2.0 ** -12, opts.scan_points)
    vals = np.array([_block_energy(p, inst) for p in grid])
    if not np.any(np.isfinite(vals)):
        return None
    i = int(np.argmin(vals))
    lo = grid[min(i + 1, grid.size - 1)]
    hi = grid[max(i - 1, 0)]
    best_p, best_v = float(grid[i]), float(vals[i])
    if not np.isfinite(_block_energy(lo, inst)):
        # feasibility is monotone in P: move lo onto the boundary
        a, b = lo, best_p
        while b - a > 1e-9 * b:
            mid = 0.5 * (a + b)
            if np.isfinite(_block_energy(mid, inst)):
                b = mid
            else:
                a = mid
        lo = b
    if hi > lo:
        res = minimize_scalar(lambda p: _block_energy(p, inst), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-9 * pm})
        if np.isfinite(res.fun) and res.fun < best_v:
            best_p, best_v = float(res.x), float(res.fun)
    return best_p, best_v


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _bcd(p, inst, opts, trace, start_iter, phase, Y0=None):
    """Alternate the two subproblems from power ``p``; returns the best iterate."""
    K = inst.K
    init = StaticIterate.start(inst, p, opts.y0)
    if Y0 is not None:
        init.Y = np.clip(Y0, 1e-9, 1.0)
    best = None
    prev_vars = None
    it = start_iter
    for _ in range(opts.bcd_max_iter):
        it += 1
        sub = solve_time_subproblem(p, inst, init, opts)
        if sub.status != "optimal":
            trace.append({"iteration": it, "energy": math.nan, "p": p, "phase": phase, "sca": sub.trace})
            break
        beta = sub.Y
        pw = solve_power_subproblem(sub.tau0, sub.tau, beta, inst)
        p_new = pw.p if pw.status == "optimal" else p
        p_new = min(p_new, p)
        energy = p_new * (sub.tau0 + sub.tau.sum())
        if best is not None and energy > best[0] + 1e-12 * max(1.0, best[0]):
            break
        if best is None or energy <= best[0]:
            best = (energy, p_new, sub.tau0, sub.tau.copy(), beta.copy())
        trace.append({"iteration": it, "energy": energy, "p": p_new, "phase": phase,
                      "sca": [row["objective"] for row in sub.trace]})
        cur = np.concatenate(([sub.tau0], sub.tau, sub.L))
        done = prev_vars is not None and np.max(np.abs(cur - prev_vars)) <= opts.bcd_tol * max(1e-300, np.max(np.abs(prev_vars)))
        prev_vars = cur
        init = StaticIterate(p_new, sub.tau0, sub.tau, sub.L, beta)
        if done or p_new >= p * (1 - 1e-15):
            break
        p = p_new
    return best, it


def run_static(inst: NetworkInstance, opts: StaticOptions | None = None) -> SolveReport:
    opts = opts or StaticOptions()
    if _trivial(inst):
        return _zero_feasible(inst, SCHEME)
    pm = inst.p_max
    if min_block_time(pm, inst) is None:
        return sentinel_report(SCHEME, inst, 0, [], ["qos-infeasible"])
    p0 = pm / 2 if min_block_time(pm / 2, inst) is not None else pm
    trace: list[dict] = []
    flags: list[str] = []
    if p0 != pm / 2:
        flags.append("start-at-p_max")
    best, it = _bcd(p0, inst, opts, trace, 0, "bcd")
    if opts.power_search:
        found = _power_search(inst, opts)
        if found is not None and (best is None or found[1] < best[0] * (1 - 1e-12)):
            bt = min_block_time(found[0], inst)
            cand, it = _bcd(found[0], inst, opts, trace, it, "search", Y0=bt.beta)
            if cand is not None and (best is None or cand[0] < best[0]):
                best = cand
    if best is None:
        return sentinel_report(SCHEME, inst, it, trace, flags + ["no-feasible-iterate"])
    # the trace reports the running best so that restarts do not show as jumps
    run = math.inf
    for row in trace:
        if np.isfinite(row["energy"]):
            run = min(run, row["energy"])
        row["best"] = run
    _, p, tau0, tau, beta = best
    ta = solve_time_allocation(p, np.full(inst.K, p), beta, inst)
    if ta.status != "optimal":
        return sentinel_report(SCHEME, inst, it, trace, flags + ["final-lp-" + ta.status])
    alloc = Allocation.static(ta.tau0, ta.tau, np.where(ta.tau > 0, beta, 0.0), p)
    if not (0 < p <= pm):
        return sentinel_report(SCHEME, inst, it, trace, flags + ["power-gate"])
    report = check_feasibility(alloc, inst)
    if not report.feasible:
        return sentinel_report(SCHEME, inst, it, trace, flags + ["feasibility-gate"])
    return SolveReport(SCHEME, alloc, pb_energy(alloc), True, True, it, trace, report, {}, flags)
