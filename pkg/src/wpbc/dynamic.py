"""Dynamic PB power scheme: a separate PB power for every TDMA slot.

The problem is written in the energy variables ``theta_i = P_i tau_i`` and
``lambda_k = beta_k theta_k``, which makes it jointly convex. Two dual
strategies are available:

``column_generation`` (default)
    Restricted master LP over per-slot (power, reflected power) columns.
    Its optimal duals play the role of the multipliers ``alpha``, ``eps`` and
    ``vartheta``. Pricing minimises the Lagrangian exactly per slot using the
    closed-form stationarity conditions. The Lagrangian lower bound gives a
    certified duality gap, which is the stopping rule.

``subgradient``
    Projected subgradient updates of all five multiplier families with a
    diminishing step. The primal for given duals comes from the closed forms
    followed by the time-allocation LP. Kept for comparison. It converges
    far more slowly and does not reach tight tolerances.

Both finish the same way: recover ``(P, beta)``, solve the time-allocation LP,
and gate the result on ``0 < P <= p_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    LN2,
    Allocation,
    NetworkInstance,
    SolveReport,
    check_feasibility,
    harvested_power,
    harvested_power_inverse,
    harvested_power_slope,
    pb_energy,
    sentinel_report,
)
from .solvers import LpProblem, bisect_decreasing, solve_lp

SCHEME = "dynamic"


@dataclass
class DualState:
    """Multipliers of the partial Lagrangian plus the subgradient step sizes."""

    alpha: np.ndarray  # energy causality, per node
    eps: np.ndarray  # throughput, per node
    kappa: np.ndarray  # lambda_k <= theta_k, per node
    omega: np.ndarray  # theta_i <= p_max tau_i, per slot 0..K
    vartheta: float = 0.0  # time budget
    steps: np.ndarray = field(default_factory=lambda: np.ones(5))

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).copy()
        self.eps = np.asarray(self.eps, dtype=float).copy()
        self.kappa = np.asarray(self.kappa, dtype=float).copy()
        self.omega = np.asarray(self.omega, dtype=float).copy()
        self.vartheta = float(self.vartheta)
        self.steps = np.asarray(self.steps, dtype=float).copy()
        K = self.alpha.size
        if self.eps.size != K or self.kappa.size != K or self.omega.size != K + 1:
            raise ValueError("multiplier arrays have inconsistent lengths")

    @classmethod
    def initial(cls, K: int, steps=None) -> "DualState":
        return cls(np.ones(K), np.ones(K), np.zeros(K), np.zeros(K + 1), 0.0,
                   np.ones(5) if steps is None else steps)

    @property
    def K(self) -> int:
        return self.alpha.size

    def vector(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.eps, self.kappa, self.omega, [self.vartheta]])

    def copy(self) -> "DualState":
        return replace(self)


@dataclass
class PrimalIterate:
    theta: np.ndarray  # slots 0..K, J
    lam: np.ndarray  # nodes, J
    tau0: float
    tau: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).copy()
        self.lam = np.asarray(self.lam, dtype=float).copy()
        self.tau0 = float(self.tau0)
        self.tau = np.asarray(self.tau, dtype=float).copy()

    @property
    def durations(self) -> np.ndarray:
        return np.concatenate(([self.tau0], self.tau))

    @classmethod
    def from_allocation(cls, alloc: Allocation) -> "PrimalIterate":
        theta = alloc.powers * alloc.durations
        return cls(theta, alloc.beta * theta[1:], alloc.tau0, alloc.tau)

    def to_allocation(self) -> Allocation:
        d = self.durations
        with np.errstate(divide="ignore", invalid="ignore"):
            powers = np.where(d > 0, self.theta / np.where(d > 0, d, 1.0), 0.0)
            beta = np.where(self.theta[1:] > 0, self.lam / np.where(self.theta[1:] > 0, self.theta[1:], 1.0), 0.0)
        return Allocation(self.tau0, self.tau, np.clip(beta, 0.0, 1.0), powers[0], powers[1:])


# ---------------------------------------------------------------------------
# closed-form pieces
# ---------------------------------------------------------------------------


def phi(x, alpha, h, eh):
    """Marginal harvest of slot-0 power: ``sum_k alpha_k (av-d) h_k / (h_k x + v)^2``."""
    alpha = np.asarray(alpha, dtype=float)
    h = np.asarray(h, dtype=float)
    return float(np.sum(alpha * eh.gain * h / (h * x + eh.v) ** 2))


def optimal_p0(duals: DualState, inst: NetworkInstance) -> float:
    target = 1.0 + duals.omega[0]
    return bisect_decreasing(lambda x: phi(x, duals.alpha, inst.h, inst.eh), target, 0.0, inst.p_max, tol=1e-15)


def optimal_passive_power(k: int, duals: DualState, inst: NetworkInstance) -> float:
    """``P_k (1 - beta_k)`` from the printed stationarity condition in ``theta_k``.

    A non-positive denominator ``1 + omega_k - kappa_k`` means the Lagrangian
    keeps decreasing in the passive power, so the cap ``p_max`` is returned.
    """
    h = inst.h[k]
    denom = 1.0 + duals.omega[k + 1] - duals.kappa[k]
    if denom <= 0:
        return inst.p_max if duals.alpha[k] > 0 else 0.0
    val = math.sqrt(duals.alpha[k] * inst.eh.gain * h / denom) / h - inst.eh.v / h
    return max(val, 0.0)


def optimal_reflected_power(k: int, duals: DualState, inst: NetworkInstance) -> float:
    """``P_k beta_k`` from the printed stationarity condition in ``lambda_k``."""
    kap = duals.kappa[k]
    denom = kap + (1.0 + duals.omega[k + 1] - kap) * LN2
    if denom <= 0:
        return inst.p_max if duals.eps[k] > 0 else 0.0
    val = duals.eps[k] * inst.W / denom - 1.0 / inst.snr_coeff[k]
    return max(val, 0.0)


def recover_pk_beta(k: int, duals: DualState, inst: NetworkInstance) -> tuple[float, float]:
    passive = optimal_passive_power(k, duals, inst)
    reflected = optimal_reflected_power(k, duals, inst)
    total = passive + reflected
    if total <= 0:
        return 0.0, 0.0
    return total, reflected / total


# ---------------------------------------------------------------------------
# time allocation LP
# ---------------------------------------------------------------------------


@dataclass
class TimeAllocation:
    tau0: float
    tau: np.ndarray
    status: str
    objective: float = math.nan
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __iter__(self):
        yield self.tau0
        yield self.tau
        yield self.status


def _slot_harvest(p0, p, beta, inst):
    """K x (K+1) harvest rates (W) of node k in slot i at the given powers."""
    powers = np.concatenate(([p0], p))
    rates = harvested_power(np.outer(inst.h, powers), inst.eh)
    idx = np.arange(inst.K)
    rates[idx, idx + 1] = harvested_power((1.0 - beta) * p * inst.h, inst.eh)
    return rates


def solve_time_allocation(p0, p, beta, inst: NetworkInstance, elastic: bool = False) -> TimeAllocation:
    """Minimise ``sum_i P_i tau_i`` over the slot lengths at fixed powers.

    With ``elastic=True`` each throughput row gets a penalised shortfall
    variable, so the LP is always feasible. The subgradient method uses this
    on dual iterates that are not yet primal feasible.
    """
    K = inst.K
    p = np.asarray(p, dtype=float)
    beta = np.asarray(beta, dtype=float)
    powers = np.concatenate(([float(p0)], p))
    rate = inst.W * np.log2(1.0 + inst.snr_coeff * beta * p)
    r_min = inst.r_min
    if not elastic and np.any((rate <= 0) & (r_min > 0)):
        return TimeAllocation(0.0, np.zeros(K), "infeasible")
    harvest = _slot_harvest(p0, p, beta, inst)

    n = K + 1 + (K if elastic else 0)
    A = np.zeros((2 * K + 1, n))
    b = np.zeros(2 * K + 1)
    idx = np.arange(K)
    A[idx, 1 + idx] = -rate
    b[:K] = -r_min
    A[K:2 * K, : K + 1] = -harvest
    A[K + idx, 1 + idx] += inst.p_c
    A[2 * K, : K + 1] = 1.0
    b[2 * K] = inst.T
    c = np.zeros(n)
    c[: K + 1] = powers
    ub = np.full(n, inst.T)
    if elastic:
        A[idx, K + 1 + idx] = -np.maximum(r_min, 1.0)
        c[K + 1:] = 10.0 * inst.p_max * inst.T
        ub[K + 1:] = 1.0
    res = solve_lp(LpProblem(c, A, b, np.zeros(n), ub))
    if res.status != "optimal":
        return TimeAllocation(0.0, np.zeros(K), res.status)
    x = res.x
    return TimeAllocation(float(x[0]), x[1 : K + 1].copy(), "optimal", float(powers @ x[: K + 1]), res.duals)


# ---------------------------------------------------------------------------
# Lagrangian
# ---------------------------------------------------------------------------


def _excess(z, eh):
    # d/dtau [tau f(h theta / tau)] = f(z) - z f'(z) at input power z
    return harvested_power(z, eh) - z * harvested_power_slope(z, eh)


def constraint_values(primal: PrimalIterate, inst: NetworkInstance) -> dict:
    """All relaxed constraints in ``g <= 0`` form at ``primal``."""
    alloc = primal.to_allocation()
    from .model import harvested_energy_all, node_throughput

    return {
        "energy": inst.p_c * primal.tau - harvested_energy_all(alloc, inst),
        "throughput": inst.r_min - node_throughput(alloc, inst),
        "power": primal.theta - inst.p_max * primal.durations,
        "time": float(primal.durations.sum() - inst.T),
        "reflect": primal.lam - primal.theta[1:],
    }


def lagrangian(primal: PrimalIterate, duals: DualState, inst: NetworkInstance) -> float:
    g = constraint_values(primal, inst)
    return float(
        primal.theta.sum()
        + duals.alpha @ g["energy"]
        + duals.eps @ g["throughput"]
        + duals.vartheta * g["time"]
        + duals.kappa @ g["reflect"]
        + duals.omega @ g["power"]
    )


def lagrangian_gradient(primal: PrimalIterate, duals: DualState, inst: NetworkInstance) -> dict:
    """Gradient of :func:`lagrangian` in ``theta``, ``lambda`` and the slot lengths.

    Includes the harvest of every node in the slots of the other nodes, so
    ``d/dtheta_k`` and ``d/dtau_k`` carry a sum over ``j != k`` as well.
    Requires all slot lengths to be positive.
    """
    eh = inst.eh
    K = inst.K
    h = inst.h
    a = duals.alpha
    d = primal.durations
    if np.any(d <= 0):
        raise ValueError("gradient needs strictly positive slot lengths")
    P = primal.theta / d
    u = (primal.theta[1:] - primal.lam) / primal.tau  # passive input per node
    s = primal.lam / primal.tau  # reflected power per node
    c = inst.snr_coeff

    # z[k, i]: input power at node k in slot i (own slot uses the passive part)
    z = np.outer(h, P)
    idx = np.arange(K)
    z[idx, idx + 1] = u * h
    slope = harvested_power_slope(z, eh)  # K x (K+1)

    d_theta = 1.0 - (a[:, None] * h[:, None] * slope).sum(axis=0) + duals.omega
    d_theta[1:] -= duals.kappa
    own_slope = slope[idx, idx + 1]
    d_lam = duals.kappa + a * h * own_slope - duals.eps * inst.W * c / ((1.0 + c * s) * LN2)

    excess = _excess(z, eh)
    d_tau = -(a[:, None] * excess).sum(axis=0) + duals.vartheta - duals.omega * inst.p_max
    d_tau[1:] += a * inst.p_c
    rate_term = np.log2(1.0 + c * s) - c * s / ((1.0 + c * s) * LN2)
    d_tau[1:] -= duals.eps * inst.W * rate_term
    return {"theta": d_theta, "lam": d_lam, "tau": d_tau}


def update_duals(state: DualState, primal: PrimalIterate, inst: NetworkInstance, sign: str = "ascent") -> DualState:
    """One projected subgradient step on every multiplier family.

    ``sign="ascent"`` raises a multiplier whose constraint is violated.
    ``sign="printed"`` subtracts the violation instead.
    """
    if sign not in ("ascent", "printed"):
        raise ValueError(f"unknown sign convention {sign!r}")
    s = 1.0 if sign == "ascent" else -1.0
    g = constraint_values(primal, inst)
    l1, l2, l3, l4, l5 = state.steps
    return DualState(
        alpha=np.maximum(0.0, state.alpha + s * l1 * g["energy"]),
        eps=np.maximum(0.0, state.eps + s * l2 * g["throughput"]),
        kappa=np.maximum(0.0, state.kappa + s * l5 * g["reflect"]),
        omega=np.maximum(0.0, state.omega + s * l3 * g["power"]),
        vartheta=max(0.0, state.vartheta + s * l4 * g["time"]),
        steps=state.steps,
    )


# ---------------------------------------------------------------------------
# exact per-slot pricing
# ---------------------------------------------------------------------------


def _cross_marginal(x, k, alpha, inst):
    """``sum_{j != k} alpha_j h_j f'(h_j x)``: harvest value of slot-k power to other nodes."""
    h = inst.h
    terms = alpha * h * harvested_power_slope(h * x, inst.eh)
    if k is not None:
        terms = np.delete(terms, k)
    return float(terms.sum())


def price_slot0(alpha, vartheta, inst):
    """Best slot-0 power and its reduced cost per second."""
    x = bisect_decreasing(lambda t: phi(t, alpha, inst.h, inst.eh), 1.0, 0.0, inst.p_max, tol=1e-15)
    rc = x - float(alpha @ harvested_power(inst.h * x, inst.eh)) + vartheta
    return x, rc


def price_slot(k, alpha, eps, vartheta, inst):
    """Minimise the per-second Lagrangian of slot ``k`` over (passive u, reflected y).

    Stationarity in u and y shares the factor ``D = 1 + omega - cross(x)`` with
    ``x = u + y``. Both closed forms decrease in ``D``, so the interior
    solution is a monotone fixed point in ``x``. When even ``x = p_max`` is too
    small, the cap is active and ``D`` is found from ``u + y = p_max`` instead.
    Returns ``(x, y, reduced_cost)``.
    """
    h = inst.h[k]
    gain = inst.eh.gain
    v = inst.eh.v
    ck = inst.snr_coeff[k]
    ak = alpha[k]
    ek = eps[k]
    W = inst.W

    def split(D):
        u = max(math.sqrt(ak * gain * h / D) - v, 0.0) / h
        y = max(ek * W / (D * LN2) - 1.0 / ck, 0.0)
        return u, y

    def total(D):
        if D <= 0:
            return math.inf
        u, y = split(D)
        return u + y

    def D_of(x):
        return 1.0 - _cross_marginal(x, k, alpha, inst)

    pm = inst.p_max
    if total(D_of(pm)) >= pm:
        x = pm
        if ak <= 0 and ek <= 0:
            u, y = pm, 0.0
        else:
            hi = max(D_of(pm), 1.0)
            while total(hi) > pm:
                hi *= 2.0
            lo = D_of(pm)
            if lo <= 0:
                lo = hi
                while total(lo) <= pm:
                    lo *= 0.5
            u, y = split(bisect_decreasing(total, pm, lo, hi, tol=1e-15 * hi))
    elif total(D_of(0.0)) <= 0.0:
        u, y, x = 0.0, 0.0, 0.0
    else:
        x = bisect_decreasing(lambda t: total(D_of(t)) - t, 0.0, 0.0, pm, tol=1e-15)
        D = D_of(x)
        u, y = split(D) if D > 0 else (x, 0.0)
    # near D = 0 the closed forms are steep, so keep x and split it in proportion
    if u + y > 0:
        y = x * y / (u + y)
    else:
        y = 0.0
    rc = _slot_cost(k, x, y, alpha, eps, vartheta, inst)
    return x, y, rc


def _slot_cost(k, x, y, alpha, eps, vartheta, inst):
    h = inst.h
    others = alpha * harvested_power(h * x, inst.eh)
    cross = float(others.sum() - others[k])
    own = alpha[k] * (harvested_power(h[k] * (x - y), inst.eh) - inst.p_c[k])
    rate = inst.W * math.log2(1.0 + inst.snr_coeff[k] * y)
    return x - cross - own - eps[k] * rate + vartheta


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DynamicOptions:
    method: str = "column_generation"  # or "subgradient"
    tol: float = 1e-7  # relative duality gap (column generation) / multiplier change (subgradient)
    max_iter: int = 300
    sign: str = "ascent"  # subgradient sign convention: "ascent" or "printed"
    step_scale: float = 10.0
    polish: bool = True

    def __post_init__(self):
        if self.method not in ("column_generation", "subgradient"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.sign not in ("ascent", "printed"):
            raise ValueError(f"unknown sign convention {self.sign!r}")


class _Master:
    """Restricted master LP over slot columns ``(slot, x, y)`` of unit length."""

    def __init__(self, inst: NetworkInstance):
        self.inst = inst
        self.cols: list[tuple[int, float, float]] = []
        self.big_m = 1e3 * inst.p_max * inst.T

    def add(self, slot, x, y):
        for s, xx, yy in self.cols:
            if s == slot and abs(xx - x) <= 1e-14 * self.inst.p_max and abs(yy - y) <= 1e-14 * self.inst.p_max:
                return False
        self.cols.append((slot, float(x), float(y)))
        return True

    def column(self, slot, x, y):
        inst = self.inst
        K = inst.K
        col = np.zeros(2 * K + 1)
        harvest = harvested_power(inst.h * x, inst.eh)
        if slot > 0:
            k = slot - 1
            harvest[k] = harvested_power(inst.h[k] * (x - y), inst.eh)
            col[k] += inst.p_c[k]
            col[K + k] = -inst.W * math.log2(1.0 + inst.snr_coeff[k] * y)
        col[:K] -= harvest
        col[2 * K] = 1.0
        return col

    def solve(self):
        inst = self.inst
        K = inst.K
        n_cols = len(self.cols)
        A = np.zeros((2 * K + 1, n_cols + K))
        for j, (slot, x, y) in enumerate(self.cols):
            A[:, j] = self.column(slot, x, y)
        r_min = inst.r_min
        A[K + np.arange(K), n_cols + np.arange(K)] = -r_min
        b = np.zeros(2 * K + 1)
        b[K : 2 * K] = -r_min
        b[2 * K] = inst.T
        c = np.concatenate([[x for _, x, _ in self.cols], np.full(K, self.big_m)])
        ub = np.concatenate([np.full(n_cols, np.inf), np.ones(K)])
        res = solve_lp(LpProblem(c, A, b, np.zeros(n_cols + K), ub))
        return res, n_cols

    def aggregate(self, t):
        K = self.inst.K
        tau = np.zeros(K + 1)
        theta = np.zeros(K + 1)
        lam = np.zeros(K)
        for (slot, x, y), w in zip(self.cols, t):
            tau[slot] += w
            theta[slot] += x * w
            if slot > 0:
                lam[slot - 1] += y * w
        return tau, theta, lam


def _powers_from_energy(tau, theta, lam, p_max):
    with np.errstate(divide="ignore", invalid="ignore"):
        P = np.where(tau > 0, theta / np.where(tau > 0, tau, 1.0), 0.0)
        beta = np.where(theta[1:] > 0, lam / np.where(theta[1:] > 0, theta[1:], 1.0), 0.0)
    return np.minimum(P, p_max), np.clip(beta, 0.0, 1.0)


def _polish_p0(alloc: Allocation, inst: NetworkInstance) -> Allocation:
    """Stretch slot 0 over any unused time and lower ``P_0`` to match.

    Energy ``P_0 tau_0`` needed for a fixed harvest is decreasing in ``tau_0``
    (perspective of the convex inverse harvest curve), so this never costs
    energy and closes the time budget.
    """
    spare = inst.T - float(alloc.durations.sum())
    if spare <= 0 or alloc.tau0 <= 0 and alloc.p0 <= 0:
        return alloc
    tau0_new = alloc.tau0 + spare
    rates = _slot_harvest(alloc.p0, alloc.p, alloc.beta, inst)
    other = rates[:, 1:] @ alloc.tau
    deficit = inst.p_c * alloc.tau - other
    if np.all(deficit <= 0):
        return alloc
    need = np.maximum(deficit, 0.0) / tau0_new
    p0_new = float(np.max(harvested_power_inverse(need, inst.eh) / inst.h))
    if not (0 < p0_new <= inst.p_max) or p0_new * tau0_new > alloc.p0 * alloc.tau0:
        return alloc
    return Allocation(tau0_new, alloc.tau, alloc.beta, p0_new, alloc.p)


def _finish(P, beta, inst, iterations, trace, kkt, flags, converged, polish=True) -> SolveReport:
    ta = solve_time_allocation(P[0], P[1:], beta, inst)
    if ta.status != "optimal":
        return sentinel_report(SCHEME, inst, iterations, trace, flags + ["final-lp-" + ta.status])
    # a silent slot 0 harvests nothing; the LP may still park time there at zero cost
    alloc = Allocation(ta.tau0 if P[0] > 0 else 0.0, ta.tau, beta, P[0], P[1:])
    # unused slots carry no power
    durations = alloc.durations
    powers = np.where(durations > 0, alloc.powers, 0.0)
    alloc = Allocation(alloc.tau0, alloc.tau, np.where(alloc.tau > 0, alloc.beta, 0.0), powers[0], powers[1:])
    if polish:
        alloc = _polish_p0(alloc, inst)
    used = alloc.durations > 0
    powers = alloc.powers
    if np.any(used & ~((powers > 0) & (powers <= inst.p_max * (1 + 1e-12)))):
        return sentinel_report(SCHEME, inst, iterations, trace, flags + ["power-gate"])
    report = check_feasibility(alloc, inst)
    if not report.feasible:
        return sentinel_report(SCHEME, inst, iterations, trace, flags + ["feasibility-gate"])
    return SolveReport(SCHEME, alloc, pb_energy(alloc), True, converged, iterations, trace, report, kkt, flags)


def _trivial(inst: NetworkInstance) -> bool:
    return bool(np.all(inst.r_min <= 0) and np.all(inst.p_c <= 0))


def _zero_feasible(inst, scheme):
    alloc = Allocation.zeros(inst.K)
    return SolveReport(scheme, alloc, 0.0, True, True, 0, [], check_feasibility(alloc, inst), {}, ["trivial"])


def run_dynamic(inst: NetworkInstance, opts: DynamicOptions | None = None) -> SolveReport:
    opts = opts or DynamicOptions()
    if _trivial(inst):
        return _zero_feasible(inst, SCHEME)
    if opts.method == "subgradient":
        return _run_subgradient(inst, opts)
    return _run_column_generation(inst, opts)


def _run_column_generation(inst: NetworkInstance, opts: DynamicOptions) -> SolveReport:
    K = inst.K
    pm = inst.p_max
    master = _Master(inst)
    master.add(0, pm, 0.0)
    for k in range(K):
        master.add(k + 1, pm, pm)
        master.add(k + 1, pm, 0.0)

    trace = []
    best_lb = -math.inf
    converged = False
    res = None
    gap = math.inf
    artificial = math.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        res, n_cols = master.solve()
        if res.status != "optimal":
            return sentinel_report(SCHEME, inst, it, trace, ["master-" + res.status])
        duals = res.duals
        alpha, eps, vartheta = duals[:K], duals[K : 2 * K], float(duals[2 * K])
        artificial = float(res.x[n_cols:].sum())
        ub = float(res.x[:n_cols] @ np.array([x for _, x, _ in master.cols]))

        x0, rc0 = price_slot0(alpha, vartheta, inst)
        priced = [(0, x0, 0.0, rc0)]
        for k in range(K):
            x, y, rc = price_slot(k, alpha, eps, vartheta, inst)
            priced.append((k + 1, x, y, rc))
        min_rc = min(p[3] for p in priced) - vartheta
        lb = float(eps @ inst.r_min) + inst.T * min(0.0, min_rc)
        best_lb = max(best_lb, lb)
        feasible_master = artificial <= 1e-12
        gap = (ub - best_lb) / max(ub, 1e-300) if feasible_master else math.inf
        trace.append({
            "iteration": it,
            "energy": ub if feasible_master else math.nan,
            "dual_bound": best_lb,
            "gap": gap,
            "columns": n_cols,
        })
        if feasible_master and gap <= opts.tol:
            converged = True
            break
        added = False
        for slot, x, y, rc in priced:
            if rc < -1e-13 * max(1.0, pm) and x > 0:
                added |= master.add(slot, x, y)
        if not added:
            converged = True
            break

    kkt = {"duality_gap": gap, "dual_bound": best_lb, "artificial": artificial}
    if artificial > 1e-9:
        return sentinel_report(SCHEME, inst, it, trace, ["qos-infeasible"])
    t = res.x[: len(master.cols)]
    tau, theta, lam = master.aggregate(t)
    P, beta = _powers_from_energy(tau, theta, lam, pm)
    flags = [] if converged else ["max-iterations"]
    return _finish(P, beta, inst, it, trace, kkt, flags, converged, opts.polish)


def _step_sizes(inst: NetworkInstance, scale: float) -> np.ndarray:
    """Per-family step constants normalised by typical multiplier and constraint sizes."""
    h_bar = float(np.mean(inst.h))
    alpha_typ = 1.0 / (harvested_power_slope(0.0, inst.eh) * h_bar)
    energy_typ = max(float(np.mean(inst.p_c)) * inst.T, 1e-12)
    rate_typ = max(float(np.mean(inst.r_min)), 1.0)
    eps_typ = inst.p_max * inst.T / rate_typ
    return scale * np.array([
        alpha_typ / energy_typ,
        eps_typ / rate_typ,
        1.0 / (inst.p_max * inst.T),
        inst.p_max / inst.T,
        1.0 / (inst.p_max * inst.T),
    ])


def _initial_duals(inst: NetworkInstance, steps: np.ndarray) -> DualState:
    """Multipliers at their natural scale: PB joules per harvested joule and per bit."""
    K = inst.K
    alpha0 = 1.0 / (harvested_power_slope(0.0, inst.eh) * float(np.mean(inst.h)))
    eps0 = inst.p_max * inst.T / max(float(np.mean(inst.r_min)), 1.0)
    return DualState(np.full(K, alpha0), np.full(K, eps0), np.zeros(K), np.zeros(K + 1), 0.0, steps)


def _primal_for_duals(duals: DualState, inst: NetworkInstance):
    K = inst.K
    p0 = optimal_p0(duals, inst)
    P = np.zeros(K)
    beta = np.zeros(K)
    flags = []
    for k in range(K):
        P[k], beta[k] = recover_pk_beta(k, duals, inst)
        if P[k] == 0:
            flags.append(k)
    P = np.minimum(P, inst.p_max)
    ta = solve_time_allocation(p0, P, beta, inst, elastic=True)
    if ta.status != "optimal":
        tau0, tau = 0.0, np.zeros(K)
    else:
        tau0, tau = ta.tau0, ta.tau
    theta = np.concatenate(([p0 * tau0], P * tau))
    return PrimalIterate(theta, beta * P * tau, tau0, tau), p0, P, beta


def _run_subgradient(inst: NetworkInstance, opts: DynamicOptions) -> SolveReport:
    base = _step_sizes(inst, opts.step_scale)
    duals = _initial_duals(inst, base)
    trace = []
    best_lb = -math.inf
    best = None
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        primal, p0, P, beta = _primal_for_duals(duals, inst)
        lb = lagrangian(primal, duals, inst)
        best_lb = max(best_lb, lb)
        energy = math.nan
        ta = solve_time_allocation(p0, P, beta, inst)
        if ta.status == "optimal":
            energy = ta.objective
            if best is None or energy < best[0]:
                best = (energy, np.concatenate(([p0], P)), beta.copy())
        trace.append({"iteration": it, "energy": energy, "dual_bound": best_lb, "lagrangian": lb})
        duals.steps = base / math.sqrt(it)
        new = update_duals(duals, primal, inst, opts.sign)
        old_v, new_v = duals.vector(), new.vector()
        change = float(np.max(np.abs(new_v - old_v) / np.maximum(np.abs(old_v), 1e-12)))
        duals = new
        if change < opts.tol and ta.status == "optimal":
            converged = True
            break
    if best is None:
        return sentinel_report(SCHEME, inst, it, trace, ["subgradient-no-feasible-iterate"])
    kkt = {"dual_bound": best_lb}
    flags = [] if converged else ["max-iterations"]
    return _finish(best[1], best[2], inst, it, trace, kkt, flags, converged, opts.polish)
