"""Small dense solvers used by the allocation schemes.

* :func:`bisect_decreasing` -- monotone scalar root finding.
* :func:`solve_lp` -- two-phase tableau simplex with Bland's anti-cycling rule,
  returning primal values and the multipliers of the ``A x <= b`` rows.
* :func:`solve_smooth_convex` -- primal log-barrier method with damped Newton
  centering steps and a phase-I feasibility search.

Problem sizes in this package are tiny (tens of variables), so everything is
dense and favours robustness over speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class NonMonotoneError(ValueError):
    """Raised when a bracket shows the function is not decreasing."""


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 500  # Newton steps per centering / simplex pivots per phase x 100
    t0: float = 1.0
    mu: float = 10.0
    ls_alpha: float = 0.3
    ls_beta: float = 0.8
    pivot_tol: float = 1e-9

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.mu <= 1:
            raise ValueError("barrier growth factor must exceed 1")


def bisect_decreasing(f: Callable[[float], float], target: float, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Solve ``f(x) = target`` for a non-increasing ``f`` on ``[lo, hi]``.

    Returns ``lo`` when ``target >= f(lo)`` and ``hi`` when ``target <= f(hi)``
    (boundary clamping). Otherwise bisects until the bracket is narrower than
    ``tol`` and returns its midpoint.
    """
    if hi < lo:
        raise ValueError("empty bracket")
    f_lo = f(lo)
    if target >= f_lo:
        return lo
    f_hi = f(hi)
    if f_hi > f_lo:
        raise NonMonotoneError(f"f({hi}) = {f_hi} exceeds f({lo}) = {f_lo}")
    if target <= f_hi:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid > f_lo or f_mid < f_hi:
            raise NonMonotoneError(f"f({mid}) = {f_mid} leaves the bracket [{f_hi}, {f_lo}]")
        if f_mid > target:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Linear programming
# ---------------------------------------------------------------------------


@dataclass
class LpProblem:
    """``min c.x  s.t.  A_ub x <= b_ub,  lb <= x <= ub``."""

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        if self.A_ub is None:
            self.A_ub = np.zeros((0, n))
            self.b_ub = np.zeros(0)
        self.A_ub = np.atleast_2d(np.asarray(self.A_ub, dtype=float))
        if self.A_ub.size == 0:
            self.A_ub = self.A_ub.reshape(0, n)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        if self.A_ub.shape[1] != n:
            raise ValueError(f"A_ub has {self.A_ub.shape[1]} columns, c has {n} entries")
        if self.A_ub.shape[0] != self.b_ub.size:
            raise ValueError(f"A_ub has {self.A_ub.shape[0]} rows, b_ub has {self.b_ub.size}")
        self.lb = np.zeros(n) if self.lb is None else np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.broadcast_to(np.asarray(self.ub, dtype=float), (n,)).copy()

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class LpResult:
    x: np.ndarray
    status: str  # optimal | infeasible | unbounded | iteration_limit
    objective: float = math.nan
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pivots: int = 0

    def __iter__(self):
        # allows ``x, status = solve_lp(...)``
        yield self.x
        yield self.status


def _equilibrate(M: np.ndarray, passes: int = 4):
    """Geometric-mean row/column scaling; returns (row_scale, col_scale)."""
    m, n = M.shape
    r = np.ones(m)
    s = np.ones(n)
    A = np.abs(M)
    for _ in range(passes):
        B = A * r[:, None] * s[None, :]
        with np.errstate(divide="ignore"):
            logs = np.where(B > 0, np.log(np.where(B > 0, B, 1.0)), np.nan)
        row_max = np.nanmax(np.where(np.isnan(logs), -np.inf, logs), axis=1) if n else np.zeros(m)
        row_min = np.nanmin(np.where(np.isnan(logs), np.inf, logs), axis=1) if n else np.zeros(m)
        ok = np.isfinite(row_max) & np.isfinite(row_min)
        r[ok] *= np.exp(-0.5 * (row_max[ok] + row_min[ok]))
        B = A * r[:, None] * s[None, :]
        with np.errstate(divide="ignore"):
            logs = np.where(B > 0, np.log(np.where(B > 0, B, 1.0)), np.nan)
        col_max = np.nanmax(np.where(np.isnan(logs), -np.inf, logs), axis=0) if m else np.zeros(n)
        col_min = np.nanmin(np.where(np.isnan(logs), np.inf, logs), axis=0) if m else np.zeros(n)
        ok = np.isfinite(col_max) & np.isfinite(col_min)
        s[ok] *= np.exp(-0.5 * (col_max[ok] + col_min[ok]))
    return r, s


def _run_simplex(tab, basis, cost, allowed, tol, max_pivots, dtol=None):
    """Bland's-rule primal simplex on a tableau ``tab = [B^-1 A | B^-1 b]``.

    Returns ``(status, pivots)`` and mutates ``tab``/``basis`` in place.
    """
    m = tab.shape[0]
    ncols = tab.shape[1] - 1
    pivots = 0
    while True:
        cb = cost[basis]
        reduced = cost[:ncols] - cb @ tab[:, :ncols]
        # rounding in the reduced costs grows with the basic costs (big-M columns)
        rtol = (tol if dtol is None else dtol) * max(1.0, float(np.abs(cb).max(initial=0.0)))
        candidates = np.nonzero((reduced < -rtol) & allowed)[0]
        if candidates.size == 0:
            return "optimal", pivots
        if pivots >= max_pivots:
            return "iteration_limit", pivots
        j = candidates[0]
        col = tab[:, j]
        pos = col > tol
        if not np.any(pos):
            return "unbounded", pivots
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[pos, -1] / col[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + tol * max(1.0, abs(best)))[0]
        r = ties[np.argmin(basis[ties])]
        tab[r] /= tab[r, j]
        others = np.arange(m) != r
        tab[others] -= np.outer(tab[others, j], tab[r])
        basis[r] = j
        pivots += 1


def _primal_violation(problem: LpProblem, x: np.ndarray) -> float:
    """Largest constraint violation, relative to the row's scale."""
    A, b = problem.A_ub, problem.b_ub
    worst = 0.0
    if b.size:
        scale = np.abs(A) @ np.abs(x) + np.abs(b) + 1e-300
        worst = float(np.max((A @ x - b) / scale))
    box = np.maximum(problem.lb - x, x - problem.ub) / (1.0 + np.abs(x))
    return max(worst, float(np.max(box, initial=0.0)))


def solve_lp(problem: LpProblem, opts: SolverOptions | None = None) -> LpResult:
    """Solve a small dense LP with the two-phase simplex method.

    ``duals`` holds non-negative multipliers for the ``A_ub`` rows: the rate at
    which the optimal objective falls as the corresponding ``b_ub`` entry grows.
    A vertex that violates a row by more than 1e-10 (relative) is re-solved with
    a smaller pivot tolerance; near-zero entries skipped by the ratio test are
    what drives basic variables negative.
    """
    opts = opts or SolverOptions()
    tol = opts.pivot_tol
    res = _solve_lp(problem, opts, tol)
    while res.status == "optimal" and _primal_violation(problem, res.x) > 1e-10 and tol > 1e-15:
        tol *= 1e-2
        res = _solve_lp(problem, opts, tol)
    return res


def _solve_lp(problem: LpProblem, opts: SolverOptions, tol: float) -> LpResult:
    n = problem.n
    lb, ub = problem.lb, problem.ub
    A, b, c = problem.A_ub, problem.b_ub, problem.c
    m0 = A.shape[0]

    if np.any(lb > ub):
        return LpResult(np.full(n, np.nan), "infeasible")

    # x = offset + Tmap @ z with z >= 0
    offset = np.zeros(n)
    cols = []
    extra_rows = []  # (z index, bound)
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    nz = len(cols)
    Tmap = np.zeros((n, nz))
    for idx, (j, sgn) in enumerate(cols):
        Tmap[j, idx] = sgn

    M = np.zeros((m0 + len(extra_rows), nz))
    rhs = np.zeros(m0 + len(extra_rows))
    if m0:
        M[:m0] = A @ Tmap
        rhs[:m0] = b - A @ offset
    for i, (zi, bound) in enumerate(extra_rows):
        M[m0 + i, zi] = 1.0
        rhs[m0 + i] = bound
    cz = c @ Tmap
    c_off = float(c @ offset)
    m = M.shape[0]

    if m == 0:
        if np.any(cz < -tol):
            return LpResult(np.full(n, np.nan), "unbounded")
        return LpResult(offset.copy(), "optimal", c_off, np.zeros(0))

    rs, cs = _equilibrate(M)
    Ms = M * rs[:, None] * cs[None, :]
    rhs_s = rhs * rs
    # median, not max: a big-M penalty column must not swamp the others
    nonzero = np.abs(cz * cs)[cz != 0]
    c_scale = float(np.median(nonzero)) if nonzero.size else 1.0
    czs = cz * cs / c_scale

    sign = np.where(rhs_s < 0, -1.0, 1.0)
    n_art = int(np.sum(sign < 0))
    ncols = nz + m + n_art
    tab = np.zeros((m, ncols + 1))
    tab[:, :nz] = Ms * sign[:, None]
    tab[:, nz : nz + m] = np.diag(sign)
    tab[:, -1] = rhs_s * sign
    basis = np.empty(m, dtype=int)
    art_rows = np.nonzero(sign < 0)[0]
    for a_idx, row in enumerate(art_rows):
        tab[row, nz + m + a_idx] = 1.0
        basis[row] = nz + m + a_idx
    for row in np.nonzero(sign > 0)[0]:
        basis[row] = nz + row
    std_matrix = tab[:, :ncols].copy()
    std_rhs = tab[:, -1].copy()

    max_pivots = 100 * opts.max_iter
    pivots = 0
    if n_art:
        cost1 = np.zeros(ncols)
        cost1[nz + m :] = 1.0
        status, p1 = _run_simplex(tab, basis, cost1, np.ones(ncols, dtype=bool), tol, max_pivots)
        pivots += p1
        if status != "optimal":
            return LpResult(np.full(n, np.nan), status, pivots=pivots)
        infeas = float(cost1[basis] @ tab[:, -1])
        if infeas > 1e-7 * max(1.0, np.abs(std_rhs).max()):
            return LpResult(np.full(n, np.nan), "infeasible", pivots=pivots)
        # drive zero-level artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= nz + m:
                row = tab[r, : nz + m]
                cand = np.nonzero(np.abs(row) > tol)[0]
                if cand.size == 0:
                    keep[r] = False
                    continue
                j = cand[0]
                tab[r] /= tab[r, j]
                others = np.arange(m) != r
                tab[others] -= np.outer(tab[others, j], tab[r])
                basis[r] = j
        tab = tab[keep]
        basis = basis[keep]
        std_matrix = std_matrix[keep]
        std_rhs = std_rhs[keep]
        kept_rows = np.nonzero(keep)[0]
    else:
        kept_rows = np.arange(m)

    cost2 = np.zeros(ncols)
    cost2[:nz] = czs
    allowed = np.zeros(ncols, dtype=bool)
    allowed[: nz + m] = True
    dtol = 1e-11
    for _ in range(5):
        status, p2 = _run_simplex(tab, basis, cost2, allowed, tol, max_pivots, dtol)
        pivots += p2
        if status != "optimal":
            return LpResult(np.full(n, np.nan), status, pivots=pivots)
        # refresh the tableau from the basis to shed accumulated pivot error
        try:
            fresh = np.linalg.solve(std_matrix[:, basis], np.column_stack([std_matrix, std_rhs]))
        except np.linalg.LinAlgError:
            break
        tab = fresh
        reduced = cost2 - cost2[basis] @ tab[:, :ncols]
        scale = max(1.0, float(np.abs(cost2[basis]).max(initial=0.0)))
        if not np.any((reduced < -dtol * scale) & allowed):
            break

    # Recompute the vertex from the final basis for accuracy.
    B = std_matrix[:, basis]
    try:
        zB = np.linalg.solve(B, std_rhs)
        pi = np.linalg.solve(B.T, cost2[basis])
    except np.linalg.LinAlgError:
        zB = tab[:, -1]
        pi = np.linalg.lstsq(B.T, cost2[basis], rcond=None)[0]
    zs = np.zeros(ncols)
    zs[basis] = np.maximum(zB, 0.0)
    z = zs[:nz] * cs
    x = offset + Tmap @ z

    duals_all = np.zeros(m)
    # d(obj)/d(rhs_i) = sign_i * pi_i * rs_i * c_scale; multiplier = -that
    duals_all[kept_rows] = -sign[kept_rows] * pi * rs[kept_rows] * c_scale
    duals = np.maximum(duals_all[:m0], 0.0)
    return LpResult(x, "optimal", float(c @ x), duals, pivots)


# ---------------------------------------------------------------------------
# Smooth convex programs
# ---------------------------------------------------------------------------

ObjectiveFn = Callable[[np.ndarray], tuple]
ConstraintFn = Callable[[np.ndarray], tuple]


@dataclass
class SmoothConvexProgram:
    """``min f0(x)  s.t.  f_i(x) <= 0,  lb < x < ub`` with convex ``f_i``.

    ``objective(x)`` returns ``(value, gradient, hessian_or_None)``;
    ``constraints(x)`` returns ``(values, jacobian)`` for all ``f_i`` at once;
    ``constraint_hessian(x, w)`` returns ``sum_i w_i * hess f_i(x)`` and may be
    omitted when every constraint is affine. ``x0`` is an optional strictly
    feasible starting point.
    """

    n: int
    objective: ObjectiveFn
    constraints: Optional[ConstraintFn] = None
    constraint_hessian: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        self.lb = np.full(self.n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).copy()
        self.ub = np.full(self.n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).copy()

    def eval_constraints(self, x):
        if self.constraints is None:
            return np.zeros(0), np.zeros((0, self.n))
        vals, jac = self.constraints(x)
        return np.asarray(vals, dtype=float).reshape(-1), np.asarray(jac, dtype=float).reshape(-1, self.n)


@dataclass
class ConvexResult:
    x: np.ndarray
    status: str  # optimal | infeasible | max_iterations
    objective: float = math.nan
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kkt_residual: float = math.inf
    newton_steps: int = 0

    def __iter__(self):
        yield self.x
        yield self.status


def _interior_start(lb, ub, hint=None):
    x = np.zeros(lb.size) if hint is None else np.asarray(hint, dtype=float).copy()
    for j in range(lb.size):
        lo, hi = lb[j], ub[j]
        if np.isfinite(lo) and np.isfinite(hi):
            width = hi - lo
            margin = 1e-3 * width
            if hint is None or not (lo + margin <= x[j] <= hi - margin):
                x[j] = lo + 0.5 * width if hint is None else min(max(x[j], lo + margin), hi - margin)
        elif np.isfinite(lo):
            if hint is None or x[j] <= lo:
                x[j] = lo + 1.0 if hint is None else lo + max(1e-3, 1e-3 * abs(lo))
        elif np.isfinite(hi):
            if hint is None or x[j] >= hi:
                x[j] = hi - 1.0 if hint is None else hi - max(1e-3, 1e-3 * abs(hi))
    return x


class _Barrier:
    def __init__(self, prog: SmoothConvexProgram):
        self.prog = prog
        self.has_lb = np.isfinite(prog.lb)
        self.has_ub = np.isfinite(prog.ub)
        self.n_box = int(self.has_lb.sum() + self.has_ub.sum())

    def strictly_feasible(self, x):
        p = self.prog
        if np.any(x[self.has_lb] <= p.lb[self.has_lb]) or np.any(x[self.has_ub] >= p.ub[self.has_ub]):
            return False
        vals, _ = p.eval_constraints(x)
        return bool(np.all(vals < 0)) and bool(np.all(np.isfinite(vals)))

    def value(self, x, t):
        p = self.prog
        vals, _ = p.eval_constraints(x)
        if np.any(~np.isfinite(vals)) or np.any(vals >= 0):
            return np.inf
        dl = x[self.has_lb] - p.lb[self.has_lb]
        du = p.ub[self.has_ub] - x[self.has_ub]
        if np.any(dl <= 0) or np.any(du <= 0):
            return np.inf
        f0 = p.objective(x)[0]
        if not np.isfinite(f0):
            return np.inf
        return t * f0 - np.sum(np.log(-vals)) - np.sum(np.log(dl)) - np.sum(np.log(du))

    def newton(self, x, t):
        p = self.prog
        f0, g0, H0 = p.objective(x)
        vals, J = p.eval_constraints(x)
        s = -vals
        w = 1.0 / s
        g = t * np.asarray(g0, dtype=float) + J.T @ w
        H = (t * np.asarray(H0, dtype=float)) if H0 is not None else np.zeros((p.n, p.n))
        H = H + (J.T * w**2) @ J
        if p.constraint_hessian is not None and vals.size:
            H = H + p.constraint_hessian(x, w)
        dl = np.zeros(p.n)
        du = np.zeros(p.n)
        dl[self.has_lb] = x[self.has_lb] - p.lb[self.has_lb]
        du[self.has_ub] = p.ub[self.has_ub] - x[self.has_ub]
        inv_l = np.where(self.has_lb, 1.0 / np.where(self.has_lb, dl, 1.0), 0.0)
        inv_u = np.where(self.has_ub, 1.0 / np.where(self.has_ub, du, 1.0), 0.0)
        g = g - inv_l + inv_u
        H[np.diag_indices_from(H)] += inv_l**2 + inv_u**2
        try:
            L = np.linalg.cholesky(H)
            step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        except np.linalg.LinAlgError:
            H[np.diag_indices_from(H)] += 1e-12 * max(1.0, np.abs(np.diag(H)).max())
            step = -np.linalg.lstsq(H, g, rcond=None)[0]
        return g, step

    def multipliers(self, x, t):
        p = self.prog
        vals, J = p.eval_constraints(x)
        mu = 1.0 / (t * -vals)
        nl = np.zeros(p.n)
        nu = np.zeros(p.n)
        nl[self.has_lb] = 1.0 / (t * (x[self.has_lb] - p.lb[self.has_lb]))
        nu[self.has_ub] = 1.0 / (t * (p.ub[self.has_ub] - x[self.has_ub]))
        g0 = np.asarray(p.objective(x)[1], dtype=float)
        stat = g0 + J.T @ mu - nl + nu
        return mu, stat


def _barrier_solve(prog, x, opts, stop=None):
    bar = _Barrier(prog)
    m_tot = prog.eval_constraints(x)[0].size + bar.n_box
    t = opts.t0
    steps = 0
    status = "optimal"
    while True:
        for _ in range(opts.max_iter):
            g, dx = bar.newton(x, t)
            dec = float(-g @ dx)
            if not np.isfinite(dec) or dec / 2.0 <= 1e-14:
                break
            phi = bar.value(x, t)
            step = 1.0
            if dec / 2.0 < 1e-3:
                # quadratic region: full steps, backtracking only to stay inside
                while step > 1e-14 and not np.isfinite(bar.value(x + step * dx, t)):
                    step *= opts.ls_beta
                cand = x + step * dx
                if step <= 1e-14:
                    break
            else:
                while step > 1e-14:
                    cand = x + step * dx
                    val = bar.value(cand, t)
                    if np.isfinite(val) and val <= phi - opts.ls_alpha * step * dec:
                        break
                    step *= opts.ls_beta
                else:
                    break
            moved = np.max(np.abs(cand - x)) > 1e-16 * max(1.0, float(np.max(np.abs(x))))
            x = cand
            steps += 1
            if not moved:
                break
            if stop is not None and stop(x):
                break
        else:
            status = "max_iterations"
            break
        if stop is not None and stop(x):
            break
        if m_tot == 0 or m_tot / t < opts.tol:
            break
        t *= opts.mu
    mu, stat = bar.multipliers(x, t)
    resid = max(float(np.max(np.abs(stat))) if stat.size else 0.0, 1.0 / t if m_tot else 0.0)
    mu_ls, resid_ls = _refit_multipliers(prog, x, mu)
    if resid_ls < resid:
        mu, resid = mu_ls, resid_ls
    return x, status, mu, resid, steps


def _refit_multipliers(prog, x, mu_barrier, active_tol=1e-7):
    """Least-squares multipliers on the near-active set and the resulting KKT residual.

    The residual is the largest of stationarity, complementarity and primal
    infeasibility. Barrier estimates ``1/(t s)`` degrade on stiff constraints,
    so refitting usually gives a tighter certificate at the same ``x``.
    """
    from scipy.optimize import nnls

    vals, J = prog.eval_constraints(x)
    n = prog.n
    rows = [J]
    gaps = [-vals]
    has_lb = np.isfinite(prog.lb)
    has_ub = np.isfinite(prog.ub)
    if has_lb.any():
        rows.append(-np.eye(n)[has_lb])
        gaps.append(x[has_lb] - prog.lb[has_lb])
    if has_ub.any():
        rows.append(np.eye(n)[has_ub])
        gaps.append(prog.ub[has_ub] - x[has_ub])
    G = np.vstack(rows)
    gap = np.concatenate(gaps)
    g0 = np.asarray(prog.objective(x)[1], dtype=float)
    row_norm = np.maximum(np.linalg.norm(G, axis=1), 1e-300)
    active = gap <= active_tol * np.maximum(1.0, row_norm)
    lam = np.zeros(G.shape[0])
    if active.any():
        lam_a, _ = nnls(G[active].T, -g0)
        lam[active] = lam_a
    stat = g0 + G.T @ lam
    comp = lam * np.maximum(gap, 0.0)
    infeas = np.maximum(-gap, 0.0)
    resid = float(max(np.max(np.abs(stat)), comp.max(initial=0.0), infeas.max(initial=0.0)))
    return lam[: vals.size], resid


def solve_smooth_convex(program: SmoothConvexProgram, opts: SolverOptions | None = None) -> ConvexResult:
    """Log-barrier interior-point solve.

    Uses ``program.x0`` if it is strictly feasible, otherwise a phase-I
    problem ``min s  s.t.  f_i(x) <= s`` finds a start; a phase-I optimum that
    does not go below zero is reported as ``infeasible``.
    """
    opts = opts or SolverOptions()
    bar = _Barrier(program)
    x = None
    if program.x0 is not None:
        cand = np.asarray(program.x0, dtype=float)
        if bar.strictly_feasible(cand):
            x = cand.copy()
    phase1_steps = 0
    if x is None:
        x, ok, phase1_steps = _phase_one(program, opts)
        if not ok:
            return ConvexResult(x, "infeasible", newton_steps=phase1_steps)
    x, status, mu, resid, steps = _barrier_solve(program, x, opts)
    f0 = float(program.objective(x)[0])
    if status == "optimal" and resid > opts.tol:
        status = "max_iterations" if resid > 1e3 * opts.tol else status
    return ConvexResult(x, status, f0, mu, resid, steps + phase1_steps)


def _phase_one(program: SmoothConvexProgram, opts: SolverOptions):
    n = program.n
    x0 = _interior_start(program.lb, program.ub, program.x0)
    vals0, _ = program.eval_constraints(x0)
    if vals0.size == 0:
        return x0, True, 0
    top = float(np.max(vals0))
    s0 = top + max(1.0, abs(top))
    s_floor = -max(1.0, abs(top))

    def obj(z):
        g = np.zeros(n + 1)
        g[-1] = 1.0
        return z[-1], g, None

    def cons(z):
        vals, J = program.eval_constraints(z[:-1])
        return vals - z[-1], np.hstack([J, -np.ones((vals.size, 1))])

    hess = None
    if program.constraint_hessian is not None:

        def hess(z, w):
            H = np.zeros((n + 1, n + 1))
            H[:n, :n] = program.constraint_hessian(z[:-1], w)
            return H

    # a loose box keeps the auxiliary barrier bounded below
    radius = 1e4 * max(1.0, float(np.max(np.abs(x0))))
    lb = np.where(np.isfinite(program.lb), program.lb, x0 - radius)
    ub = np.where(np.isfinite(program.ub), program.ub, x0 + radius)
    aux = SmoothConvexProgram(
        n + 1,
        obj,
        cons,
        hess,
        lb=np.append(lb, s_floor),
        ub=np.append(ub, np.inf),
    )
    z0 = np.append(x0, s0)
    p1_opts = SolverOptions(tol=min(1e-6, opts.tol * 1e2), max_iter=opts.max_iter, t0=opts.t0, mu=opts.mu,
                            ls_alpha=opts.ls_alpha, ls_beta=opts.ls_beta)
    margin = 1e-9 * max(1.0, abs(top))
    z, _, _, _, steps = _barrier_solve(aux, z0, p1_opts, stop=lambda z: z[-1] < -0.5 * abs(s_floor))
    x = z[:-1]
    ok = bool(z[-1] < -margin) and bar_ok(program, x)
    return x, ok, steps


def bar_ok(program, x):
    return _Barrier(program).strictly_feasible(x)
