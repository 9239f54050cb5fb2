import math

import numpy as np
import pytest
from conftest import make_instance

from wpbc.dynamic import run_dynamic
from wpbc.model import Allocation, Tolerances, check_feasibility, harvested_power, total_harvested_energy
from wpbc.static import (
    StaticOptions,
    linearized_energy,
    min_block_time,
    run_static,
    solve_power_subproblem,
    solve_time_subproblem,
)


def _energy_at(k, L_k, durations, p, inst):
    d = np.asarray(durations, dtype=float)
    tau = d[1:]
    beta = np.zeros(inst.K)
    beta[k] = L_k / tau[k]
    return total_harvested_energy(Allocation.static(d[0], tau, beta, p), k, inst)


# ---------------------------------------------------------------------------
# linearisation of the own-slot harvest
# ---------------------------------------------------------------------------


def test_linearization_exact_on_the_ray():
    inst = make_instance(K=2, seed=0)
    d = np.array([3.0, 1.2, 0.8])
    for Y in (0.1, 0.5, 0.93):
        lin = linearized_energy(0, Y, Y * d[1], d, inst.p_max, inst)
        assert lin == pytest.approx(_energy_at(0, Y * d[1], d, inst.p_max, inst), rel=1e-13)


def test_linearization_is_a_tangent_upper_bound():
    # tau f(P h (1 - L/tau)) is concave in (L, tau), so the tangent plane lies above it
    inst = make_instance(K=2, seed=0, p_max=50.0)
    d = np.array([3.0, 1.2, 0.8])
    for L in np.linspace(0.0, d[1], 15):
        lin = linearized_energy(0, 0.4, L, d, inst.p_max, inst)
        assert lin >= _energy_at(0, L, d, inst.p_max, inst) - 1e-15


def test_linearization_slope_is_negative():
    inst = make_instance(K=1, seed=2)
    d = np.array([2.0, 1.0])
    lo = linearized_energy(0, 0.5, 0.2, d, inst.p_max, inst)
    hi = linearized_energy(0, 0.5, 0.6, d, inst.p_max, inst)
    assert hi < lo


# ---------------------------------------------------------------------------
# subproblems
# ---------------------------------------------------------------------------


def test_time_subproblem_zero_demand():
    inst = make_instance(K=2, seed=0, r_min=0.0, p_c=0.0)
    sub = solve_time_subproblem(inst.p_max, inst)
    assert sub.status == "optimal"
    assert sub.tau0 == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(sub.tau, 0.0, atol=1e-12)


def _brute_force_time(p, inst, n=20001):
    # K = 1: tau_1 from throughput, tau_0 from the energy balance, scan beta
    beta = np.linspace(1e-6, 1.0, n)
    rate = inst.W * np.log2(1.0 + inst.snr_coeff[0] * beta * p)
    tau1 = inst.r_min[0] / rate
    own = harvested_power(inst.h[0] * p * (1.0 - beta), inst.eh)
    tau0 = np.maximum(0.0, (inst.p_c[0] - own) * tau1 / harvested_power(inst.h[0] * p, inst.eh))
    total = tau0 + tau1
    total[total > inst.T] = np.inf
    return p * total.min()


@pytest.mark.parametrize("seed", [2, 4, 6])
def test_time_subproblem_single_node(seed):
    inst = make_instance(K=1, seed=seed)
    ref = _brute_force_time(inst.p_max, inst)
    sub = solve_time_subproblem(inst.p_max, inst)
    assert sub.status == "optimal"
    assert sub.objective == pytest.approx(ref, rel=0.01)
    assert sub.objective <= ref * (1 + 1e-6)
    objs = [r["objective"] for r in sub.trace if not math.isnan(r["objective"])]
    assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))


def test_power_subproblem_throughput_binding():
    inst = make_instance(K=2, seed=0, p_c=0.0)
    tau = np.array([0.5, 0.8])
    beta = np.array([0.6, 0.9])
    res = solve_power_subproblem(1.0, tau, beta, inst)
    assert res.status == "optimal"
    need = (2.0 ** (inst.r_min / (inst.W * tau)) - 1.0) * inst.W * inst.N0 / (inst.xi * beta * inst.h * inst.g)
    assert res.p == pytest.approx(need.max(), rel=1e-12)


def test_power_subproblem_cap():
    inst = make_instance(K=2, seed=0)
    res = solve_power_subproblem(0.0, np.array([1e-4, 1e-4]), np.array([0.5, 0.5]), inst)
    assert res.status == "infeasible"


def test_power_subproblem_is_minimal():
    inst = make_instance(K=2, seed=0)
    bt = min_block_time(inst.p_max, inst)
    tau0, tau = bt.tau0 * 1.5, bt.tau * 1.3
    res = solve_power_subproblem(tau0, tau, bt.beta, inst)
    assert res.status == "optimal"
    assert res.p < inst.p_max
    strict = Tolerances(energy=1e-15, rate_rel=1e-12)

    def ok(p):
        a = Allocation.static(tau0, tau, bt.beta, p)
        return check_feasibility(a, inst, strict).feasible

    assert ok(res.p)
    assert not ok(res.p - 1e-6 * inst.p_max)


def test_min_block_time_edges():
    inst = make_instance(K=2, seed=0)
    assert min_block_time(inst.p_max, make_instance(K=2, seed=0, r_min=1e7)) is None
    free = min_block_time(inst.p_max, make_instance(K=2, seed=0, r_min=0.0))
    assert free.total == 0.0
    bt = min_block_time(inst.p_max, inst)
    a = Allocation.static(bt.tau0, bt.tau, bt.beta, inst.p_max)
    assert check_feasibility(a, inst).feasible


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", [0, 2, 4])
def test_static_not_below_dynamic(seed):
    inst = make_instance(K=2, seed=seed)
    s, d = run_static(inst), run_dynamic(inst)
    assert s.feasible and d.feasible
    assert s.energy >= d.energy - 1e-9
    assert check_feasibility(s.allocation, inst).feasible
    p = s.allocation.p
    assert np.all(p == s.allocation.p0) or s.allocation.tau0 == 0


def test_static_infeasible_sentinel():
    rep = run_static(make_instance(K=2, seed=0, r_min=1e6))
    assert not rep.feasible and rep.energy == 0.0 and rep.allocation.is_zero()


def test_static_traces_non_increasing(feasible_default_instance):
    rep = run_static(feasible_default_instance)
    assert rep.feasible
    e = [r["energy"] for r in rep.trace if not math.isnan(r["energy"])]
    assert all(b <= a + 1e-9 for a, b in zip(e, e[1:]))
    for row in rep.trace:
        sca = [v for v in row["sca"] if not math.isnan(v)]
        assert all(b <= a + 1e-9 for a, b in zip(sca, sca[1:]))
    assert len(rep.trace) == rep.iterations
    assert rep.trace[-1]["best"] == pytest.approx(rep.energy, rel=1e-6)


def test_literal_bcd_without_power_search():
    inst = make_instance(K=2, seed=0)
    lit = run_static(inst, StaticOptions(power_search=False))
    full = run_static(inst)
    assert lit.feasible
    assert full.energy <= lit.energy + 1e-9
