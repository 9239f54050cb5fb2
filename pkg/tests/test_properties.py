import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from wpbc.dynamic import run_dynamic
from wpbc.model import (
    EhParams,
    NetworkInstance,
    backscatter_throughput,
    check_feasibility,
    harvested_power,
)
from wpbc.solvers import LpProblem, solve_lp
from wpbc.static import run_static

eh_params = st.tuples(st.floats(0.5, 5.0), st.floats(0.01, 2.0), st.floats(0.1, 3.0)).filter(
    lambda t: t[0] * t[2] - t[1] > 1e-3).map(lambda t: EhParams(*t))


@given(eh_params, st.floats(0.0, 100.0), st.floats(1e-3, 10.0))
def test_eh_increasing_concave_bounded(eh, x, dx):
    f0, f1, f2 = harvested_power([x, x + dx, x + 2 * dx], eh)
    assert 0 <= f0 < f1 < f2 < eh.saturation * (1 + 1e-12)
    assert f2 - 2 * f1 + f0 <= 1e-12


@given(st.floats(0.0, 5.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_throughput_linear_in_time(tau, beta, p):
    inst = NetworkInstance.build([1e-4], [1e-4], 1.0, 0.0)
    one = backscatter_throughput(1.0, beta, p, 1e-4, 1e-4, inst)
    assert np.isclose(backscatter_throughput(tau, beta, p, 1e-4, 1e-4, inst), tau * one, rtol=1e-12)


tiny_instances = st.builds(
    lambda K, h, g, r, pc: NetworkInstance.build(h[:K], g[:K], r, pc),
    st.integers(1, 2),
    st.lists(st.floats(5e-5, 2e-3), min_size=2, max_size=2).map(np.array),
    st.lists(st.floats(5e-5, 2e-3), min_size=2, max_size=2).map(np.array),
    st.floats(1e3, 8e4),
    st.floats(1e-5, 5e-4),
)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(tiny_instances)
def test_schemes_return_feasible_ordered_solutions(inst):
    d, s = run_dynamic(inst), run_static(inst)
    for rep in (d, s):
        assert rep.energy >= 0
        if rep.feasible:
            assert check_feasibility(rep.allocation, inst).feasible
        else:
            assert rep.energy == 0 and rep.allocation.is_zero()
    if d.feasible and s.feasible:
        assert d.energy <= s.energy + 1e-9
        assert abs(d.allocation.durations.sum() - inst.T) <= 1e-6 * inst.T


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lp_matches_highs(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 9)), int(rng.integers(1, 9))
    A = rng.normal(size=(m, n))
    b = A @ rng.uniform(0, 1, n) + rng.uniform(-0.5, 1, m)
    c = rng.normal(size=n)
    ub = rng.uniform(0.5, 3, n)
    ref = linprog(c, A_ub=A, b_ub=b, bounds=list(zip(np.zeros(n), ub)), method="highs")
    res = solve_lp(LpProblem(c, A, b, np.zeros(n), ub))
    if ref.status == 2:
        assert res.status == "infeasible"
    else:
        assert res.status == "optimal"
        assert abs(res.objective - ref.fun) <= 1e-8 * max(1.0, abs(ref.fun))
