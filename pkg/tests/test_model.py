import math

import numpy as np
import pytest

from wpbc.model import (
    TABLE1_EH,
    Allocation,
    EhParams,
    NetworkInstance,
    backscatter_throughput,
    check_feasibility,
    dbm_to_watts,
    harvested_energy_all,
    harvested_power,
    harvested_power_inverse,
    harvested_power_slope,
    pb_energy,
    total_harvested_energy,
    watts_to_dbm,
)


def test_dbm_conversion():
    assert dbm_to_watts(30) == pytest.approx(1.0, rel=1e-15)
    assert dbm_to_watts(0) == pytest.approx(1e-3, rel=1e-15)
    assert dbm_to_watts(23) == pytest.approx(0.19953, abs=5e-6)
    assert watts_to_dbm(dbm_to_watts(17.5)) == pytest.approx(17.5)


def test_eh_curve_points():
    eh = TABLE1_EH
    assert harvested_power(0.0, eh) == 0.0
    assert eh.saturation == pytest.approx(0.48358, abs=5e-6)
    assert harvested_power(1e12, eh) == pytest.approx(eh.saturation, rel=1e-9)
    assert harvested_power(eh.v, eh) == pytest.approx(eh.saturation / 2, rel=1e-14)
    assert harvested_power(eh.v, eh) == pytest.approx(0.24179, abs=5e-6)
    # same curve in the textbook form
    x = np.linspace(0, 5, 11)
    textbook = (eh.a * x + eh.d) / (x + eh.v) - eh.d / eh.v
    np.testing.assert_allclose(harvested_power(x, eh), textbook, rtol=1e-12, atol=1e-15)


def test_eh_slope():
    eh = TABLE1_EH
    exact = (eh.a * eh.v - eh.d) / eh.v**2
    assert harvested_power_slope(0.0, eh) == pytest.approx(exact, rel=1e-15)
    # the quoted 0.58542 is a rounded value; the expression gives 0.585449
    assert harvested_power_slope(0.0, eh) == pytest.approx(0.58542, abs=5e-5)
    x = np.geomspace(1e-6, 1e6, 50)
    s = harvested_power_slope(x, eh)
    assert np.all(s > 0)
    assert harvested_power_slope(1e9, eh) < 1e-15
    fd = (harvested_power(x * (1 + 1e-6), eh) - harvested_power(x * (1 - 1e-6), eh)) / (2e-6 * x)
    np.testing.assert_allclose(s, fd, rtol=1e-6, atol=1e-14)


def test_eh_inverse_roundtrip():
    eh = TABLE1_EH
    x = np.geomspace(1e-8, 1e3, 40)
    np.testing.assert_allclose(harvested_power_inverse(harvested_power(x, eh), eh), x, rtol=1e-8)
    assert harvested_power_inverse(eh.saturation, eh) == math.inf
    assert harvested_power_inverse(0.0, eh) == 0.0


def test_eh_params_reject_nonpositive_gain():
    with pytest.raises(ValueError):
        EhParams(1.0, 2.0, 1.0)


def _inst(K=2, **kw):
    return NetworkInstance.build(np.full(K, 1e-4), np.full(K, 1e-4), 1000.0, 1e-5, **kw)


def test_throughput_edge_cases():
    inst = _inst()
    assert backscatter_throughput(1.0, 0.0, 0.1, 1e-4, 1e-4, inst) == 0.0
    assert backscatter_throughput(0.0, 0.7, 0.1, 1e-4, 1e-4, inst) == 0.0
    # xi beta p h g = W N0 gives log2(2) = 1 bit per Hz per second
    beta, h, g = 0.5, 1e-4, 2e-4
    p = inst.W * inst.N0 / (inst.xi * beta * h * g)
    assert backscatter_throughput(3.0, beta, p, h, g, inst) == pytest.approx(inst.W * 3.0, rel=1e-13)


def test_harvested_energy_zero_and_own_slot():
    inst = _inst()
    z = Allocation.zeros(2)
    assert np.all(harvested_energy_all(z, inst) == 0)
    a = Allocation(0.0, [1.0, 0.0], [1.0, 0.0], 0.0, [0.1, 0.0])
    assert total_harvested_energy(a, 0, inst) == 0.0


def test_harvested_energy_matches_elementary_sum():
    eh = TABLE1_EH
    h = np.array([3e-4, 7e-5])
    inst = NetworkInstance.build(h, np.array([1e-4, 2e-4]), 1000.0, 1e-5)
    a = Allocation(2.0, [1.5, 0.7], [0.3, 0.8], 0.12, [0.05, 0.19])

    def f(x):
        return (eh.a * x + eh.d) / (x + eh.v) - eh.d / eh.v

    e0 = 2.0 * f(0.12 * h[0]) + 1.5 * f(0.7 * 0.05 * h[0]) + 0.7 * f(0.19 * h[0])
    e1 = 2.0 * f(0.12 * h[1]) + 1.5 * f(0.05 * h[1]) + 0.7 * f(0.2 * 0.19 * h[1])
    np.testing.assert_allclose(harvested_energy_all(a, inst), [e0, e1], rtol=1e-10)


def test_pb_energy():
    assert pb_energy(Allocation.zeros(3)) == 0.0
    a = Allocation.static(1.0, [2.0, 0.5], [0.5, 0.5], 0.3)
    assert pb_energy(a) == pytest.approx(0.3 * 3.5)
    rng = np.random.default_rng(1)
    d, p = rng.uniform(0, 2, 4), rng.uniform(0, 0.2, 4)
    b = Allocation(d[0], d[1:], np.full(3, 0.5), p[0], p[1:])
    assert pb_energy(b) == pytest.approx(float(d @ p), rel=1e-14)


def test_check_feasibility():
    inst = _inst()
    rep = check_feasibility(Allocation.zeros(2), inst)
    assert not rep.feasible and np.all(rep.throughput_slack < 0)
    over = Allocation.static(inst.T - 1.0, [1.0, 1.0], [0.5, 0.5], 0.1)
    rep = check_feasibility(over, inst)
    assert not rep.feasible
    assert rep.time_slack == pytest.approx(-1.0)


def test_instance_validation():
    with pytest.raises(ValueError):
        NetworkInstance.build([1e-4], [1e-4], 1.0, 0.0, xi=1.0)
    inst = _inst(3)
    assert inst.K == 3
    assert inst.replace(T=5.0).T == 5.0
