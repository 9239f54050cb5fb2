import numpy as np
import pytest
from conftest import make_instance

from wpbc.baselines import run_ee_max, run_throughput_max
from wpbc.dynamic import run_dynamic
from wpbc.model import check_feasibility, node_throughput


@pytest.fixture(scope="module")
def inst():
    return make_instance(K=2, seed=0)


def test_throughput_max_uses_full_power(inst):
    rep = run_throughput_max(inst)
    assert rep.feasible
    assert rep.energy == pytest.approx(inst.p_max * inst.T, rel=1e-12)
    assert check_feasibility(rep.allocation, inst).feasible
    assert rep.extra["throughput_bits"] == pytest.approx(node_throughput(rep.allocation, inst).sum(), rel=1e-9)
    assert rep.energy >= run_dynamic(inst).energy


def test_throughput_max_beats_the_minimum_energy_point(inst):
    # the dynamic solution only meets the demand; the baseline delivers more bits
    rep = run_throughput_max(inst)
    assert rep.extra["throughput_bits"] > inst.r_min.sum()


def test_ee_max(inst):
    rep = run_ee_max(inst)
    assert rep.feasible
    assert rep.energy == pytest.approx(inst.p_max * inst.T, rel=1e-12)
    q = [r["q"] for r in rep.trace]
    assert all(b >= a for a, b in zip(q, q[1:]))
    thr = run_throughput_max(inst).extra["throughput_bits"]
    assert rep.extra["ee_bits_per_joule"] == pytest.approx(thr / rep.energy, rel=1e-12)


@pytest.mark.parametrize("run", [run_throughput_max, run_ee_max])
def test_infeasible_sentinel(run):
    rep = run(make_instance(K=2, seed=0, r_min=1e6))
    assert not rep.feasible
    assert rep.energy == 0.0
    assert rep.allocation.is_zero()


def test_unused_nodes_get_zero_beta():
    inst = make_instance(K=2, seed=0)
    rep = run_throughput_max(inst)
    b = rep.allocation.beta
    assert np.all((b >= 0) & (b <= 1))
