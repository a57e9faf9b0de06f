import numpy as np
import pytest

from iegs_attack.bilevel import (
    CONVERGED,
    RDParams,
    build_master,
    build_sp2_kkt,
    classify_by_sp2,
    min_violation,
    solve_om,
    solve_sp1,
    solve_sp2,
    sp2_size_table,
)
from iegs_attack.instance import instance_to_dict, load_instance
from iegs_attack.milp import solve
from iegs_attack.milp.compact import compact_for

from conftest import HIGHS


def monotone_per_epoch(log):
    by_epoch = {}
    for row in log:
        by_epoch.setdefault(row["epoch"], []).append(row)
    for rows in by_epoch.values():
        ub = [r["ub"] for r in rows]
        lb = [r["lb"] for r in rows]
        if any(b > a + 1e-9 for a, b in zip(ub, ub[1:])):
            return False
        if any(b < a - 1e-9 for a, b in zip(lb, lb[1:])):
            return False
    return True


def test_params_validation():
    with pytest.raises(ValueError):
        RDParams(epsilon=0)
    with pytest.raises(ValueError):
        RDParams(rho=-1)


def test_sp1_no_attack(two_bus_compact):
    r = solve_sp1(two_bus_compact, [0.0, 0.0])
    assert r.value == pytest.approx(690.0)
    assert r.z == (1, 1)


def test_sp1_shutdown_response(two_bus_compact):
    # with load moved to bus 2 the cheapest answer shuts G1 down
    r = solve_sp1(two_bus_compact, [-1.05, 1.05])
    assert r.value == pytest.approx(2155.0)
    assert r.z == (0, 1)


def test_om_two_bus(runs):
    r = runs("two-bus", "om")
    assert r.status == CONVERGED
    assert r.objective == pytest.approx(2155.0, abs=1e-6)
    assert np.allclose(r.x, [-1.05, 1.05])
    assert r.z == (0, 1)
    assert r.iterations <= 4
    assert monotone_per_epoch(r.log)


def test_om_log_rows(runs):
    log = runs("two-bus", "om").log
    assert [row["k"] for row in log] == list(range(1, len(log) + 1))
    assert log[-1]["ub"] - log[-1]["lb"] <= 1e-4


def test_urd_two_bus(runs):
    r = runs("two-bus", "urd")
    assert r.objective <= runs("two-bus", "om").objective + 1e-6
    assert r.suboptimal_warning


def test_fixed_commitment_two_bus(runs):
    r = runs("two-bus", "fixed")
    assert r.objective == pytest.approx(700.0, abs=1e-6)
    assert np.allclose(r.y[:2], [5.0, 5.0])


@pytest.mark.parametrize("tau,value", [(0.0, 690.0), (0.1, 697.0)])
def test_small_tau_keeps_commitment(two_bus, tau, value):
    d = instance_to_dict(two_bus)
    d["attack"]["tau_p"] = tau
    r = solve_om(compact_for(load_instance(d)))
    assert r.objective == pytest.approx(value, abs=1e-6)


def test_budget_three_blocks_the_attack(two_bus):
    # the shutdown attack needs four measurement changes
    assert solve_om(compact_for(two_bus, budget=4)).objective == pytest.approx(2155.0)
    assert solve_om(compact_for(two_bus, budget=3)).objective == pytest.approx(690.0)


def test_sp2_two_bus(two_bus_compact):
    want = {(0, 0): 0.0, (0, 1): 0.0, (1, 0): 0.55, (1, 1): 0.55}
    for z, v in want.items():
        r = solve_sp2(two_bus_compact, z)
        assert r.value == pytest.approx(v, abs=1e-7)
        assert r.feasible_everywhere == (v == 0.0)


def test_sp2_witness_is_shift_to_bus_2(two_bus_compact):
    r = solve_sp2(two_bus_compact, (1, 1))
    assert np.allclose(r.x[:2], [-1.05, 1.05])


def test_sp2_direct_kkt_agrees(two_bus_compact):
    for z in two_bus_compact.all_z():
        direct = solve(build_sp2_kkt(two_bus_compact, z), backend="highs")
        assert direct.objective == pytest.approx(solve_sp2(two_bus_compact, z).value, abs=1e-7)


def test_sp2_size_table(two_bus_compact):
    cb = two_bus_compact
    t = sp2_size_table(cb)
    assert t["dualized"]["variables"] == cb.m + cb.n + cb.p
    assert t["dualized"]["constraints"] == 3 * cb.m + cb.n + 2 * cb.p + cb.q
    assert t["direct-kkt"]["variables"] > t["dualized"]["variables"]


def test_classify_by_sp2(two_bus_compact):
    res = classify_by_sp2(two_bus_compact)
    assert {z for z, r in res.items() if r.feasible_everywhere} == {(0, 0), (0, 1)}


def test_min_violation(two_bus_compact):
    # every commitment has some attack it survives (x = +shift)
    for z in two_bus_compact.all_z():
        assert min_violation(two_bus_compact, z) == pytest.approx(0.0, abs=1e-9)


def test_master_with_empty_pool_is_relaxed(two_bus_compact):
    mp = build_master(two_bus_compact, [], RDParams())
    sol = solve(mp.model)
    assert sol.optimal
    assert sol.objective >= 2155.0 - 1e-6


def test_kkt_r_two_bus(runs):
    r = runs("two-bus", "kktr")
    assert r.objective == pytest.approx(2155.0, abs=1e-4)
    assert not r.diagnostics.unsound


@pytest.mark.slow
def test_om_mini(runs):
    r = runs("mini", "om")
    assert r.status == CONVERGED
    assert r.objective == pytest.approx(197.2, abs=1e-4)
    assert r.iterations <= 2 ** 3
    assert monotone_per_epoch(r.log)


@pytest.mark.slow
def test_fixed_commitment_mini(runs):
    assert runs("mini", "fixed").objective == pytest.approx(183.4, abs=1e-4)


@pytest.mark.slow
def test_urd_mini(runs):
    r = runs("mini", "urd")
    assert r.objective <= runs("mini", "om").objective + 1e-4


def test_sp2_mini_matches_classification(mini_compact):
    res = classify_by_sp2(mini_compact, params=HIGHS)
    assert len(res) == 2 ** mini_compact.r
    assert any(r.feasible_everywhere for r in res.values())
