import numpy as np
import pytest

from iegs_attack.instance import build_ptdf, dc_flows
from iegs_attack.milp import Model, solve
from iegs_attack.stealth import (
    AttackVector,
    StealthError,
    attack_region,
    budget_block,
    build_attack_block,
    derive_falsified,
    derive_gas_deltas,
    gas_residuals,
    in_region,
    power_injection_deltas,
    region_vertices,
)

from conftest import random_region_points


def block_feasible(block, fixed: dict[str, float]) -> bool:
    m = Model("block")
    cols = [m.add_var(n, lo, hi, binary=bool(i)) for n, lo, hi, i in zip(block.names, block.lo, block.hi, block.integer)]
    for k in range(block.n_rows):
        nz = np.flatnonzero(block.A[k])
        m.add_row([cols[j] for j in nz], block.A[k, nz], "<=", block.b[k])
    for name, v in fixed.items():
        m.fix(cols[block.index(name)], v)
    return solve(m, backend="highs").optimal


def test_region_box_and_balance(two_bus):
    assert in_region(two_bus, [-1.05, 1.05])
    assert not in_region(two_bus, [-1.06, 1.06])  # PL1 box is 0.3 * 3.5
    assert not in_region(two_bus, [-1.0, 0.5])  # unbalanced


def test_region_vertices_inside(mini):
    for v in region_vertices(mini):
        assert in_region(mini, v)


def test_region_vertices_two_bus(two_bus):
    verts = {tuple(np.round(v, 9)) for v in region_vertices(two_bus)}
    assert verts == {(-1.05, 1.05), (1.05, -1.05)}


@pytest.mark.parametrize("budget,ok", [(4, True), (3, False)])
def test_budget_counts_loads_and_lines(two_bus, budget, ok):
    # two load measurements and one line flow (weight 2) change
    block = budget_block(two_bus, budget)
    assert block_feasible(block, {"dp[PL1]": -1.0, "dp[PL2]": 1.0}) is ok


def test_budget_allows_no_attack(two_bus):
    assert block_feasible(budget_block(two_bus, 0), {"dp[PL1]": 0.0, "dp[PL2]": 0.0})


def test_negative_budget(two_bus):
    with pytest.raises(StealthError):
        budget_block(two_bus, -1)


def test_extension_shrinks_region(two_bus):
    # the estimated line flow sits at its limit of 2; moving load onto bus 1
    # (dp1 > 0) lowers it, moving load off bus 1 would push it over
    full = build_attack_block(two_bus)
    ext = build_attack_block(two_bus, violation=True)
    assert block_feasible(full, {"dp[PL1]": -1.0, "dp[PL2]": 1.0})
    assert not block_feasible(ext, {"dp[PL1]": -1.0, "dp[PL2]": 1.0})
    assert block_feasible(ext, {"dp[PL1]": 1.0, "dp[PL2]": -1.0})


def test_extension_is_subset(mini):
    ext = build_attack_block(mini, violation=True)
    names = attack_region(mini).names
    for x in random_region_points(mini, 10, 5):
        if block_feasible(ext, dict(zip(names, x))):
            assert in_region(mini, x)


def test_power_flow_deltas_match_b_theta(ring):
    ptdf = build_ptdf(ring.power)
    x = np.array([0.5, -0.3, -0.2])
    f = derive_falsified(ring, x, ptdf)
    inj = power_injection_deltas(AttackVector.from_x(ring, x), ring.power)
    assert np.allclose(f.dp_lines, dc_flows(ring.power, inj), atol=1e-12)


def test_gas_deltas_satisfy_network(mini):
    for x in random_region_points(mini, 20, 11):
        av = AttackVector.from_x(mini, x)
        bal, rel = gas_residuals(mini, av, derive_gas_deltas(av, mini))
        assert bal <= 1e-8 and rel <= 1e-8


def test_zero_attack_changes_nothing(mini):
    f = derive_falsified(mini, np.zeros(mini.n_attack))
    for arr in (f.dp_lines, f.dg_pipes, f.dg_compressors, f.dpi):
        assert np.allclose(arr, 0.0)


def test_wrong_length_rejected(mini):
    with pytest.raises(StealthError):
        AttackVector.from_x(mini, [0.0])
