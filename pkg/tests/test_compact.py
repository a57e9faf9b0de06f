import numpy as np
import pytest

from iegs_attack.milp import solve
from iegs_attack.milp.compact import closed_form_rows, compact_for
from iegs_attack.oracle import evaluate_dispatch


def test_two_bus_dims(two_bus_compact):
    assert two_bus_compact.dims() == {"n": 2, "q": 4, "r": 2, "p": 12, "m": 6}


def test_row_count_matches_closed_form(two_bus, mini, two_bus_compact, mini_compact):
    assert two_bus_compact.p == closed_form_rows(two_bus)
    assert mini_compact.p == closed_form_rows(mini)


def test_mini_groups(mini_compact):
    g = mini_compact.group_counts()
    assert g["pwl"] == 8
    assert sum(g.values()) == mini_compact.p


def test_every_equality_row_has_a_partner(mini_compact):
    pair = mini_compact.pair
    for i, j in enumerate(pair):
        if j >= 0:
            assert pair[j] == i
            assert np.allclose(mini_compact.E[i], -mini_compact.E[j])


@pytest.mark.parametrize("name", ["two_bus", "mini"])
def test_lower_level_matches_direct_dispatch(name, request):
    inst = request.getfixturevalue(name)
    cb = request.getfixturevalue(f"{name}_compact")
    x = np.zeros(inst.n_attack)
    x[0], x[1] = -0.3, 0.3
    for z in cb.possible_z():
        lp = solve(cb.lower_lp(cb.pad_x(x), z), backend="highs")
        ref = evaluate_dispatch(inst, x, z)
        assert lp.optimal == ref.feasible
        if ref.feasible:
            assert lp.objective == pytest.approx(ref.cost, abs=1e-7)


def test_no_attack_cost(two_bus_compact, mini_compact):
    assert solve(two_bus_compact.lower_milp(two_bus_compact.pad_x([0, 0]))).objective == pytest.approx(690.0)
    lm = mini_compact.lower_milp(mini_compact.pad_x(np.zeros(4)))
    assert solve(lm, backend="highs").objective == pytest.approx(170.0)


def test_budget_adds_columns(two_bus):
    cb = compact_for(two_bus, budget=4)
    assert cb.n_base == 2
    assert cb.x_names[:2] == ["dp[PL1]", "dp[PL2]"]
    assert sum(n.startswith("used[") for n in cb.x_names) == 3
    assert np.all(cb.x_integer[-3:])


def test_pad_x_keeps_base(mini):
    cb = compact_for(mini, violation=True)
    x = cb.pad_x([-1.2, 1.2, -2.4, 2.4])
    assert x.size == cb.n
    assert x[:4].tolist() == [-1.2, 1.2, -2.4, 2.4]
    assert np.all(x[4:] == 0.0)


def test_units_fixed(two_bus_compact):
    cb = two_bus_compact.with_units_fixed()
    assert cb.possible_z() == [(1, 1)]
