import numpy as np
import pytest

from iegs_attack.instance import instance_to_dict, load_instance
from iegs_attack.oracle import (
    MAX_R,
    OracleCapError,
    brute_force_bilevel,
    classify_z,
    evaluate_dispatch,
    evaluate_realized_cost,
    split_z,
)


def test_no_attack_dispatch(two_bus):
    r = evaluate_dispatch(two_bus, [0.0, 0.0])
    assert r.feasible
    assert r.cost == pytest.approx(690.0)
    assert np.allclose(r.p_gen, [5.5, 4.5])
    assert np.allclose(r.line_flows, [2.0])


def test_both_units_cannot_serve_the_shift(two_bus):
    # G1 >= 5 at bus 1 with only 2.5 MW of local load overloads the line
    assert not evaluate_dispatch(two_bus, [-1.0, 1.0], (1, 1)).feasible


def test_shutdown_dispatch(two_bus):
    r = evaluate_dispatch(two_bus, [-1.05, 1.05])
    assert r.units == (0, 1)
    assert r.cost == pytest.approx(2155.0)


def test_realized_cost(two_bus):
    rc = evaluate_realized_cost(two_bus, [-1.0, 1.0])
    assert rc.falsified.units == (0, 1)
    assert rc.realized_cost == pytest.approx(2050.0)
    assert np.allclose(rc.realized.s_power, [3.5, 1.5])


def test_realized_policy_checked(two_bus):
    with pytest.raises(ValueError):
        evaluate_realized_cost(two_bus, [0, 0], policy="other")


def test_two_bus_partition(two_bus):
    cls = classify_z(two_bus)
    assert set(cls.mu()) == {(0, 0), (0, 1)}
    assert set(cls.nu()) == {(1, 0), (1, 1)}
    assert cls.verdict((1, 1)) is False
    w = cls.witness[cls.z.index((1, 1))]
    assert not evaluate_dispatch(two_bus, w, (1, 1)).feasible


def test_unordered_segments_are_nu(mini):
    units, segs = split_z(mini, (1, 1, 1))
    assert units == (1, 1) and segs == (1,)
    cls = classify_z(mini)
    assert len(cls.z) == 8


def test_brute_force_two_bus(two_bus):
    bf = brute_force_bilevel(two_bus, points=41)
    assert bf.value == pytest.approx(2155.0, abs=1e-6)
    assert np.allclose(bf.x, [-1.05, 1.05])


def test_brute_force_fixed_units(two_bus):
    assert brute_force_bilevel(two_bus, points=41, units_on=True).value == pytest.approx(700.0, abs=1e-6)


def test_caps(two_bus):
    d = instance_to_dict(two_bus)
    gens = d["power"]["generators"]
    for k in range(MAX_R):
        gens.append({**gens[1], "id": f"X{k}", "p_min": 0.0})
    with pytest.raises(OracleCapError):
        classify_z(load_instance(d))
