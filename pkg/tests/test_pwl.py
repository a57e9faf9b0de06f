import numpy as np
import pytest

from iegs_attack.milp import solve
from iegs_attack.pwl import (
    build_block,
    build_scheme,
    error_bound,
    report_rows,
    segment_from_sigma,
    sigma_is_ordered,
    weymouth,
)


def test_weymouth_is_odd():
    g = np.array([-3.0, -0.5, 0.0, 2.0])
    assert np.allclose(weymouth(g), [-9.0, -0.25, 0.0, 4.0])


@pytest.mark.parametrize("segments", [2, 4, 8, 16])
def test_exact_at_breakpoints(segments):
    s = build_scheme(32.0, segments)
    assert np.max(np.abs(s.evaluate(s.breakpoints) - weymouth(s.breakpoints))) == 0.0
    assert error_bound(s).min_error == 0.0


def test_zero_is_a_breakpoint():
    s = build_scheme(7.3, 6)
    assert 0.0 in s.breakpoints


@pytest.mark.parametrize("segments", [2, 4, 8, 16])
def test_closed_form_error_matches_sampling(segments):
    s = build_scheme(10.0, segments)
    g = np.linspace(-10.0, 10.0, 400_001)
    g = np.union1d(g, (s.breakpoints[:-1] + s.breakpoints[1:]) / 2)
    sampled = np.max(np.abs(weymouth(g) - s.evaluate(g)))
    assert error_bound(s).max_error == pytest.approx(sampled, abs=1e-9)


def test_error_shrinks_with_segments():
    errs = [error_bound(build_scheme(20.0, k)).max_error for k in (4, 8, 16)]
    assert errs[0] >= errs[1] >= errs[2]
    # quadratic: halving the segment length quarters the error
    assert errs[1] == pytest.approx(errs[0] / 4)


def test_pressure_error_scales_with_constant():
    s = build_scheme(4.0, 4)
    assert error_bound(s, 8.0).max_pressure_error == pytest.approx(error_bound(s).max_error / 8.0)


def test_odd_segments_rejected():
    with pytest.raises(ValueError):
        build_scheme(1.0, 3)
    with pytest.raises(ValueError):
        build_scheme(0.0, 4)


def test_fill_reconstructs_flow_and_value():
    s = build_scheme(5.0, 4)
    for g in (-5.0, -3.1, 0.0, 1.2, 5.0):
        t, sigma = s.fill(g)
        assert s.breakpoints[0] + t.sum() == pytest.approx(g)
        assert s.offsets[0] + s.slopes @ t == pytest.approx(float(s.evaluate(g)))
        assert sigma_is_ordered(sigma)


def test_sigma_helpers():
    assert sigma_is_ordered([1, 1, 0])
    assert not sigma_is_ordered([0, 1, 0])
    assert segment_from_sigma([1, 1, 0]) == 2


@pytest.mark.parametrize("g", [-6.0, -2.5, 0.7, 4.4])
def test_block_pins_value(g):
    s = build_scheme(6.0, 4)
    m, blk = build_block(s)
    m.fix(blk.flow, g)
    for sense in (False, True):
        m.set_objective([blk.value], [1.0], maximize=sense)
        sol = solve(m)
        assert sol.optimal
        assert sol.x[blk.value] == pytest.approx(float(s.evaluate(g)), abs=1e-7)
        blk.assert_ordering(sol.x)


def test_relaxed_block_is_loose():
    from iegs_attack.milp.model import Model
    from iegs_attack.pwl import add_block

    s = build_scheme(6.0, 4)
    m = Model()
    g = m.add_var("g", -6.0, 6.0)
    f = m.add_var("f", -np.inf, np.inf)
    add_block(m, s, g, f, relax=True)
    m.fix(g, 0.0)
    m.set_objective([f], [1.0], maximize=True)
    assert solve(m).objective > 1.0


def test_report_rows():
    rows = report_rows(build_scheme(4.0, 8))
    assert len(rows) == 8
    assert all(r["breakpoint_error"] == 0.0 for r in rows)
    assert max(r["max_error"] for r in rows) == pytest.approx(0.25)
