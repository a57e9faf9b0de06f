import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from iegs_attack.bilevel import solve_sp1
from iegs_attack.instance import build_ptdf, dc_flows
from iegs_attack.milp import Model, solve
from iegs_attack.milp.duality import dualize, primal_row_form
from iegs_attack.oracle import evaluate_dispatch
from iegs_attack.pwl import build_scheme, error_bound, weymouth
from iegs_attack.stealth import AttackVector, derive_falsified, derive_gas_deltas, gas_residuals, in_region, power_injection_deltas

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])

limits = st.floats(0.1, 100.0, allow_nan=False)
even_k = st.integers(1, 12).map(lambda k: 2 * k)


@FAST
@given(limits, even_k, st.floats(-1.0, 1.0))
def test_pwl_interpolates_and_bounds(limit, k, frac):
    s = build_scheme(limit, k)
    g = frac * limit
    err = abs(float(s.evaluate(g)) - float(weymouth(g)))
    assert err <= error_bound(s).max_error * (1 + 1e-9) + 1e-12
    # chords of a convex branch lie above it, of a concave branch below
    if g > 0:
        assert s.evaluate(g) >= weymouth(g) - 1e-9 * limit ** 2
    elif g < 0:
        assert s.evaluate(g) <= weymouth(g) + 1e-9 * limit ** 2


@FAST
@given(limits, even_k)
def test_pwl_breakpoints_exact(limit, k):
    s = build_scheme(limit, k)
    assert np.all(s.evaluate(s.breakpoints) == weymouth(s.breakpoints))


@FAST
@given(limits, even_k)
def test_pwl_error_halves_quadratically(limit, k):
    a = error_bound(build_scheme(limit, k)).max_error
    b = error_bound(build_scheme(limit, 2 * k)).max_error
    assert b <= a + 1e-12
    assert b == pytest.approx(a / 4, rel=1e-9)


def box_lp(seed, q, rows):
    rng = np.random.default_rng(seed)
    E = np.vstack([np.eye(q), -np.eye(q), rng.normal(size=(rows, q))])
    h = np.concatenate([rng.uniform(0.5, 3, q), rng.uniform(0.5, 3, q), rng.uniform(0.1, 5, rows)])
    return E, h, rng.normal(size=q)


@FAST
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(0, 6))
def test_dualize_strong_duality(seed, q, rows):
    E, h, c = box_lp(seed, q, rows)
    p = solve(primal_row_form(E, h, c))
    d = solve(dualize(E, h, c))
    assert p.optimal and d.optimal
    assert p.objective == pytest.approx(d.objective, abs=1e-7)


@FAST
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(0, 6))
def test_backends_agree_on_lps(seed, q, rows):
    E, h, c = box_lp(seed, q, rows)
    m = primal_row_form(E, h, c)
    a, b = solve(m, backend="bundled"), solve(m, backend="highs")
    assert a.objective == pytest.approx(b.objective, abs=1e-7)


@FAST
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_bnb_matches_highs_on_knapsacks(seed, n):
    rng = np.random.default_rng(seed)
    w, v = rng.integers(1, 10, n), rng.integers(1, 10, n)
    m = Model()
    xs = m.add_vars("x", n, binary=True)
    m.add_row(xs, w, "<=", int(w.sum() // 2))
    m.set_objective(xs, v, maximize=True)
    assert solve(m).objective == pytest.approx(solve(m, backend="highs").objective)


def balanced(instance, fracs_p, fracs_g):
    wp = np.array([instance.attack.tau_p * d.demand for d in instance.power.loads])
    wg = np.array([instance.attack.tau_g * d.demand for d in instance.gas.loads])
    parts = []
    for w, f in ((wp, fracs_p), (wg, fracs_g)):
        if w.size == 0:
            parts.append(w)
            continue
        v = np.asarray(f[: w.size]) * w
        v -= v.mean()
        scale = max(1.0, float(np.max(np.abs(v) / np.where(w > 0, w, np.inf))))
        parts.append(v / scale)
    return np.concatenate(parts)


fracs = st.lists(st.floats(-1, 1), min_size=4, max_size=4)


@FAST
@given(fracs, fracs)
def test_attacks_stay_stealthy(mini, fp, fg):
    x = balanced(mini, fp, fg)
    assert in_region(mini, x)
    av = AttackVector.from_x(mini, x)
    f = derive_falsified(mini, av)
    inj = power_injection_deltas(av, mini.power)
    assert np.allclose(f.dp_lines, build_ptdf(mini.power).matrix @ inj, atol=0)
    assert np.allclose(f.dp_lines, dc_flows(mini.power, inj), atol=1e-10)
    bal, rel = gas_residuals(mini, av, derive_gas_deltas(av, mini))
    assert bal <= 1e-8 and rel <= 1e-8


@FAST
@given(st.floats(-1, 1))
def test_operator_value_two_routes(two_bus, two_bus_compact, t):
    # compact operator MILP and the direct dispatch enumeration agree
    x = np.array([-t, t]) * 1.05
    direct = evaluate_dispatch(two_bus, x)
    assert solve_sp1(two_bus_compact, x).value == pytest.approx(direct.cost, abs=1e-6)


@FAST
@given(st.floats(-1, 1))
def test_single_attacks_bounded_by_worst_case(two_bus, t):
    # every balanced shift leaves some dispatch feasible and costs at most the worst case
    x = np.array([-t, t]) * 1.05
    r = evaluate_dispatch(two_bus, x)
    assert r.feasible
    assert r.cost <= 2155.0 + 1e-6
