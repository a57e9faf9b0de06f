import numpy as np
import pytest

from iegs_attack.milp import INFEASIBLE, KERNEL, OPTIMAL, UNBOUNDED, Model, dual_objective, solve
from iegs_attack.milp.duality import (
    ComplementarityPair,
    audit_pairs,
    dualize,
    equality_row_pairs,
    linearize_complementarity,
    primal_row_form,
)
from iegs_attack.milp.simplex import solve_lp


def small_lp():
    # max 3a + 2b s.t. a + b <= 4, a + 3b <= 6, a <= 3
    m = Model("small")
    a = m.add_var("a")
    b = m.add_var("b")
    m.add_row([a, b], [1, 1], "<=", 4)
    m.add_row([a, b], [1, 3], "<=", 6)
    m.add_row([a], [1], "<=", 3)
    m.set_objective([a, b], [3, 2], maximize=True)
    return m


@pytest.mark.parametrize("backend", ["bundled", "highs"])
def test_small_lp(backend):
    sol = solve(small_lp(), backend=backend)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(11.0)
    assert np.allclose(sol.x, [3.0, 1.0])


@pytest.mark.parametrize("kernel", ["python", "cython"])
def test_kernels_agree(kernel):
    if kernel == "cython" and KERNEL != "cython":
        pytest.skip("compiled kernel not built")
    sol = solve_lp(small_lp(), kernel=kernel)
    assert sol.objective == pytest.approx(11.0)


def test_lp_duals_close_the_gap():
    m = small_lp()
    sol = solve(m)
    assert dual_objective(m, sol.duals, sol.reduced_costs) == pytest.approx(sol.objective)


def test_infeasible_and_unbounded():
    m = Model()
    x = m.add_var("x", 0, 1)
    m.add_row([x], [1], ">=", 2)
    assert solve(m).status == INFEASIBLE
    u = Model()
    y = u.add_var("y", 0)
    u.set_objective([y], [1], maximize=True)
    assert solve(u).status == UNBOUNDED


@pytest.mark.parametrize("backend", ["bundled", "highs"])
def test_knapsack(backend):
    w = [5, 4, 3, 2]
    v = [10, 7, 5, 3]
    m = Model()
    xs = m.add_vars("x", 4, binary=True)
    m.add_row(xs, w, "<=", 9)
    m.set_objective(xs, v, maximize=True)
    sol = solve(m, backend=backend)
    assert sol.objective == pytest.approx(17.0)


def test_strong_duality_of_dualize():
    rng = np.random.default_rng(7)
    # box plus random rows keeps the primal bounded and feasible
    q = 3
    E = np.vstack([np.eye(q), -np.eye(q), rng.normal(size=(4, q))])
    h = np.concatenate([np.full(q, 2.0), np.full(q, 2.0), np.full(4, 5.0)])
    c = rng.normal(size=q)
    p = solve(primal_row_form(E, h, c))
    d = solve(dualize(E, h, c))
    assert p.optimal and d.optimal
    assert p.objective == pytest.approx(d.objective, abs=1e-8)


def test_complementarity_linearization():
    # dual v in [0, inf), slack 1 - y >= 0, both forced positive is infeasible
    m = Model()
    y = m.add_var("y", 0, 1)
    v = m.add_var("v", 0)
    pr = ComplementarityPair(v, np.array([y]), np.array([-1.0]), 1.0, 10.0, 10.0)
    linearize_complementarity(m, [pr])
    m.add_row([v], [1], ">=", 0.5)
    m.set_objective([y], [1])
    sol = solve(m)
    assert sol.x[y] == pytest.approx(1.0)
    assert audit_pairs([pr], sol.x) == []


def test_audit_flags_bound():
    pr = ComplementarityPair(0, np.array([1]), np.array([1.0]), 0.0, 5.0, 5.0)
    hits = audit_pairs([pr], np.array([5.0, 0.0]))
    assert [h.which for h in hits] == ["dual"]
    exact = ComplementarityPair(0, np.array([1]), np.array([1.0]), 0.0, 5.0, 5.0, exact_slack=True)
    assert audit_pairs([exact], np.array([0.0, 5.0])) == []


def test_equality_pairs():
    A = np.array([[1.0, 2.0], [-1.0, -2.0], [0.0, 1.0]])
    a = np.array([3.0, -3.0, 1.0])
    assert equality_row_pairs(A, a).tolist() == [1, 0, -1]


def test_export_is_stable():
    text = small_lp().export_triplets()
    assert text == small_lp().export_triplets()
    assert "sense max" in text
    assert text.count("\nrhs ") == 3


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve(small_lp(), backend="nope")


def test_kernel_benchmark_runs(tmp_path):
    if KERNEL != "cython":
        pytest.skip("compiled kernel not built")
    import importlib.util
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_simplex.py"
    spec = importlib.util.spec_from_file_location("bench_simplex", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    out = tmp_path / "bench.csv"
    assert mod.main(["--repeat", "1", "--csv", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 7
