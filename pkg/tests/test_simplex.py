import numpy as np
import pytest

from suppalign.simplex import LpSolution, solve_lp


def test_two_variable_textbook_lp():
    # max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18
    # optimum (2, 6) -> 36, a classic corner solution
    c = [3.0, 5.0]
    A = [[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]]
    b = [4.0, 12.0, 18.0]
    sol = solve_lp(c, A, b)
    assert sol.status == "optimal"
    assert np.allclose(sol.x, [2.0, 6.0])
    assert np.isclose(sol.value, 36.0)


def test_origin_optimal_when_objective_nonpositive():
    sol = solve_lp([-1.0, -2.0], [[1.0, 1.0]], [5.0])
    assert sol.status == "optimal"
    assert np.allclose(sol.x, 0.0)
    assert sol.value == 0.0


def test_unbounded_reports_ray():
    # y unconstrained above, objective grows along it
    sol = solve_lp([0.0, 1.0], [[1.0, 0.0]], [1.0])
    assert sol.status == "unbounded"
    ray = sol.ray
    assert ray is not None and ray.shape == (2,)
    # the ray must be a recession direction with positive objective rate
    A = np.array([[1.0, 0.0]])
    assert (A @ ray <= 1e-9).all()
    assert (ray >= -1e-12).all()
    assert np.dot([0.0, 1.0], ray) > 1e-9


def test_negative_b_rejected():
    with pytest.raises(ValueError):
        solve_lp([1.0], [[1.0]], [-1.0])


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        solve_lp([1.0, 2.0], [[1.0]], [1.0])


def test_degenerate_vertices_terminate():
    # redundant constraints create degenerate pivots; Bland fallback must
    # still terminate at the optimum
    c = [1.0, 1.0]
    A = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 1.0]]
    b = [1.0, 1.0, 1.0, 2.0, 2.0]
    sol = solve_lp(c, A, b)
    assert sol.status == "optimal"
    assert np.isclose(sol.value, 2.0)


def test_matches_scipy_on_random_instances():
    scipy_opt = pytest.importorskip("scipy.optimize")
    for seed in range(25):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(2, 7)), int(rng.integers(2, 10))
        c = rng.normal(size=n)
        A = rng.normal(size=(m, n))
        b = rng.uniform(0.1, 2.0, size=m)
        sol = solve_lp(c, A, b)
        ref = scipy_opt.linprog(-c, A_ub=A, b_ub=b, bounds=(0, None), method="highs")
        if sol.status == "unbounded":
            assert ref.status == 3  # scipy's unbounded code
            continue
        assert ref.status == 0
        assert np.isclose(sol.value, -ref.fun, atol=1e-7), f"seed {seed}"
        # feasibility of our vertex
        assert (A @ sol.x <= b + 1e-7).all()
        assert (sol.x >= -1e-9).all()


def test_solution_dataclass_fields():
    sol = solve_lp([1.0], [[1.0]], [3.0])
    assert isinstance(sol, LpSolution)
    assert sol.iterations >= 1
    assert np.isclose(sol.x[0], 3.0)
