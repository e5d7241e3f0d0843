"""Exact discrepancy LP, its bounds, and the grid-search cross oracle."""

import json

import numpy as np
import pytest
from scipy.optimize import linprog

from suppalign.divergences import SampleCloud
from suppalign.imd import (
    ImdInstance,
    ImdResult,
    UnboundedImdError,
    grid_imd_value,
    lemma1_bounds,
    max_f_at,
    prop1_check,
    random_imd_instance,
    random_joint_pair,
    remark2_check,
    solve_imd,
    unbounded_ray,
)
from suppalign.simplex import solve_lp


def two_point_instance(eps=10.0):
    return ImdInstance(
        metric=np.array([[0.0, 1.0], [1.0, 0.0]]),
        p=np.array([1.0, 0.0]),
        q=np.array([0.0, 1.0]),
        class_of=np.array([0, 0]),
        epsilons=np.array([eps]),
    )


def crossed_instance():
    """1-D crossed classes: z-supports match, class supports are swapped."""
    metric = np.array(
        [
            [0.0, 1.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 1.0],
            [0.0, 1.0, 1.0, 0.0],
        ]
    )
    return ImdInstance(
        metric=metric,
        p=np.array([0.5, 0.5, 0.0, 0.0]),  # class 0 at z=0, class 1 at z=1
        q=np.array([0.0, 0.0, 0.5, 0.5]),  # class 0 at z=1, class 1 at z=0
        class_of=np.array([0, 1, 0, 1]),
        epsilons=np.array([0.1, 0.1]),
    )


def test_identical_measures_give_zero():
    rng = np.random.default_rng(0)
    inst = random_imd_instance(rng, m=8, n_classes=2)
    inst = ImdInstance(inst.metric, inst.p, inst.p.copy(), inst.class_of, inst.epsilons)
    res = solve_imd(inst)
    assert res.imd_value == pytest.approx(0.0, abs=1e-10)


def test_two_point_hand_lp():
    res = solve_imd(two_point_instance(eps=10.0))
    assert res.imd_value == pytest.approx(1.0, abs=1e-10)
    # budget only caps the charged source point, so eps=0 changes nothing
    res0 = solve_imd(two_point_instance(eps=0.0))
    assert res0.imd_value == pytest.approx(1.0, abs=1e-10)
    assert res0.f_star[0] == pytest.approx(0.0, abs=1e-9)
    assert res0.f_star[1] == pytest.approx(1.0, abs=1e-9)


def test_witness_feasibility_and_nonnegative_value():
    rng = np.random.default_rng(42)
    for _ in range(15):
        inst = random_imd_instance(rng, m=int(rng.integers(4, 13)), n_classes=3)
        res = solve_imd(inst)
        f = res.f_star
        assert res.imd_value >= -1e-12
        assert f.min() >= -1e-9
        assert np.all(np.abs(f[:, None] - f[None, :]) <= inst.metric + 1e-7)
        pk, _ = inst.class_mass()
        for k in range(inst.n_classes):
            if pk[k] <= 0:
                continue
            members = inst.class_of == k
            used = float(np.dot(inst.p[members], f[members]) / pk[k])
            assert used <= inst.epsilons[k] + 1e-7


def test_epsilon_monotonicity():
    rng = np.random.default_rng(3)
    for _ in range(10):
        inst = random_imd_instance(rng, m=10, n_classes=3)
        lo = solve_imd(inst).imd_value
        bigger = ImdInstance(
            inst.metric, inst.p, inst.q, inst.class_of, inst.epsilons * 3.0 + 0.1
        )
        hi = solve_imd(bigger).imd_value
        assert hi >= lo - 1e-9


def test_coordinate_caps_match_lp_maxima():
    """max_f_at's closed form equals maximizing e_i over the same polytope."""
    rng = np.random.default_rng(7)
    from suppalign.imd import _lp_arrays

    for _ in range(5):
        inst = random_imd_instance(rng, m=7, n_classes=2)
        A, b = _lp_arrays(inst)
        for i in range(inst.n_points):
            c = np.zeros(inst.n_points)
            c[i] = 1.0
            sol = solve_lp(c, A, b)
            assert sol.status == "optimal"
            assert max_f_at(inst, i) == pytest.approx(sol.value, abs=1e-8)


def test_lemma1_bounds_dominate_lp_value():
    rng = np.random.default_rng(11)
    for _ in range(25):
        inst = random_imd_instance(rng, m=int(rng.integers(4, 14)), n_classes=3)
        res = solve_imd(inst)
        assert res.imd_value <= res.rhs_conditional + 1e-9
        assert res.imd_value <= res.rhs_cssd + 1e-9
        assert res.imd_value <= res.rhs_marginal + 1e-9
        assert np.all(res.delta_k >= -1e-12) and np.all(res.gamma_k >= -1e-12)


def test_lemma1_uniform_budget_marginal_bound():
    # uniform budgets make the pooled budget exactly eps
    rng = np.random.default_rng(13)
    for _ in range(10):
        inst = random_imd_instance(rng, m=8, n_classes=3)
        eps = float(rng.uniform(0.05, 0.4))
        uni = ImdInstance(
            inst.metric, inst.p, inst.q, inst.class_of, np.full(3, eps)
        )
        res = solve_imd(uni)
        bounds = lemma1_bounds(uni)
        assert bounds.eps_pooled == pytest.approx(eps, abs=1e-12)
        assert res.imd_value <= bounds.rhs_marginal + 1e-9


def test_lp_matches_grid_oracle_small():
    rng = np.random.default_rng(19)
    for _ in range(4):
        inst = random_imd_instance(rng, m=4, n_classes=2)
        lp = solve_imd(inst).imd_value
        grid = grid_imd_value(inst, step=0.02)
        assert grid <= lp + 1e-9
        assert lp - grid <= 0.04  # witness resolution at two grid steps


def test_grid_node_budget_overflow():
    rng = np.random.default_rng(23)
    inst = random_imd_instance(rng, m=6, n_classes=2)
    with pytest.raises(RuntimeError, match="node budget"):
        grid_imd_value(inst, step=0.005, node_budget=50)


def disconnected_instance():
    inf = np.inf
    metric = np.array(
        [
            [0.0, 1.0, inf],
            [1.0, 0.0, inf],
            [inf, inf, 0.0],
        ]
    )
    return ImdInstance(
        metric=metric,
        p=np.array([0.7, 0.3, 0.0]),
        q=np.array([0.2, 0.3, 0.5]),
        class_of=np.array([0, 0, 0]),
        epsilons=np.array([0.25]),
    )


def test_unbounded_certificate():
    inst = disconnected_instance()
    cert = unbounded_ray(inst)
    assert cert is not None
    with pytest.raises(UnboundedImdError) as err:
        solve_imd(inst)
    ray, members = err.value.ray, err.value.component
    assert members.tolist() == [2]
    # the ray is feasible to add at any magnitude and strictly improves
    assert np.all(ray >= 0)
    assert float(np.dot(inst.q - inst.p, ray)) > 0
    finite = np.isfinite(inst.metric)
    gaps = np.abs(ray[:, None] - ray[None, :])[finite]
    assert np.all(gaps <= 1e-12)  # no finite edge is stretched
    with pytest.raises(UnboundedImdError):
        lemma1_bounds(inst)
    with pytest.raises(UnboundedImdError):
        grid_imd_value(inst)


def test_bounded_when_component_charged():
    inst = disconnected_instance()
    ok = ImdInstance(
        inst.metric,
        np.array([0.6, 0.3, 0.1]),
        inst.q,
        inst.class_of,
        inst.epsilons,
    )
    assert unbounded_ray(ok) is None
    res = solve_imd(ok)
    assert np.isfinite(res.imd_value)


def test_transport_duality_single_class():
    """With one class and a vacuous budget the LP value is the exact W1.

    Nonnegativity costs nothing (the objective is shift-invariant since the
    weights sum to zero), so the witness program is the Kantorovich dual.
    The primal transport program solved by an external LP must agree.
    """
    rng = np.random.default_rng(29)
    for _ in range(5):
        m = int(rng.integers(3, 8))
        inst = random_imd_instance(rng, m=m, n_classes=1)
        inst = ImdInstance(
            inst.metric, inst.p, inst.q, np.zeros(m, dtype=int), np.array([1e9])
        )
        dual = solve_imd(inst).imd_value

        c = inst.metric.reshape(-1)
        A_eq = np.zeros((2 * m, m * m))
        for i in range(m):
            A_eq[i, i * m : (i + 1) * m] = 1.0  # row sums to p
            A_eq[m + i, i::m] = 1.0  # column sums to q
        b_eq = np.concatenate([inst.p, inst.q])
        primal = linprog(c, A_eq=A_eq, b_eq=b_eq, method="highs")
        assert primal.status == 0
        assert dual == pytest.approx(primal.fun, abs=1e-8)


def test_remark2_single_class_equalities():
    rng = np.random.default_rng(31)
    inst = random_imd_instance(rng, m=6, n_classes=1)
    rep = remark2_check(inst)
    assert rep.conditional_dist == pytest.approx(rep.marginal_dist, abs=1e-12)
    assert rep.weighted_delta == pytest.approx(rep.pooled_delta, abs=1e-9)
    assert rep.dist_dominates and rep.delta_dominated


def test_remark2_crossed_instance_strict_gap():
    rep = remark2_check(crossed_instance())
    assert rep.conditional_dist == pytest.approx(1.0, abs=1e-12)
    assert rep.marginal_dist == pytest.approx(0.0, abs=1e-12)
    assert rep.dist_dominates and rep.delta_dominated


def test_remark2_random_instances_no_violations():
    rng = np.random.default_rng(37)
    for _ in range(25):
        inst = random_imd_instance(rng, m=int(rng.integers(4, 14)), n_classes=3)
        rep = remark2_check(inst)
        assert rep.dist_dominates
        assert rep.delta_dominated


def test_prop1_identical_and_swapped():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]])
    labels = np.array([0, 1, 0])
    same = (SampleCloud(pts, labels), SampleCloud(pts.copy(), labels.copy()))
    swapped = (
        SampleCloud(pts, np.array([0, 1, 0])),
        SampleCloud(pts, np.array([1, 0, 1])),
    )
    rep = prop1_check([same, swapped])
    assert rep.n_checked == 2 and rep.ok
    from suppalign.divergences import cssd, joint_ssd

    c, _ = cssd(*swapped)
    assert c > 0 and joint_ssd(*swapped, label_scale=10.0) > 0


def test_prop1_zero_marginal_skipped_with_warning():
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    pair = (
        SampleCloud(pts, np.array([0, 0]), np.array([1.0, 0.0])),
        SampleCloud(pts, np.array([0, 1])),
    )
    with pytest.warns(UserWarning, match="skipped"):
        rep = prop1_check([pair])
    assert rep.n_skipped == 1 and rep.n_checked == 0


def test_prop1_random_batch():
    rng = np.random.default_rng(41)
    pairs = []
    for i in range(40):
        shared = i % 2 == 0
        pairs.append(random_joint_pair(rng, m=8, n_classes=2, shared=shared))
    rep = prop1_check(pairs)
    assert rep.ok
    assert rep.n_checked == 40


def test_instance_json_round_trip_with_infinities():
    inst = disconnected_instance()
    back = ImdInstance.from_json(inst.to_json())
    assert np.array_equal(back.metric, inst.metric)
    assert np.array_equal(back.p, inst.p)
    assert np.array_equal(back.q, inst.q)
    assert np.array_equal(back.class_of, inst.class_of)
    assert np.array_equal(back.epsilons, inst.epsilons)


def test_result_json_round_trip():
    res = solve_imd(two_point_instance())
    back = ImdResult.from_json(res.to_json())
    assert back.imd_value == res.imd_value
    assert np.array_equal(back.f_star, res.f_star)
    assert back.rhs_cssd == res.rhs_cssd


def test_instance_validation():
    eye = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = np.array([0.5, 0.5])
    with pytest.raises(ValueError, match="triangle"):
        ImdInstance(
            np.array(
                [[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]]
            ),
            np.full(3, 1 / 3),
            np.full(3, 1 / 3),
            np.zeros(3, dtype=int),
            np.array([0.1]),
        )
    with pytest.raises(ValueError, match="symmetric"):
        ImdInstance(np.array([[0.0, 1.0], [2.0, 0.0]]), p, p, np.zeros(2, int), np.array([0.1]))
    with pytest.raises(ValueError, match="diagonal"):
        ImdInstance(np.array([[0.1, 1.0], [1.0, 0.0]]), p, p, np.zeros(2, int), np.array([0.1]))
    with pytest.raises(ValueError, match="probability"):
        ImdInstance(eye, np.array([0.5, 0.6]), p, np.zeros(2, int), np.array([0.1]))
    with pytest.raises(ValueError, match="class indices"):
        ImdInstance(eye, p, p, np.array([0, 5]), np.array([0.1]))
    with pytest.raises(ValueError, match="nonnegative"):
        ImdInstance(eye, p, p, np.zeros(2, int), np.array([-0.1]))
    with pytest.raises(ValueError, match="NaN"):
        ImdInstance(np.array([[0.0, np.nan], [np.nan, 0.0]]), p, p, np.zeros(2, int), np.array([0.1]))
