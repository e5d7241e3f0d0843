"""Exact integral measure discrepancy on finite metric spaces.

The discrepancy is the value of a small linear program: maximize
sum_i f_i (q_i - p_i) over witness functions f that are nonnegative,
1-Lipschitz w.r.t. the instance metric, and localized per class through
E_{p|k}[f] <= eps_k. On a finite point set this is exact, so the module
doubles as the reference oracle for the support-divergence upper bounds
and for an independent grid-search cross-check of the LP itself.

Caps on single coordinates (the sup of f_i over the feasible set) have a
closed form: the largest t such that the forced lower envelope
f_j >= max(0, t - d_ij) still fits inside every class budget. That
envelope is itself feasible, so the cap is tight; tests cross-check it
against the LP maximum.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .backend import maybe_njit
from .divergences import SampleCloud, cssd as cloud_cssd, joint_ssd as cloud_joint_ssd
from .simplex import LpError, solve_lp

BUDGET_RECHECK_TOL = 1e-7
CERT_TOL = 1e-9
_NO_EDGE = np.int64(1) << 41  # grid-unit sentinel for infinite distances


class UnboundedImdError(ValueError):
    """The witness family is unbounded in the objective direction.

    Happens when some chunk of target mass sits in a metric component
    that carries no source mass: nothing caps the witness there.
    """

    def __init__(self, ray: np.ndarray, component: np.ndarray):
        self.ray = np.asarray(ray, dtype=np.float64)
        self.component = np.asarray(component, dtype=np.int64)
        super().__init__(
            "objective unbounded: target mass on points "
            f"{self.component.tolist()} is metrically disconnected from all "
            "source mass; certificate ray attached"
        )


@dataclass
class ImdInstance:
    """Finite discrete instance: points, metric, two weightings, classes."""

    metric: np.ndarray
    p: np.ndarray
    q: np.ndarray
    class_of: np.ndarray
    epsilons: np.ndarray
    points: np.ndarray | None = None

    def __post_init__(self):
        self.metric = np.asarray(self.metric, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64)
        self.class_of = np.asarray(self.class_of, dtype=np.int64)
        self.epsilons = np.asarray(self.epsilons, dtype=np.float64)
        if self.points is not None:
            self.points = np.asarray(self.points, dtype=np.float64)

        m = self.p.size
        d = self.metric
        if d.shape != (m, m):
            raise ValueError(f"metric shape {d.shape} does not match {m} points")
        if self.q.shape != (m,) or self.class_of.shape != (m,):
            raise ValueError("p, q, class_of must all have one entry per point")
        if np.isnan(d).any():
            raise ValueError("metric entries must not be NaN")
        if np.any(np.diag(d) != 0.0):
            raise ValueError("metric diagonal must be exactly zero")
        if d.min() < 0:
            raise ValueError("metric entries must be nonnegative")
        if not np.array_equal(d, d.T):
            raise ValueError("metric must be symmetric")
        for k in range(m):
            through_k = d[:, k][:, None] + d[k, :][None, :]
            bad = d > through_k + 1e-9
            if bad.any():
                i, j = map(int, np.argwhere(bad)[0])
                raise ValueError(
                    f"triangle inequality violated: d[{i},{j}]={d[i, j]} > "
                    f"d[{i},{k}]+d[{k},{j}]={through_k[i, j]}"
                )
        for name, vec in (("p", self.p), ("q", self.q)):
            if vec.min() < 0 or abs(vec.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} must be a probability vector (tol 1e-12)")
        K = self.epsilons.size
        if self.class_of.min() < 0 or self.class_of.max() >= K:
            raise ValueError(f"class indices must lie in [0, {K})")
        if self.epsilons.min() < 0:
            raise ValueError("localization budgets must be nonnegative")

    @property
    def n_points(self) -> int:
        return self.p.size

    @property
    def n_classes(self) -> int:
        return self.epsilons.size

    def class_mass(self) -> tuple[np.ndarray, np.ndarray]:
        """(p_k, q_k): total source / target mass per class."""
        K = self.n_classes
        pk = np.zeros(K)
        qk = np.zeros(K)
        np.add.at(pk, self.class_of, self.p)
        np.add.at(qk, self.class_of, self.q)
        return pk, qk

    def to_json(self) -> str:
        return json.dumps(
            {
                "metric": self.metric.tolist(),
                "p": self.p.tolist(),
                "q": self.q.tolist(),
                "class_of": self.class_of.tolist(),
                "epsilons": self.epsilons.tolist(),
                "points": None if self.points is None else self.points.tolist(),
            }
        )

    @staticmethod
    def from_json(text: str) -> "ImdInstance":
        raw = json.loads(text)
        pts = raw.pop("points")
        return ImdInstance(points=None if pts is None else np.array(pts), **raw)


@dataclass
class ImdResult:
    imd_value: float
    f_star: np.ndarray
    delta_k: np.ndarray
    gamma_k: np.ndarray
    rhs_conditional: float
    rhs_cssd: float
    rhs_marginal: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "imd_value": self.imd_value,
                "f_star": self.f_star.tolist(),
                "delta_k": self.delta_k.tolist(),
                "gamma_k": self.gamma_k.tolist(),
                "rhs_conditional": self.rhs_conditional,
                "rhs_cssd": self.rhs_cssd,
                "rhs_marginal": self.rhs_marginal,
            }
        )

    @staticmethod
    def from_json(text: str) -> "ImdResult":
        raw = json.loads(text)
        raw["f_star"] = np.array(raw["f_star"], dtype=np.float64)
        raw["delta_k"] = np.array(raw["delta_k"], dtype=np.float64)
        raw["gamma_k"] = np.array(raw["gamma_k"], dtype=np.float64)
        return ImdResult(**raw)


# ---------------------------------------------------------------------------
# boundedness


def _finite_components(metric: np.ndarray) -> np.ndarray:
    """Connected-component label per point under finite-distance adjacency."""
    m = metric.shape[0]
    comp = np.full(m, -1, dtype=np.int64)
    cur = 0
    for start in range(m):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = cur
        while stack:
            i = stack.pop()
            for j in np.nonzero(np.isfinite(metric[i]))[0]:
                if comp[j] < 0:
                    comp[j] = cur
                    stack.append(int(j))
        cur += 1
    return comp


def unbounded_ray(inst: ImdInstance) -> tuple[np.ndarray, np.ndarray] | None:
    """Certificate of unboundedness, or None if the program is bounded.

    A component with target mass but no source mass admits the ray that
    is 1 on the component: every pair constraint inside it is slack-free,
    no budget touches it, and the objective grows at rate q(component).
    """
    comp = _finite_components(inst.metric)
    for c in range(comp.max() + 1):
        members = np.nonzero(comp == c)[0]
        if inst.q[members].sum() > 0 and inst.p[members].sum() == 0:
            ray = np.zeros(inst.n_points)
            ray[members] = 1.0
            return ray, members
    return None


# ---------------------------------------------------------------------------
# closed-form coordinate caps


def _cap_from_budget(dists: np.ndarray, weights: np.ndarray, eps: float) -> float:
    """Largest t with sum_j w_j * max(0, t - d_j) <= eps (inf if vacuous)."""
    mask = (weights > 0) & np.isfinite(dists)
    if not mask.any():
        return np.inf
    order = np.argsort(dists[mask], kind="stable")
    d = dists[mask][order]
    w = weights[mask][order]
    g = 0.0
    cumw = 0.0
    for l in range(d.size):
        if l > 0:
            g_next = g + cumw * (d[l] - d[l - 1])
            if g_next > eps:
                return d[l - 1] + (eps - g) / cumw
            g = g_next
        cumw += w[l]
    return d[-1] + (eps - g) / cumw


def max_f_at(inst: ImdInstance, i: int) -> float:
    """Exact sup of f_i over the feasible witness family.

    Tightness: any feasible f with f_i = t forces f_j >= max(0, t - d_ij)
    by nonnegativity plus Lipschitz, so every class budget lower-bounds t;
    conversely f_j = max(0, t - d_ij) is itself feasible (the map
    u -> max(0, t - u) is 1-Lipschitz and the triangle inequality carries
    that to the points). Returns inf when no budget reaches point i.
    """
    pk, _ = inst.class_mass()
    cap = np.inf
    for k in range(inst.n_classes):
        if pk[k] <= 0:
            continue
        members = np.nonzero(inst.class_of == k)[0]
        w = inst.p[members] / pk[k]
        cap = min(cap, _cap_from_budget(inst.metric[i, members], w, inst.epsilons[k]))
    return cap


def _pooled_cap(inst: ImdInstance, i: int) -> float:
    """Sup of f_i under the single pooled budget E_p[f] <= sum_k eps_k p_k."""
    pk, _ = inst.class_mass()
    eps_pooled = float(np.dot(inst.epsilons, pk))
    return _cap_from_budget(inst.metric[i], inst.p, eps_pooled)


def _dist_to_subset(metric: np.ndarray, i: int, idx: np.ndarray) -> float:
    if idx.size == 0:
        return np.inf
    return float(metric[i, idx].min())


# ---------------------------------------------------------------------------
# LP solve


def _budget_rows(inst: ImdInstance) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(W, eps, class_ids): one row sum_i W[r,i] f_i <= eps[r] per charged class."""
    pk, _ = inst.class_mass()
    rows, rhs, ks = [], [], []
    for k in range(inst.n_classes):
        if pk[k] <= 0:
            continue
        w = np.zeros(inst.n_points)
        members = inst.class_of == k
        w[members] = inst.p[members] / pk[k]
        rows.append(w)
        rhs.append(inst.epsilons[k])
        ks.append(k)
    return np.array(rows), np.array(rhs), np.array(ks, dtype=np.int64)


def _lp_arrays(inst: ImdInstance) -> tuple[np.ndarray, np.ndarray]:
    m = inst.n_points
    rows, rhs = [], []
    for i in range(m):
        for j in range(i + 1, m):
            dij = inst.metric[i, j]
            if not np.isfinite(dij):
                continue
            row = np.zeros(m)
            row[i], row[j] = 1.0, -1.0
            rows.append(row)
            rhs.append(dij)
            rows.append(-row)
            rhs.append(dij)
    W, eps, _ = _budget_rows(inst)
    for r in range(W.shape[0]):
        rows.append(W[r])
        rhs.append(eps[r])
    return np.array(rows), np.array(rhs)


def _recheck_feasible(inst: ImdInstance, f: np.ndarray, tol: float = BUDGET_RECHECK_TOL):
    if f.min() < -tol:
        raise LpError(f"witness negativity {f.min()} beyond tolerance")
    diffs = np.abs(f[:, None] - f[None, :])
    bad = diffs > inst.metric + tol
    if bad.any():
        i, j = np.unravel_index(np.argmax(diffs - inst.metric), bad.shape)
        raise LpError(f"witness breaks Lipschitz at pair ({i},{j})")
    W, eps, ks = _budget_rows(inst)
    for r in range(W.shape[0]):
        used = float(W[r] @ f)
        if used > eps[r] + tol:
            raise LpError(f"witness breaks class-{ks[r]} budget: {used} > {eps[r]}")


def solve_imd(inst: ImdInstance) -> ImdResult:
    """Exact discrepancy value, optimal witness, and the three upper bounds."""
    cert = unbounded_ray(inst)
    if cert is not None:
        raise UnboundedImdError(*cert)
    A, b = _lp_arrays(inst)
    sol = solve_lp(inst.q - inst.p, A, b)
    if sol.status != "optimal":
        raise LpError("LP reported unbounded after a passed boundedness precheck")
    f_star = np.maximum(sol.x, 0.0)
    _recheck_feasible(inst, f_star)
    value = float(sol.value)
    if value < -1e-12:
        raise LpError(f"negative optimum {value}: the zero witness was feasible")
    bounds = lemma1_bounds(inst)
    return ImdResult(
        imd_value=value,
        f_star=f_star,
        delta_k=bounds.delta_k,
        gamma_k=bounds.gamma_k,
        rhs_conditional=bounds.rhs_conditional,
        rhs_cssd=bounds.rhs_cssd,
        rhs_marginal=bounds.rhs_marginal,
    )


# ---------------------------------------------------------------------------
# upper bounds


@dataclass
class Lemma1Bounds:
    rhs_conditional: float
    rhs_cssd: float
    rhs_marginal: float
    delta_k: np.ndarray
    gamma_k: np.ndarray
    cssd_value: float
    delta_pooled: float
    eps_pooled: float


def lemma1_bounds(inst: ImdInstance) -> Lemma1Bounds:
    """The conditional, class-divergence, and marginal upper bounds.

    Coordinate caps are the exact per-point suprema of the witness family
    (see max_f_at); the marginal variant relaxes the per-class budgets to
    the single pooled budget they imply, which is the family the marginal
    bound quantifies over.
    """
    cert = unbounded_ray(inst)
    if cert is not None:
        raise UnboundedImdError(*cert)
    m, K = inst.n_points, inst.n_classes
    pk, qk = inst.class_mass()
    caps = np.array([max_f_at(inst, i) for i in range(m)])

    delta_k = np.zeros(K)
    gamma_k = np.zeros(K)
    cond_dist = np.zeros(K)  # E_{q|k} d(z, supp p|k)
    rev_dist = np.zeros(K)  # E_{p|k} d(z, supp q|k)
    for k in range(K):
        members = np.nonzero(inst.class_of == k)[0]
        supp_p = members[inst.p[members] > 0]
        supp_q = members[inst.q[members] > 0]
        if supp_p.size:
            delta_k[k] = caps[supp_p].max()
        if supp_q.size:
            gamma_k[k] = caps[supp_q].max()
        if qk[k] > 0:
            cond_dist[k] = sum(
                inst.q[i] / qk[k] * _dist_to_subset(inst.metric, i, supp_p)
                for i in supp_q
            )
        if pk[k] > 0:
            rev_dist[k] = sum(
                inst.p[i] / pk[k] * _dist_to_subset(inst.metric, i, supp_q)
                for i in supp_p
            )

    rhs_conditional = float(
        np.dot(qk, cond_dist) + np.dot(qk, delta_k) + np.dot(pk, inst.epsilons)
    )
    cssd_value = float(np.dot(qk, cond_dist) + np.dot(pk, rev_dist))
    rhs_cssd = float(cssd_value + np.dot(pk, delta_k) + np.dot(qk, gamma_k))

    supp_p_all = np.nonzero(inst.p > 0)[0]
    supp_q_all = np.nonzero(inst.q > 0)[0]
    mean_dist = sum(
        inst.q[i] * _dist_to_subset(inst.metric, i, supp_p_all) for i in supp_q_all
    )
    delta_pooled = max(
        (_pooled_cap(inst, i) for i in supp_p_all), default=0.0
    )
    eps_pooled = float(np.dot(inst.epsilons, pk))
    rhs_marginal = float(mean_dist + delta_pooled + eps_pooled)

    return Lemma1Bounds(
        rhs_conditional=rhs_conditional,
        rhs_cssd=rhs_cssd,
        rhs_marginal=rhs_marginal,
        delta_k=delta_k,
        gamma_k=gamma_k,
        cssd_value=cssd_value,
        delta_pooled=float(delta_pooled),
        eps_pooled=eps_pooled,
    )


@dataclass
class Remark2Report:
    conditional_dist: float  # sum_k q_k E_{q|k} d(z, supp p|k)
    marginal_dist: float  # E_q d(z, supp p)
    dist_dominates: bool
    weighted_delta: float  # sum_k q_k delta_k
    pooled_delta: float  # sup over supp p under the pooled budget
    delta_dominated: bool


def remark2_check(inst: ImdInstance) -> Remark2Report:
    """Both trade-off inequalities: conditional distances dominate the
    marginal one, while the weighted conditional caps are dominated by the
    pooled cap. Never raises; unbounded instances only widen the gaps."""
    m, K = inst.n_points, inst.n_classes
    pk, qk = inst.class_mass()
    supp_p_all = np.nonzero(inst.p > 0)[0]

    cond = 0.0
    for k in range(K):
        if qk[k] <= 0:
            continue
        members = np.nonzero(inst.class_of == k)[0]
        supp_p = members[inst.p[members] > 0]
        for i in members[inst.q[members] > 0]:
            cond += inst.q[i] * _dist_to_subset(inst.metric, i, supp_p)
    marg = sum(
        inst.q[i] * _dist_to_subset(inst.metric, i, supp_p_all)
        for i in np.nonzero(inst.q > 0)[0]
    )

    caps = np.array([max_f_at(inst, i) for i in range(m)])
    delta_k = np.zeros(K)
    for k in range(K):
        members = np.nonzero(inst.class_of == k)[0]
        supp_p = members[inst.p[members] > 0]
        if supp_p.size:
            delta_k[k] = caps[supp_p].max()
    weighted = float(np.dot(qk, delta_k))
    pooled = max((_pooled_cap(inst, i) for i in supp_p_all), default=0.0)

    return Remark2Report(
        conditional_dist=float(cond),
        marginal_dist=float(marg),
        dist_dominates=bool(cond >= marg - CERT_TOL),
        weighted_delta=weighted,
        pooled_delta=float(pooled),
        delta_dominated=bool(weighted <= pooled + CERT_TOL),
    )


# ---------------------------------------------------------------------------
# joint-distribution equivalence


@dataclass
class Prop1Report:
    n_checked: int
    n_skipped: int
    counterexamples: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def prop1_check(
    pairs: list[tuple[SampleCloud, SampleCloud]],
    label_scale: float = 10.0,
    zero_tol: float = 1e-12,
) -> Prop1Report:
    """On discrete joints with all class marginals positive, the labeled
    divergence vanishes exactly when the joint product-metric one does."""
    report = Prop1Report(n_checked=0, n_skipped=0)
    for idx, (P, Q) in enumerate(pairs):
        K = max(P.n_classes(), Q.n_classes())
        pm, qm = P.marginal(K), Q.marginal(K)
        if pm.min() <= 0 or qm.min() <= 0:
            warnings.warn(
                f"pair {idx}: zero class marginal, equivalence not applicable; skipped"
            )
            report.n_skipped += 1
            continue
        c, _ = cloud_cssd(P, Q)
        j = cloud_joint_ssd(P, Q, label_scale=label_scale)
        if (c <= zero_tol) != (j <= zero_tol):
            report.counterexamples.append(
                {"pair": idx, "cssd": c, "joint_ssd": j,
                 "P_points": P.points.tolist(), "P_labels": P.labels.tolist(),
                 "Q_points": Q.points.tolist(), "Q_labels": Q.labels.tolist()}
            )
        report.n_checked += 1
    return report


# ---------------------------------------------------------------------------
# random instances


def random_imd_instance(
    rng: np.random.Generator, m: int = 12, n_classes: int = 3
) -> ImdInstance:
    """Euclidean instance on uniform planar points with Dirichlet weights."""
    pts = rng.uniform(0.0, 1.0, size=(m, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    metric = np.sqrt((diff * diff).sum(axis=2))
    metric = 0.5 * (metric + metric.T)
    np.fill_diagonal(metric, 0.0)
    return ImdInstance(
        metric=metric,
        p=rng.dirichlet(np.ones(m)),
        q=rng.dirichlet(np.ones(m)),
        class_of=rng.integers(0, n_classes, size=m),
        epsilons=rng.uniform(0.0, 0.5, size=n_classes),
        points=pts,
    )


def random_joint_pair(
    rng: np.random.Generator, m: int = 8, n_classes: int = 2, shared: bool = False
) -> tuple[SampleCloud, SampleCloud]:
    """Labeled cloud pair on a coarse lattice, every class present on both
    sides. shared=True reuses the exact per-class supports so that both
    divergences vanish; otherwise supports usually differ."""
    if m < n_classes:
        raise ValueError("need at least one point per class")

    def lattice(size):
        return rng.integers(0, 4, size=size).astype(np.float64) * 0.5

    if shared:
        class_support = [lattice((int(rng.integers(1, 4)), 2)) for _ in range(n_classes)]

        # both sides contain each support point at least once, plus fill
        def build():
            pts_list, lab_list = [], []
            for k, sup in enumerate(class_support):
                for row in sup:
                    pts_list.append(row)
                    lab_list.append(k)
            while len(lab_list) < m:
                k = int(rng.integers(0, n_classes))
                sup = class_support[k]
                pts_list.append(sup[rng.integers(0, sup.shape[0])])
                lab_list.append(k)
            return SampleCloud(np.vstack(pts_list), np.array(lab_list))

        return build(), build()

    def one_side():
        labels = np.concatenate(
            [np.arange(n_classes), rng.integers(0, n_classes, size=m - n_classes)]
        )
        rng.shuffle(labels)
        return SampleCloud(lattice((m, 2)), labels)

    return one_side(), one_side()


# ---------------------------------------------------------------------------
# independent grid-search oracle


@maybe_njit(cache=True)
def _grid_dfs(D, caps, W, eps_units, c, order, node_budget):  # pragma: no cover
    """Depth-first exhaustive search over witnesses on an integer grid.

    D[i,j]: pairwise step budgets in grid units (huge sentinel = no edge);
    caps[i]: per-variable upper bounds in units; W[r,:], eps_units[r]:
    budget rows evaluated in units; c: objective weights per unit; order:
    variable assignment order. Returns (best objective in unit scale,
    nodes expanded, overflow flag).
    """
    m = c.size
    R = eps_units.size
    lo = np.zeros((m + 1, m), np.int64)
    hi = np.zeros((m + 1, m), np.int64)
    bud = np.zeros((m + 1, R), np.float64)
    objp = np.zeros(m + 1, np.float64)
    cur = np.zeros(m, np.int64)  # value tried at each depth
    stop = np.zeros(m, np.int64)
    step = np.zeros(m, np.int64)
    live = np.zeros(m, np.uint8)

    for i in range(m):
        hi[0, i] = caps[i]
    best = 0.0  # the zero witness is always feasible
    nodes = 0
    depth = 0
    while depth >= 0:
        if depth == m:
            if objp[m] > best:
                best = objp[m]
            depth -= 1
            continue
        i = order[depth]
        if live[depth] == 0:
            if c[i] >= 0.0:
                cur[depth] = hi[depth, i]
                stop[depth] = lo[depth, i]
                step[depth] = -1
            else:
                cur[depth] = lo[depth, i]
                stop[depth] = hi[depth, i]
                step[depth] = 1
            live[depth] = 1
        else:
            if cur[depth] == stop[depth]:
                live[depth] = 0
                depth -= 1
                continue
            cur[depth] += step[depth]
        v = cur[depth]
        nodes += 1
        if nodes > node_budget:
            return best, nodes, 1

        # child windows
        ok = True
        for t in range(m):
            lo[depth + 1, t] = lo[depth, t]
            hi[depth + 1, t] = hi[depth, t]
        lo[depth + 1, i] = v
        hi[depth + 1, i] = v
        for t in range(depth + 1, m):
            j = order[t]
            d = D[i, j]
            nl = v - d
            nh = v + d
            if nl > lo[depth + 1, j]:
                lo[depth + 1, j] = nl
            if nh < hi[depth + 1, j]:
                hi[depth + 1, j] = nh
            if lo[depth + 1, j] > hi[depth + 1, j]:
                ok = False
                break

        if ok:
            for r in range(R):
                bud[depth + 1, r] = bud[depth, r] + W[r, i] * v
                floor_rest = 0.0
                for t in range(depth + 1, m):
                    j = order[t]
                    floor_rest += W[r, j] * lo[depth + 1, j]
                rem = eps_units[r] - bud[depth + 1, r] - floor_rest
                if rem < 0.0:
                    ok = False
                    break
                for t in range(depth + 1, m):
                    j = order[t]
                    if W[r, j] > 0.0:
                        room = lo[depth + 1, j] + np.int64(rem / W[r, j])
                        if room < hi[depth + 1, j]:
                            hi[depth + 1, j] = room
                        if lo[depth + 1, j] > hi[depth + 1, j]:
                            ok = False
                            break
                if not ok:
                    break

        if ok:
            objp[depth + 1] = objp[depth] + c[i] * v
            ub = objp[depth + 1]
            for t in range(depth + 1, m):
                j = order[t]
                if c[j] >= 0.0:
                    ub += c[j] * hi[depth + 1, j]
                else:
                    ub += c[j] * lo[depth + 1, j]
            if ub > best + 1e-15:
                depth += 1
    return best, nodes, 0


def grid_imd_value(
    inst: ImdInstance, step: float = 0.01, node_budget: int = 200_000_000
) -> float:
    """Exhaustive maximum over grid-quantized feasible witnesses.

    Completely independent of the LP path: integer windows, explicit
    enumeration with admissible pruning. Every grid point it considers is
    feasible for the LP, so the result can only err low, and by no more
    than one grid step of witness resolution.
    """
    cert = unbounded_ray(inst)
    if cert is not None:
        raise UnboundedImdError(*cert)
    m = inst.n_points
    caps_f = np.array([max_f_at(inst, i) for i in range(m)])
    # points metrically isolated from all source mass live in components
    # that (in a bounded instance) carry no mass at all, so their witness
    # value is irrelevant: pin them to zero instead of an infinite cap
    caps_f[~np.isfinite(caps_f)] = 0.0
    caps = np.floor(caps_f / step + 1e-9).astype(np.int64)

    D = np.full((m, m), _NO_EDGE, dtype=np.int64)
    finite = np.isfinite(inst.metric)
    D[finite] = np.floor(inst.metric[finite] / step + 1e-9).astype(np.int64)

    # window propagation to a fixpoint: v_i <= v_j + D_ij
    for _ in range(m):
        tightened = np.minimum(caps, (caps[None, :] + D).min(axis=1))
        if np.array_equal(tightened, caps):
            break
        caps = tightened

    W, eps, _ = _budget_rows(inst)
    eps_units = eps / step
    c = inst.q - inst.p
    order = np.argsort(-np.abs(c), kind="stable").astype(np.int64)

    best, nodes, overflow = _grid_dfs(
        D, caps, W, eps_units, c, order, np.int64(node_budget)
    )
    if overflow:
        raise RuntimeError(f"grid search exceeded node budget ({nodes} nodes)")
    return float(best * step)
