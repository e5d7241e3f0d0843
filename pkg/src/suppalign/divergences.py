"""Empirical support divergences between latent sample clouds.

Supports are the empirical sample sets; every quantity here is a
finite-sample estimate of its population counterpart. The metric on the
latent space is Euclidean throughout, and the joint (latent, label) space
uses euclid + label_scale * [label mismatch].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .kernels import nearest_dists, nearest_dists_labeled, pairwise_dists

BRUTE_FORCE_LIMIT = 10_000  # support size above which a KD-tree takes over
WASSERSTEIN_MAX_N = 256


@dataclass
class SampleCloud:
    """A finite latent sample set, optionally labeled and weighted by class."""

    points: np.ndarray
    labels: np.ndarray | None = None
    class_marginal: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError(f"points must be 2-D, got shape {self.points.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.points.shape[0],):
                raise ValueError("labels must be one class id per point")
            if self.labels.size and self.labels.min() < 0:
                raise ValueError("labels must be nonnegative class ids")
        if self.class_marginal is not None:
            m = np.asarray(self.class_marginal, dtype=np.float64)
            if m.min() < 0 or abs(m.sum() - 1.0) > 1e-9:
                raise ValueError("class_marginal must be a probability vector")
            self.class_marginal = m

    def __len__(self):
        return self.points.shape[0]

    def n_classes(self) -> int:
        if self.class_marginal is not None:
            return len(self.class_marginal)
        if self.labels is None:
            raise ValueError("cloud has no class structure")
        return int(self.labels.max()) + 1

    def marginal(self, k_total: int) -> np.ndarray:
        """Explicit class marginal, or empirical label frequencies."""
        if self.class_marginal is not None:
            if len(self.class_marginal) != k_total:
                raise ValueError("class_marginal length disagrees with class count")
            return self.class_marginal
        counts = np.bincount(self.labels, minlength=k_total).astype(np.float64)
        return counts / counts.sum()


@dataclass
class DivergenceReport:
    step: int
    ssd: float
    cssd: float
    joint_ssd: float
    wasserstein: float
    per_class_terms: list[float] = field(default_factory=list)
    metric: str = "euclidean"

    def to_json(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "ssd": self.ssd,
                "cssd": self.cssd,
                "joint_ssd": self.joint_ssd,
                "wasserstein": self.wasserstein,
                "per_class_terms": self.per_class_terms,
                "metric": self.metric,
            }
        )

    @staticmethod
    def from_json(text: str) -> "DivergenceReport":
        return DivergenceReport(**json.loads(text))


def dist_to_support(z, cloud: SampleCloud) -> float:
    """Euclidean distance from a single point to the cloud's sample support."""
    if len(cloud) == 0:
        raise ValueError("empty cloud")
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    if len(cloud) > BRUTE_FORCE_LIMIT:
        dist, _ = cKDTree(cloud.points).query(z)
        return float(dist[0])
    return float(nearest_dists(z, cloud.points)[0])


def _mean_support_dist(pts: np.ndarray, support: np.ndarray) -> float:
    if support.shape[0] > BRUTE_FORCE_LIMIT:
        dists, _ = cKDTree(support).query(pts)
        return float(np.mean(dists))
    return float(np.mean(nearest_dists(pts, support)))


def ssd(p: SampleCloud, q: SampleCloud) -> float:
    """Symmetric support divergence between two sample clouds."""
    if len(p) == 0 or len(q) == 0:
        raise ValueError("empty cloud")
    return _mean_support_dist(p.points, q.points) + _mean_support_dist(q.points, p.points)


def cssd(p: SampleCloud, q: SampleCloud) -> tuple[float, np.ndarray]:
    """Class-conditional symmetric support divergence.

    Each class contributes its source-side term weighted by the source
    marginal and its target-side term weighted by the target marginal.
    Returns the total and the per-class contributions.
    """
    if p.labels is None or q.labels is None:
        raise ValueError("cssd needs labeled clouds")
    k_total = max(p.n_classes(), q.n_classes())
    pm, qm = p.marginal(k_total), q.marginal(k_total)
    terms = np.zeros(k_total)
    for k in range(k_total):
        if pm[k] <= 0 and qm[k] <= 0:
            continue
        p_k = p.points[p.labels == k]
        q_k = q.points[q.labels == k]
        if p_k.shape[0] == 0 or q_k.shape[0] == 0:
            raise ValueError(
                f"class {k} has positive marginal but no samples in "
                f"{'the first' if p_k.shape[0] == 0 else 'the second'} cloud"
            )
        term = 0.0
        if pm[k] > 0:
            term += pm[k] * _mean_support_dist(p_k, q_k)
        if qm[k] > 0:
            term += qm[k] * _mean_support_dist(q_k, p_k)
        terms[k] = term
    return float(terms.sum()), terms


def default_label_scale(p: SampleCloud, q: SampleCloud) -> float:
    """10x the pooled cloud diameter, so cross-label matches never win."""
    pooled = np.vstack([p.points, q.points])
    diam = float(pairwise_dists(pooled, pooled).max())
    return 10.0 * diam if diam > 0 else 10.0


def joint_ssd(p: SampleCloud, q: SampleCloud, label_scale: float | None = None) -> float:
    """SSD in the product metric euclid(z, z') + label_scale * [y != y']."""
    if len(p) == 0 or len(q) == 0:
        raise ValueError("empty cloud")
    if p.labels is None or q.labels is None:
        raise ValueError("joint_ssd needs labeled clouds")
    if label_scale is None:
        label_scale = default_label_scale(p, q)
    d_pq = nearest_dists_labeled(p.points, p.labels, q.points, q.labels, label_scale)
    d_qp = nearest_dists_labeled(q.points, q.labels, p.points, p.labels, label_scale)
    return float(np.mean(d_pq) + np.mean(d_qp))


def wasserstein_1(p: SampleCloud, q: SampleCloud) -> float:
    """Exact W1 between equal-size empirical clouds (optimal assignment)."""
    n = len(p)
    if n != len(q):
        raise ValueError("wasserstein_1 needs equal sample sizes; subsample first")
    if n == 0:
        raise ValueError("empty cloud")
    if n > WASSERSTEIN_MAX_N:
        raise ValueError(f"wasserstein_1 capped at n={WASSERSTEIN_MAX_N}, got {n}")
    cost = pairwise_dists(p.points, q.points)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / n)


def subsample_cloud(cloud: SampleCloud, n: int, rng: np.random.Generator) -> SampleCloud:
    """Uniform without-replacement subsample, used to equalize W1 inputs."""
    if n > len(cloud):
        raise ValueError(f"cannot subsample {n} from {len(cloud)} points")
    idx = rng.choice(len(cloud), size=n, replace=False)
    labels = cloud.labels[idx] if cloud.labels is not None else None
    return SampleCloud(cloud.points[idx], labels, cloud.class_marginal)
