"""Dataset construction: shifted synthetic domains and small digit files.

The label-shift protocol draws the target class marginal from a symmetric
Dirichlet; the source marginal stays uniform. Synthetic domains are 2-D
class-conditional Gaussians, with the target conditionals nudged by a
small fixed rotation + translation so that covariate structure differs
without destroying class geometry.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np


@dataclass
class LabelShiftSpec:
    alpha: float | None
    n_classes: int
    seed: int

    def __post_init__(self):
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError(f"alpha must be positive or None, got {self.alpha}")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")


@dataclass
class TrainingView:
    """What training code is allowed to see. No target labels, by design."""

    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray


@dataclass
class DomainPair:
    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    target_labels_heldout: np.ndarray  # evaluation only
    source_marginal: np.ndarray
    target_marginal: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.source_marginal)

    def training_view(self, target_indices: np.ndarray | None = None) -> TrainingView:
        """Label-free view; optionally restricted to a target subset."""
        tx = self.target_x if target_indices is None else self.target_x[target_indices]
        return TrainingView(self.source_x, self.source_y, tx)


def sample_target_marginal(spec: LabelShiftSpec) -> np.ndarray:
    """Symmetric Dirichlet draw; alpha None means exactly uniform."""
    if spec.alpha is None:
        return np.full(spec.n_classes, 1.0 / spec.n_classes)
    rng = np.random.default_rng(spec.seed)
    return rng.dirichlet(np.full(spec.n_classes, float(spec.alpha)))


def largest_remainder_counts(marginal: np.ndarray, n: int) -> np.ndarray:
    """Integer class counts summing exactly to n."""
    marginal = np.asarray(marginal, dtype=np.float64)
    if marginal.min() < 0 or abs(marginal.sum() - 1.0) > 1e-9:
        raise ValueError("marginal must be a probability vector")
    raw = marginal * n
    counts = np.floor(raw).astype(np.int64)
    short = n - int(counts.sum())
    if short:
        remainders = raw - counts
        # ties broken toward lower class index: argsort is stable on -rem
        top = np.argsort(-remainders, kind="stable")[:short]
        counts[top] += 1
    return counts


def floor_marginal(marginal: np.ndarray, min_frac: float) -> np.ndarray:
    """Lift every coordinate to at least min_frac, then renormalize.

    Keeps severe Dirichlet draws usable: every class retains enough mass
    to be present in both splits of a finite sample.
    """
    m = np.maximum(np.asarray(marginal, dtype=np.float64), min_frac)
    return m / m.sum()


def make_gaussian_domains(
    n_classes: int,
    n_source: int,
    n_target: int,
    shift: LabelShiftSpec,
    geometry_seed: int,
    rotation_deg: float = 15.0,
    translation: float = 0.3,
    cluster_std: float = 0.35,
    radius: float = 2.0,
    marginal_floor: float = 0.0,
    target_marginal: np.ndarray | None = None,
) -> DomainPair:
    """Class-conditional 2-D Gaussians with a rotated+shifted target copy.

    An explicit target_marginal overrides the shift draw (the floor still
    applies); useful for pinning a known imbalance.
    """
    if n_classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(geometry_seed)
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    theta = np.deg2rad(rotation_deg)
    rot = np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    )
    shiftvec = translation * np.array([np.cos(np.pi / 4), np.sin(np.pi / 4)])

    source_marginal = np.full(n_classes, 1.0 / n_classes)
    pinned = target_marginal is not None
    if target_marginal is None:
        target_marginal = sample_target_marginal(shift)
    else:
        target_marginal = np.asarray(target_marginal, dtype=np.float64)
        if len(target_marginal) != n_classes:
            raise ValueError("target_marginal length must match n_classes")
    if marginal_floor > 0:
        target_marginal = floor_marginal(target_marginal, marginal_floor)

    def draw(counts, transform):
        xs, ys = [], []
        for k, c in enumerate(counts):
            if c == 0:
                raise ValueError(
                    f"class {k} rounds to zero samples; raise n or floor the marginal"
                )
            pts = means[k] + cluster_std * rng.standard_normal((c, 2))
            if transform:
                pts = pts @ rot.T + shiftvec
            xs.append(pts)
            ys.append(np.full(c, k, dtype=np.int64))
        x = np.vstack(xs)
        y = np.concatenate(ys)
        order = rng.permutation(len(y))
        return x[order], y[order]

    src_x, src_y = draw(largest_remainder_counts(source_marginal, n_source), False)
    tgt_x, tgt_y = draw(largest_remainder_counts(target_marginal, n_target), True)

    return DomainPair(
        source_x=src_x,
        source_y=src_y,
        target_x=tgt_x,
        target_labels_heldout=tgt_y,
        source_marginal=source_marginal,
        target_marginal=target_marginal,
        meta={
            "kind": "gaussian_blobs",
            "n_classes": n_classes,
            "rotation_deg": rotation_deg,
            "translation": translation,
            "cluster_std": cluster_std,
            "radius": radius,
            "geometry_seed": geometry_seed,
            "alpha": shift.alpha,
            "shift_seed": shift.seed,
            "marginal_floor": marginal_floor,
            "pinned_marginal": pinned,
        },
    )


# ---------------------------------------------------------------------------
# digit file ingestion

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise ValueError(f"truncated file: expected {n} bytes of {what}, got {len(buf)}")
    return buf


def _load_idx_images(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(">iiii", _read_exact(fh, 16, "header"))
        if magic != _IDX_IMAGES_MAGIC:
            raise ValueError(f"bad magic number {magic:#010x} for image file")
        raw = _read_exact(fh, n * rows * cols, "pixels")
    return np.frombuffer(raw, dtype=np.uint8).reshape(n, rows, cols)


def _load_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, n = struct.unpack(">ii", _read_exact(fh, 8, "header"))
        if magic != _IDX_LABELS_MAGIC:
            raise ValueError(f"bad magic number {magic:#010x} for label file")
        raw = _read_exact(fh, n, "labels")
    return np.frombuffer(raw, dtype=np.uint8).astype(np.int64)


def _load_csv_digits(path) -> tuple[np.ndarray, np.ndarray]:
    table = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    labels = table[:, 0].astype(np.int64)
    pixels = table[:, 1:]
    side = int(round(np.sqrt(pixels.shape[1])))
    if side * side != pixels.shape[1]:
        raise ValueError(f"pixel columns ({pixels.shape[1]}) are not a square image")
    return pixels.reshape(-1, side, side), labels


def _avg_pool(frames: np.ndarray, factor: int) -> np.ndarray:
    n, h, w = frames.shape
    if factor < 1 or h % factor or w % factor:
        raise ValueError(f"downsample factor {factor} does not divide {h}x{w}")
    out = frames.reshape(n, h // factor, factor, w // factor, factor).mean(axis=(2, 4))
    return out.reshape(n, -1)


def load_digit_files(
    path_images, path_labels=None, downsample: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Load labeled digits from an IDX pair or a single CSV.

    CSV rows are label,pixel,pixel,...; a CSV carries its own labels so
    path_labels is omitted. Pixels come back in [0,1], flattened after
    average pooling by the downsample factor.
    """
    if path_labels is None:
        frames, labels = _load_csv_digits(path_images)
    else:
        frames = _load_idx_images(path_images).astype(np.float64)
        labels = _load_idx_labels(path_labels)
        if frames.shape[0] != labels.shape[0]:
            raise ValueError(
                f"{frames.shape[0]} images but {labels.shape[0]} labels"
            )
    if labels.size and (labels.min() < 0 or labels.max() > 9):
        bad = labels[(labels < 0) | (labels > 9)][0]
        raise ValueError(f"label out of range: {bad}")
    x = _avg_pool(frames, downsample) / 255.0
    return x, labels


def subsample_to_marginal(
    x: np.ndarray, y: np.ndarray, marginal: np.ndarray, n: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Resample a labeled set to a prescribed class marginal of size n."""
    rng = np.random.default_rng(seed)
    counts = largest_remainder_counts(marginal, n)
    idx_parts = []
    for k, c in enumerate(counts):
        pool = np.nonzero(y == k)[0]
        if pool.size < c:
            raise ValueError(
                f"class {k} has {pool.size} samples but {c} requested "
                f"(short by {c - pool.size})"
            )
        idx_parts.append(rng.choice(pool, size=c, replace=False))
    idx = np.concatenate(idx_parts)
    rng.shuffle(idx)
    return x[idx], y[idx]


def dataset_manifest(name: str, pair: DomainPair) -> str:
    return json.dumps(
        {
            "name": name,
            "n_S": int(pair.source_x.shape[0]),
            "n_T": int(pair.target_x.shape[0]),
            "K": pair.n_classes,
            "alpha": pair.meta.get("alpha"),
            "seed": pair.meta.get("shift_seed"),
            "marginals": {
                "source": pair.source_marginal.tolist(),
                "target": pair.target_marginal.tolist(),
            },
        }
    )
