"""Training loop, method toggles, evaluation grid, and persistence.

One optimization step alternates a discriminator update (log-loss) with a
feature/classifier update (task loss + weighted alignment signal +
conditional-entropy and smoothness regularizers). Method toggles:

- casa: conditional embedding s = z (x) p with certainty weights on the
  discriminator loss, support-alignment signal for f,c.
- asa_baseline: marginal embedding s = z, same support-alignment signal,
  no conditioning and no certainty weights.
- dann_baseline: marginal discriminator with a gradient-reversed log-loss
  as the alignment signal (classic adversarial distribution matching).
- source_only: task loss alone, no discriminator.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import datagen, divergences, losses, models
from .autodiff import Tensor

METHODS = ("casa", "asa_baseline", "dann_baseline", "source_only")
EVAL_CLOUD_CAP = 512
EVAL_W1_CAP = 256
GEOMETRY_SEED_OFFSET = 104729


@dataclass
class TrainConfig:
    method: str = "casa"
    steps: int = 4000
    batch: int = 64
    lr: float = 0.02
    momentum: float = 0.9
    weight_decay: float = 5e-4
    anneal_start: int = 2000
    anneal_end: int = 4000
    anneal_final: float = 1e-3
    lambda_align: float = 3.0
    lambda_ce: float = 1.0
    lambda_v_src: float = 1.0
    lambda_v_tgt: float = 0.5
    align_warmup: int = 1000
    vat_eps: float = 0.5
    vat_xi: float = 1e-6
    vat_power_iters: int = 1
    seed: int = 0
    eval_every: int = 500
    feature_dim: int = 8
    hidden: int = 64
    disc_hidden: int = 64
    leaky_slope: float = 0.1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.steps <= 0:
            raise ValueError("steps must be positive")
        if not 0 <= self.align_warmup <= self.steps:
            raise ValueError("align warmup must lie in [0, steps]")
        for name in ("lambda_align", "lambda_ce", "lambda_v_src", "lambda_v_tgt"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0 <= self.anneal_start <= self.anneal_end:
            raise ValueError("anneal window must satisfy 0 <= start <= end")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def lr_at(self, step: int) -> float:
        if step < self.anneal_start or self.anneal_end == self.anneal_start:
            return self.lr
        if step >= self.anneal_end:
            return self.lr * self.anneal_final
        frac = (step - self.anneal_start) / (self.anneal_end - self.anneal_start)
        return self.lr * (1.0 + (self.anneal_final - 1.0) * frac)

    def lambda_align_at(self, step: int) -> float:
        if self.align_warmup <= 0:
            return self.lambda_align
        return min(1.0, step / self.align_warmup) * self.lambda_align


@dataclass
class EvalPoint:
    step: int
    l_y: float
    l_ce: float
    l_v_src: float
    l_v_tgt: float
    l_d: float
    l_align: float
    total_fc: float
    per_class_acc: float
    divergence: dict

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunRecord:
    config: dict
    config_hash: str
    method: str
    seed: int
    alpha: float | None
    evals: list = field(default_factory=list)  # EvalPoint dicts
    final_per_class_acc: float = float("nan")
    wall_time_s: float = 0.0
    aborted: bool = False
    abort_step: int = -1
    abort_reason: str = ""
    data_meta: dict = field(default_factory=dict)
    source_marginal: list = field(default_factory=list)
    target_marginal: list = field(default_factory=list)
    split_seed: int = 0
    final_clouds: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))

    @staticmethod
    def from_json(text: str) -> "RunRecord":
        return RunRecord(**json.loads(text))


class _Sgd:
    """Momentum SGD with decoupled-in-gradient weight decay."""

    def __init__(self, params: list[Tensor], momentum: float, weight_decay: float):
        self.params = params
        self.vel = [np.zeros_like(p.data) for p in params]
        self.momentum = momentum
        self.weight_decay = weight_decay

    def step(self, lr: float) -> None:
        for p, v in zip(self.params, self.vel):
            if p.grad is None:
                continue
            v *= self.momentum
            v += p.grad + self.weight_decay * p.data
            p.data -= lr * v


def per_class_accuracy(pred: np.ndarray, true: np.ndarray, n_classes: int) -> float:
    """Mean within-class recall."""
    pred = np.asarray(pred, dtype=np.int64)
    true = np.asarray(true, dtype=np.int64)
    if true.size == 0:
        raise ValueError("empty evaluation set")
    recalls = np.zeros(n_classes)
    for k in range(n_classes):
        mask = true == k
        if not mask.any():
            raise ValueError(f"class {k} absent from the evaluation truth")
        recalls[k] = float(np.mean(pred[mask] == k))
    return float(recalls.mean())


def stratified_split(
    labels: np.ndarray, test_frac: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class split into (train_idx, test_idx); every class lands >= 1
    test sample when it has >= 2 members."""
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for k in np.unique(labels):
        idx = np.nonzero(labels == k)[0]
        idx = idx[rng.permutation(idx.size)]
        n_test = max(1, int(round(test_frac * idx.size))) if idx.size > 1 else 0
        test_parts.append(idx[:n_test])
        train_parts.append(idx[n_test:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))


def _param_sums(params: list[Tensor]) -> np.ndarray:
    return np.array([float(p.data.sum()) for p in params])


def _embed_const(bundle, x: np.ndarray, conditional: bool) -> tuple[np.ndarray, np.ndarray]:
    """Embedding and class probabilities as plain arrays (no graph)."""
    with ad.no_grad():
        z = models.extract(bundle, Tensor(x))
        p = models.classify(bundle, z)
        s = models.outer_embed(z, p).data if conditional else z.data
    return s, p.data


def _evaluate(
    bundle, data: datagen.DomainPair, test_idx: np.ndarray, step: int,
    cfg: TrainConfig, loss_snapshot: dict,
) -> EvalPoint:
    K = data.n_classes
    rng_eval = np.random.default_rng([cfg.seed, 7919, step])

    x_test = data.target_x[test_idx]
    y_test = data.target_labels_heldout[test_idx]
    acc = per_class_accuracy(models.predict(bundle, x_test), y_test, K)

    def latent_cloud(x, y, cap):
        if x.shape[0] > cap:
            marg = np.bincount(y, minlength=K).astype(np.float64)
            x, y = datagen.subsample_to_marginal(
                x, y, marg / marg.sum(), cap, int(rng_eval.integers(2**31))
            )
        with ad.no_grad():
            z = models.extract(bundle, Tensor(x)).data
        return divergences.SampleCloud(z, y)

    src_cloud = latent_cloud(data.source_x, data.source_y, EVAL_CLOUD_CAP)
    tgt_cloud = latent_cloud(x_test, y_test, EVAL_CLOUD_CAP)

    ssd_val = divergences.ssd(src_cloud, tgt_cloud)
    cssd_val, terms = divergences.cssd(src_cloud, tgt_cloud)
    joint_val = divergences.joint_ssd(src_cloud, tgt_cloud)
    n_w = min(EVAL_W1_CAP, len(src_cloud), len(tgt_cloud))
    w1 = divergences.wasserstein_1(
        divergences.subsample_cloud(src_cloud, n_w, rng_eval),
        divergences.subsample_cloud(tgt_cloud, n_w, rng_eval),
    )
    report = divergences.DivergenceReport(
        step=step, ssd=ssd_val, cssd=cssd_val, joint_ssd=joint_val,
        wasserstein=w1, per_class_terms=terms.tolist(),
    )
    return EvalPoint(
        step=step, per_class_acc=acc, divergence=dataclasses.asdict(report),
        **loss_snapshot,
    )


def train(cfg: TrainConfig, data: datagen.DomainPair) -> tuple[models.ModelBundle, RunRecord]:
    """Alternating optimization; returns the trained bundle and its record."""
    if data.n_classes < 2:
        raise ValueError("need at least two classes")
    t_start = time.perf_counter()
    K = data.n_classes
    rng = np.random.default_rng(cfg.seed)

    split_seed = cfg.seed + 17
    train_idx, test_idx = stratified_split(
        data.target_labels_heldout, test_frac=0.2, seed=split_seed
    )
    view = data.training_view(train_idx)
    xs_all, ys_all, xt_all = view.source_x, view.source_y, view.target_x

    conditional = cfg.method == "casa"
    adversarial = cfg.method != "source_only"
    bundle = models.ModelBundle.init(
        rng, input_dim=xs_all.shape[1], n_classes=K, feature_dim=cfg.feature_dim,
        hidden=cfg.hidden, disc_hidden=cfg.disc_hidden, slope=cfg.leaky_slope,
        conditional=conditional,
    )
    sgd_fc = _Sgd(bundle.fc_params(), cfg.momentum, cfg.weight_decay)
    sgd_r = _Sgd(bundle.r_params(), cfg.momentum, cfg.weight_decay)

    record = RunRecord(
        config=cfg.to_dict(), config_hash=cfg.config_hash(), method=cfg.method,
        seed=cfg.seed, alpha=data.meta.get("alpha"), data_meta=dict(data.meta),
        source_marginal=data.source_marginal.tolist(),
        target_marginal=data.target_marginal.tolist(), split_seed=split_seed,
    )

    loss_snapshot = {
        "l_y": 0.0, "l_ce": 0.0, "l_v_src": 0.0, "l_v_tgt": 0.0,
        "l_d": 0.0, "l_align": 0.0, "total_fc": 0.0,
    }

    for t in range(cfg.steps):
        lr_t = cfg.lr_at(t)
        lam_align = cfg.lambda_align_at(t)
        src_idx = rng.integers(0, xs_all.shape[0], size=cfg.batch)
        tgt_idx = rng.integers(0, xt_all.shape[0], size=cfg.batch)
        x_s, y_s = xs_all[src_idx], ys_all[src_idx]
        x_t = xt_all[tgt_idx]

        try:
            # ---- discriminator step (f, c frozen as constants) ----
            l_d_val = 0.0
            if adversarial:
                fc_sums = _param_sums(bundle.fc_params())
                s_s, p_s_const = _embed_const(bundle, x_s, conditional)
                s_t, p_t_const = _embed_const(bundle, x_t, conditional)
                w_s = models.entropy_weights(p_s_const) if cfg.method == "casa" else None
                w_t = models.entropy_weights(p_t_const) if cfg.method == "casa" else None
                with ad.Graph() as g_r:
                    r_s = models.discriminate(bundle, Tensor(s_s))
                    r_t = models.discriminate(bundle, Tensor(s_t))
                    l_d = losses.discriminator_loss(r_s, r_t, w_s, w_t)
                    ad.backward(g_r, l_d)
                l_d_val = l_d.item()
                sgd_r.step(lr_t)
                bundle.zero_grads()
                if not np.array_equal(fc_sums, _param_sums(bundle.fc_params())):
                    raise AssertionError("discriminator step touched f,c parameters")

            # ---- feature/classifier step (r frozen) ----
            r_sums = _param_sums(bundle.r_params())
            with ad.Graph() as g_fc:
                z_s = models.extract(bundle, Tensor(x_s))
                p_s = models.classify(bundle, z_s)
                l_y = losses.source_classification_loss(p_s, y_s)
                if not adversarial:
                    total = l_y
                    vals = dict(l_y=l_y.item(), l_ce=0.0, l_v_src=0.0,
                                l_v_tgt=0.0, l_align=0.0)
                else:
                    z_t = models.extract(bundle, Tensor(x_t))
                    p_t = models.classify(bundle, z_t)
                    l_ce = losses.target_conditional_entropy(p_t)
                    l_v_s = losses.vat_loss(
                        bundle, x_s, cfg.vat_eps, cfg.vat_xi, cfg.vat_power_iters, rng
                    )
                    l_v_t = losses.vat_loss(
                        bundle, x_t, cfg.vat_eps, cfg.vat_xi, cfg.vat_power_iters, rng
                    )
                    if cfg.method == "dann_baseline":
                        r_s = models.discriminate(bundle, z_s)
                        r_t = models.discriminate(bundle, z_t)
                        align = ad.scale(losses.discriminator_loss(r_s, r_t), -1.0)
                    else:
                        if conditional:
                            e_s = models.outer_embed(z_s, p_s)
                            e_t = models.outer_embed(z_t, p_t)
                        else:
                            e_s, e_t = z_s, z_t
                        r_s = models.discriminate(bundle, e_s)
                        r_t = models.discriminate(bundle, e_t)
                        align = losses.support_alignment_loss(r_s, r_t)
                    total = ad.add(l_y, ad.scale(align, lam_align))
                    total = ad.add(total, ad.scale(l_ce, cfg.lambda_ce))
                    total = ad.add(total, ad.scale(l_v_s, cfg.lambda_v_src))
                    total = ad.add(total, ad.scale(l_v_t, cfg.lambda_v_tgt))
                    vals = dict(l_y=l_y.item(), l_ce=l_ce.item(),
                                l_v_src=l_v_s.item(), l_v_tgt=l_v_t.item(),
                                l_align=align.item())
                ad.backward(g_fc, total)
            total_val = total.item()
            recon = (
                ((vals["l_y"] + lam_align * vals["l_align"])
                 + cfg.lambda_ce * vals["l_ce"])
                + cfg.lambda_v_src * vals["l_v_src"]
            ) + cfg.lambda_v_tgt * vals["l_v_tgt"] if adversarial else vals["l_y"]
            if abs(total_val - recon) > 1e-12:
                raise AssertionError(
                    f"loss bookkeeping drift {abs(total_val - recon)} at step {t}"
                )
            if not np.isfinite(total_val) or not np.isfinite(l_d_val):
                raise ValueError(f"non-finite loss at step {t}")
            sgd_fc.step(lr_t)
            bundle.zero_grads()
            if not np.array_equal(r_sums, _param_sums(bundle.r_params())):
                raise AssertionError("feature step touched discriminator parameters")
        except (ValueError, FloatingPointError) as exc:
            record.aborted = True
            record.abort_step = t
            record.abort_reason = f"{type(exc).__name__}: {exc}"
            break

        loss_snapshot = dict(l_d=l_d_val, total_fc=total_val, **vals)
        done = t + 1
        if done % cfg.eval_every == 0 or done == cfg.steps:
            point = _evaluate(bundle, data, test_idx, done, cfg, loss_snapshot)
            record.evals.append(point.to_dict())
            record.final_per_class_acc = point.per_class_acc

    if not record.evals and not record.aborted:
        point = _evaluate(bundle, data, test_idx, cfg.steps, cfg, loss_snapshot)
        record.evals.append(point.to_dict())
        record.final_per_class_acc = point.per_class_acc

    if not record.aborted:
        record.final_clouds = _final_clouds(bundle, data, test_idx, cfg)
    record.wall_time_s = time.perf_counter() - t_start
    return bundle, record


def _final_clouds(bundle, data, test_idx, cfg) -> dict:
    rng_eval = np.random.default_rng([cfg.seed, 104651])
    K = data.n_classes

    def cloud(x, y):
        if x.shape[0] > EVAL_CLOUD_CAP:
            marg = np.bincount(y, minlength=K).astype(np.float64)
            x, y = datagen.subsample_to_marginal(
                x, y, marg / marg.sum(), EVAL_CLOUD_CAP, int(rng_eval.integers(2**31))
            )
        with ad.no_grad():
            z = models.extract(bundle, Tensor(x)).data
        return z, y

    z_s, y_s = cloud(data.source_x, data.source_y)
    z_t, y_t = cloud(data.target_x[test_idx], data.target_labels_heldout[test_idx])
    return {
        "source_z": z_s.tolist(), "source_y": y_s.tolist(),
        "target_z": z_t.tolist(), "target_y": y_t.tolist(),
    }


# ---------------------------------------------------------------------------
# grid runner


@dataclass
class DataConfig:
    n_classes: int = 3
    n_source: int = 2000
    n_target: int = 2000
    rotation_deg: float = 30.0
    translation: float = 0.5
    cluster_std: float = 0.6
    radius: float = 2.0
    marginal_floor: float = 0.02

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def make_data(
    dc: DataConfig, alpha: float | None, seed: int,
    target_marginal: np.ndarray | None = None,
) -> datagen.DomainPair:
    spec = datagen.LabelShiftSpec(alpha=alpha, n_classes=dc.n_classes, seed=seed)
    return datagen.make_gaussian_domains(
        n_classes=dc.n_classes, n_source=dc.n_source, n_target=dc.n_target,
        shift=spec, geometry_seed=seed + GEOMETRY_SEED_OFFSET,
        rotation_deg=dc.rotation_deg, translation=dc.translation,
        cluster_std=dc.cluster_std, radius=dc.radius,
        marginal_floor=dc.marginal_floor, target_marginal=target_marginal,
    )


@dataclass
class GridCell:
    method: str
    alpha: float | None
    accs: list
    cssds: list
    n_seeds: int

    @property
    def n_complete(self) -> int:
        return len(self.accs)

    def summary(self) -> dict:
        acc = np.array(self.accs, dtype=np.float64)
        cs = np.array(self.cssds, dtype=np.float64)
        return {
            "method": self.method,
            "alpha": self.alpha,
            "n_seeds": self.n_seeds,
            "n_complete": self.n_complete,
            "acc_mean": float(acc.mean()) if acc.size else float("nan"),
            "acc_std": float(acc.std()) if acc.size else float("nan"),
            "cssd_mean": float(cs.mean()) if cs.size else float("nan"),
            "cssd_std": float(cs.std()) if cs.size else float("nan"),
        }


@dataclass
class GridReport:
    cells: list  # GridCell
    records: list  # RunRecord

    def to_csv(self) -> str:
        cols = ["method", "alpha", "n_seeds", "n_complete",
                "acc_mean", "acc_std", "cssd_mean", "cssd_std"]
        lines = [",".join(cols)]
        for cell in self.cells:
            s = cell.summary()
            row = []
            for c in cols:
                v = s[c]
                if c == "alpha":
                    row.append("none" if v is None else repr(float(v)))
                elif isinstance(v, float):
                    row.append(repr(v))
                else:
                    row.append(str(v))
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def run_grid(
    methods: list[str],
    alphas: list[float | None],
    seeds: list[int],
    base_config: TrainConfig,
    data_config: DataConfig | None = None,
    target_marginal: np.ndarray | None = None,
    keep_records: bool = True,
) -> GridReport:
    """Full (method, alpha, seed) sweep with shared data per (alpha, seed).

    The target marginal and the domain draw depend only on (alpha, seed),
    so every method in a cell trains against the identical dataset; an
    aborted run leaves its cell incomplete instead of failing the grid.
    """
    dc = data_config or DataConfig()
    datasets = {
        (ai, s): make_data(dc, alpha, s, target_marginal)
        for ai, alpha in enumerate(alphas)
        for s in seeds
    }
    cells, records = [], []
    for method in methods:
        for ai, alpha in enumerate(alphas):
            cell = GridCell(method=method, alpha=alpha, accs=[], cssds=[],
                            n_seeds=len(seeds))
            for s in seeds:
                cfg = replace(base_config, method=method, seed=s)
                _, rec = train(cfg, datasets[(ai, s)])
                if keep_records:
                    records.append(rec)
                if rec.aborted:
                    continue
                cell.accs.append(rec.final_per_class_acc)
                cell.cssds.append(rec.evals[-1]["divergence"]["cssd"])
            cells.append(cell)
    return GridReport(cells=cells, records=records)


# ---------------------------------------------------------------------------
# plot data emission


def pca_2d(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """(projection matrix (m,2), projected points (n,2), variance fraction).

    Deterministic eigenvector signs: the largest-magnitude component of
    each axis is made positive.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] < 2:
        raise ValueError("pca_2d needs (n, m>=2) data")
    center = z.mean(axis=0)
    zc = z - center
    cov = zc.T @ zc / max(1, zc.shape[0])
    vals, vecs = np.linalg.eigh(cov)
    proj = vecs[:, ::-1][:, :2].copy()
    for j in range(2):
        lead = np.argmax(np.abs(proj[:, j]))
        if proj[lead, j] < 0:
            proj[:, j] = -proj[:, j]
    total = float(vals.sum())
    explained = float(vals[::-1][:2].sum() / total) if total > 0 else 0.0
    return proj, zc @ proj, explained


_SERIES_COLS = [
    "method", "seed", "alpha", "step", "l_y", "l_ce", "l_v_src", "l_v_tgt",
    "l_d", "l_align", "total_fc", "per_class_acc", "ssd", "cssd",
    "joint_ssd", "wasserstein",
]


def series_rows(records: list[RunRecord]) -> list[dict]:
    rows = []
    for rec in records:
        for ev in rec.evals:
            div = ev["divergence"]
            rows.append({
                "method": rec.method, "seed": rec.seed, "alpha": rec.alpha,
                "step": ev["step"], "l_y": ev["l_y"], "l_ce": ev["l_ce"],
                "l_v_src": ev["l_v_src"], "l_v_tgt": ev["l_v_tgt"],
                "l_d": ev["l_d"], "l_align": ev["l_align"],
                "total_fc": ev["total_fc"], "per_class_acc": ev["per_class_acc"],
                "ssd": div["ssd"], "cssd": div["cssd"],
                "joint_ssd": div["joint_ssd"], "wasserstein": div["wasserstein"],
            })
    return rows


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def series_csv(records: list[RunRecord]) -> str:
    lines = [",".join(_SERIES_COLS)]
    for row in series_rows(records):
        lines.append(",".join(_fmt(row[c]) for c in _SERIES_COLS))
    return "\n".join(lines) + "\n"


def read_series_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.strip().split("\n") if ln]
    header = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        item = {}
        for key, tok in zip(header, ln.split(",")):
            if key == "method":
                item[key] = tok
            elif key == "alpha":
                item[key] = None if tok == "none" else float(tok)
            elif key in ("seed", "step"):
                item[key] = int(tok)
            else:
                item[key] = float(tok)
        out.append(item)
    return out


def features_csv(records: list[RunRecord]) -> tuple[str, dict]:
    """Per-point 2-D projections of the final clouds, plus the projection
    matrices used (keyed by method/alpha/seed)."""
    header = ["method", "seed", "alpha", "domain", "label", "x0", "x1"]
    lines = [",".join(header)]
    projections = {}
    for rec in records:
        if not rec.final_clouds:
            continue
        z_s = np.array(rec.final_clouds["source_z"])
        z_t = np.array(rec.final_clouds["target_z"])
        pooled = np.vstack([z_s, z_t])
        proj, _, explained = pca_2d(pooled)
        center = pooled.mean(axis=0)
        key = f"{rec.method}|{_fmt(rec.alpha)}|{rec.seed}"
        projections[key] = {
            "projection": proj.tolist(),
            "center": center.tolist(),
            "explained_fraction": explained,
        }
        for domain, z, ys in (
            ("source", z_s, rec.final_clouds["source_y"]),
            ("target", z_t, rec.final_clouds["target_y"]),
        ):
            pts = (z - center) @ proj
            for row, lab in zip(pts, ys):
                lines.append(",".join([
                    rec.method, str(rec.seed), _fmt(rec.alpha), domain,
                    str(int(lab)), repr(float(row[0])), repr(float(row[1])),
                ]))
    return "\n".join(lines) + "\n", projections


def emit_plot_data(records: list[RunRecord], out_dir) -> dict:
    """Write series.csv, features_2d.csv, and pca.json; returns the paths."""
    import pathlib

    if not records:
        raise ValueError("no records to emit")
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "series": out / "series.csv",
        "features": out / "features_2d.csv",
        "pca": out / "pca.json",
    }
    paths["series"].write_text(series_csv(records))
    feat, projections = features_csv(records)
    paths["features"].write_text(feat)
    paths["pca"].write_text(json.dumps(projections, indent=1))
    return {k: str(v) for k, v in paths.items()}
