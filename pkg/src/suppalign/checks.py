"""Finite-difference gradient verification and structural self-checks.

Everything here is an independent cross-examination of the main code
paths: gradients against central differences, optimizers against known
closed forms, divergence values against tiny hand-checkable examples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import datagen, divergences, imd, losses, models
from .autodiff import Tensor

FD_STEP = 1e-6  # small enough that leaky-relu kink straddles are rare
REL_TOL = 1e-6


@dataclass
class GradCheck:
    name: str
    rel_err: float
    n_params: int
    value: float

    @property
    def ok(self) -> bool:
        return self.rel_err < REL_TOL


def fd_gradient(value_fn, params: list[Tensor], h: float = FD_STEP) -> list[np.ndarray]:
    """Central differences entry by entry; h is scaled per coordinate."""
    grads = []
    for p in params:
        flat = p.data.ravel()
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            step = h * max(1.0, abs(orig))
            flat[i] = orig + step
            f_plus = value_fn()
            flat[i] = orig - step
            f_minus = value_fn()
            flat[i] = orig
            g[i] = (f_plus - f_minus) / (2.0 * step)
        grads.append(g.reshape(p.data.shape))
    return grads


def ad_gradient(loss_fn, params: list[Tensor]) -> tuple[list[np.ndarray], float]:
    ad.zero_grads(params)
    with ad.Graph() as g:
        loss = loss_fn()
        ad.backward(g, loss)
    grads = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params
    ]
    ad.zero_grads(params)
    return grads, loss.item()


def relative_error(g_ad: list[np.ndarray], g_fd: list[np.ndarray]) -> float:
    a = np.concatenate([g.ravel() for g in g_ad])
    f = np.concatenate([g.ravel() for g in g_fd])
    return float(np.linalg.norm(a - f) / (np.linalg.norm(f) + 1e-12))


def _tiny_setup(seed: int):
    rng = np.random.default_rng(seed)
    bundle = models.ModelBundle.init(
        rng, input_dim=2, n_classes=3, feature_dim=4, hidden=8, disc_hidden=8,
        conditional=True,
    )
    x_s = rng.normal(size=(7, 2))
    y_s = rng.integers(0, 3, size=7)
    x_t = rng.normal(size=(5, 2)) + 0.5
    return bundle, x_s, y_s, x_t


def gradient_check_cases(seed: int = 0) -> list[GradCheck]:
    """Every loss component against central differences.

    Stop-gradient quantities (the smoothness reference distribution and
    its adversarial direction, the certainty weights, the frozen
    embeddings fed to the discriminator step) are pinned at the base
    point inside each closure, so both sides differentiate the same
    function.
    """
    bundle, x_s, y_s, x_t = _tiny_setup(seed)
    fc, rp, allp = bundle.fc_params(), bundle.r_params(), bundle.all_params()

    def probs(x):
        return models.classify(bundle, models.extract(bundle, Tensor(x)))

    def embed(x):
        z = models.extract(bundle, Tensor(x))
        return models.outer_embed(z, models.classify(bundle, z))

    with ad.no_grad():
        s_s_const = embed(x_s).data.copy()
        s_t_const = embed(x_t).data.copy()
        w_s = models.entropy_weights(probs(x_s).data)
        w_t = models.entropy_weights(probs(x_t).data)
        p_ref_s = probs(x_s).data.copy()

    rng_dir = np.random.default_rng(seed + 1)
    dir_s = losses.vat_direction(bundle, x_s, xi=1e-6, n_power=1, rng=rng_dir)

    def vat_frozen(x, p_ref, direction, eps):
        return losses.kl_to_reference(
            p_ref, probs(x + eps * direction)
        )

    cases = [
        ("source_classification",
         lambda: losses.source_classification_loss(probs(x_s), y_s), fc),
        ("conditional_entropy",
         lambda: losses.target_conditional_entropy(probs(x_t)), fc),
        ("discriminator_marginal",
         lambda: losses.discriminator_loss(
             models.discriminate(bundle, Tensor(s_s_const)),
             models.discriminate(bundle, Tensor(s_t_const))), rp),
        ("discriminator_weighted",
         lambda: losses.discriminator_loss(
             models.discriminate(bundle, Tensor(s_s_const)),
             models.discriminate(bundle, Tensor(s_t_const)), w_s, w_t), rp),
        ("support_alignment",
         lambda: losses.support_alignment_loss(
             models.discriminate(bundle, embed(x_s)),
             models.discriminate(bundle, embed(x_t))), allp),
        ("smoothness_frozen",
         lambda: vat_frozen(x_s, p_ref_s, dir_s, 0.5), fc),
    ]

    def composite():
        l_y = losses.source_classification_loss(probs(x_s), y_s)
        l_ce = losses.target_conditional_entropy(probs(x_t))
        l_a = losses.support_alignment_loss(
            models.discriminate(bundle, embed(x_s)),
            models.discriminate(bundle, embed(x_t)),
        )
        l_v = vat_frozen(x_s, p_ref_s, dir_s, 0.5)
        total = ad.add(l_y, ad.scale(l_a, 1.0))
        total = ad.add(total, ad.scale(l_ce, 0.1))
        return ad.add(total, ad.scale(l_v, 1.0))

    cases.append(("composite_fc", composite, allp))

    # the gradient-reversed objective runs on a marginal bundle, whose
    # discriminator input is the bare feature width
    marg = models.ModelBundle.init(
        np.random.default_rng(seed + 2), input_dim=2, n_classes=3,
        feature_dim=4, hidden=8, disc_hidden=8, conditional=False,
    )

    def reversed_disc():
        z_s = models.extract(marg, Tensor(x_s))
        z_t = models.extract(marg, Tensor(x_t))
        l_y = losses.source_classification_loss(
            models.classify(marg, z_s), y_s
        )
        l_d = losses.discriminator_loss(
            models.discriminate(marg, z_s),
            models.discriminate(marg, z_t),
        )
        return ad.add(l_y, ad.scale(l_d, -0.7))

    cases.append(("reversed_discriminator", reversed_disc, marg.all_params()))

    results = []
    for name, fn, params in cases:
        g_ad, value = ad_gradient(fn, params)
        g_fd = fd_gradient(lambda: fn().item(), params)
        results.append(GradCheck(
            name=name, rel_err=relative_error(g_ad, g_fd),
            n_params=sum(p.data.size for p in params), value=value,
        ))
    return results


# ---------------------------------------------------------------------------
# structural invariants (fast, deterministic)


def _inv_no_grad_purity() -> str:
    bundle, x_s, _, _ = _tiny_setup(3)
    with ad.Graph() as g:
        _ = models.extract(bundle, Tensor(x_s))
        n_recorded = len(g.nodes)
        with ad.no_grad():
            _ = models.extract(bundle, Tensor(x_s))
        if len(g.nodes) != n_recorded:
            return "no_grad leaked nodes onto an active graph"
    return ""


def _inv_crossed_cssd() -> str:
    # two classes whose supports swap between domains: each conditional
    # side contributes its class weight times the swap distance
    p = divergences.SampleCloud(
        np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([0, 1])
    )
    q = divergences.SampleCloud(
        np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([0, 1])
    )
    total, _ = divergences.cssd(p, q)
    if abs(total - 2.0) > 1e-12:
        return f"crossed two-class cssd expected 2.0, got {total}"
    if abs(divergences.ssd(p, q)) > 1e-12:
        return "marginal ssd should vanish on swapped supports"
    return ""


def _inv_count_rounding() -> str:
    counts = datagen.largest_remainder_counts(np.array([0.229, 0.647, 0.124]), 1000)
    if counts.tolist() != [229, 647, 124]:
        return f"count rounding drifted: {counts.tolist()}"
    return ""


def _inv_lp_vs_grid() -> str:
    rng = np.random.default_rng(11)
    inst = imd.random_imd_instance(rng, m=5, n_classes=2)
    lp = imd.solve_imd(inst).imd_value
    grid = imd.grid_imd_value(inst, step=0.01)
    if grid > lp + 1e-9:
        return f"grid witness beat the LP: {grid} > {lp}"
    if lp - grid > 0.02:
        return f"lp/grid gap {lp - grid} exceeds one step of resolution"
    return ""


def _inv_sgd_quadratic() -> str:
    # plain SGD on 0.5*x^2 with exact known trajectory: x <- x*(1-lr)
    from .harness import _Sgd

    p = Tensor(np.array([[2.0]]), requires_grad=True)
    opt = _Sgd([p], momentum=0.0, weight_decay=0.0)
    x = 2.0
    for _ in range(5):
        p.grad = p.data.copy()
        opt.step(0.1)
        x *= 0.9
    if abs(p.data[0, 0] - x) > 1e-12:
        return f"sgd trajectory drifted: {p.data[0, 0]} vs {x}"
    return ""


INVARIANTS = [
    ("no_grad_purity", _inv_no_grad_purity),
    ("crossed_cssd", _inv_crossed_cssd),
    ("count_rounding", _inv_count_rounding),
    ("lp_vs_grid", _inv_lp_vs_grid),
    ("sgd_quadratic", _inv_sgd_quadratic),
]


def run_all(seed: int = 0) -> dict:
    """Gradient checks plus invariants; report is JSON-serializable."""
    grads = gradient_check_cases(seed)
    inv = []
    for name, fn in INVARIANTS:
        try:
            detail = fn()
        except Exception as exc:  # a crashed invariant is a failed invariant
            detail = f"{type(exc).__name__}: {exc}"
        inv.append({"name": name, "ok": not detail, "detail": detail})
    report = {
        "gradients": [
            {"name": c.name, "rel_err": c.rel_err, "n_params": c.n_params,
             "ok": c.ok}
            for c in grads
        ],
        "invariants": inv,
        "max_rel_err": max(c.rel_err for c in grads),
        "ok": all(c.ok for c in grads) and all(i["ok"] for i in inv),
    }
    return report
