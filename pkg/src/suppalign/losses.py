"""The five loss terms of the alternating training objective.

All losses are built from autodiff primitives so their gradients come from
the tape. Probability inputs are clamped at 1e-12 before any log, which
keeps every term finite and makes the analytic zero cases exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import models
from .autodiff import Tensor
from .kernels import nearest_abs_diff

LOG_FLOOR = 1e-12


@dataclass
class LossBreakdown:
    """Per-step loss components and the weighted totals."""

    l_y: float = 0.0
    l_ce: float = 0.0
    l_v_src: float = 0.0
    l_v_tgt: float = 0.0
    l_d: float = 0.0
    l_align: float = 0.0
    total_fc: float = 0.0
    total_r: float = 0.0
    lambda_align: float = 0.0
    lambda_ce: float = 0.0
    lambda_v_src: float = 0.0
    lambda_v_tgt: float = 0.0


def source_classification_loss(p: Tensor, labels) -> Tensor:
    """Mean cross-entropy of predicted probabilities against true labels."""
    if p.data.shape[0] == 0:
        raise ValueError("empty source batch")
    picked = ad.pick_classes(p, labels)
    return ad.scale(ad.sum_all(ad.clamped_log(picked, LOG_FLOOR)), -1.0 / p.data.shape[0])


def target_conditional_entropy(p: Tensor) -> Tensor:
    """Mean Shannon entropy (nats) of prediction rows; 0 <= value <= ln K."""
    n = p.data.shape[0]
    plogp = ad.mul(p, ad.clamped_log(p, LOG_FLOOR))
    return ad.scale(ad.sum_all(plogp), -1.0 / n)


def kl_to_reference(p_ref: np.ndarray, q: Tensor) -> Tensor:
    """Mean KL(p_ref || q) with p_ref constant; gradient flows through q only."""
    n = p_ref.shape[0]
    ref = Tensor(p_ref)
    const = float(np.sum(p_ref * np.log(np.maximum(p_ref, LOG_FLOOR)))) / n
    cross = ad.scale(ad.sum_all(ad.mul(ref, ad.clamped_log(q, LOG_FLOOR))), 1.0 / n)
    return ad.sub(Tensor([[const]]), cross)


def _forward_probs(bundle: models.ModelBundle, x: Tensor) -> Tensor:
    return models.classify(bundle, models.extract(bundle, x))


def vat_direction(
    bundle: models.ModelBundle,
    x: np.ndarray,
    xi: float,
    n_power: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-sample adversarial unit direction by power iteration.

    Starts from a random unit vector and repeatedly takes the gradient of
    the local KL w.r.t. a xi-scaled probe. Model parameters are treated as
    constants throughout; no gradient state leaks out of the probes.
    """
    x = np.asarray(x, dtype=np.float64)
    with ad.no_grad():
        p_ref = _forward_probs(bundle, Tensor(x)).data.copy()

    d = rng.standard_normal(x.shape)
    d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-12)
    params = bundle.all_params()
    flags = [p.requires_grad for p in params]
    for p in params:  # probe gradients target the perturbation only
        p.requires_grad = False
    try:
        for _ in range(n_power):
            with ad.Graph() as probe_graph:
                pert = Tensor(xi * d, requires_grad=True)
                q = _forward_probs(bundle, ad.add(Tensor(x), pert))
                kl = kl_to_reference(p_ref, q)
                ad.backward(probe_graph, kl)
            d = pert.grad
            d = d / np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-12)
    finally:
        for p, flag in zip(params, flags):
            p.requires_grad = flag
    return d


def vat_loss_at(bundle: models.ModelBundle, x: np.ndarray, direction: np.ndarray,
                eps_ball: float) -> Tensor:
    """KL between predictions at x (constant) and at x + eps_ball*direction."""
    if eps_ball < 0:
        raise ValueError("eps_ball must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    with ad.no_grad():
        p_ref = _forward_probs(bundle, Tensor(x)).data.copy()
    q_adv = _forward_probs(bundle, Tensor(x + eps_ball * direction))
    return kl_to_reference(p_ref, q_adv)


def vat_loss(
    bundle: models.ModelBundle,
    x: np.ndarray,
    eps_ball: float,
    xi: float,
    n_power: int,
    rng: np.random.Generator,
) -> Tensor:
    """Worst-case local KL divergence (virtual adversarial smoothness).

    Finds a per-sample adversarial direction by power iteration on the KL
    between predictions at x and at a xi-scaled probe, then charges the KL
    between predictions at x (held constant) and at x + eps_ball * direction.
    """
    d = vat_direction(bundle, x, xi, n_power, rng)
    return vat_loss_at(bundle, x, d, eps_ball)


def discriminator_loss(
    src_probs: Tensor, tgt_probs: Tensor, src_weights=None, tgt_weights=None
) -> Tensor:
    """Log-loss of the discriminator, source labeled 1 and target labeled 0.

    Optional per-sample weights are applied multiplicatively and the batch
    is renormalized by the weight sum, so an all-ones weighting reduces to
    the unweighted mean.
    """
    n_s, n_t = src_probs.data.shape[0], tgt_probs.data.shape[0]
    if n_s == 0 or n_t == 0:
        raise ValueError("discriminator_loss needs nonempty batches on both sides")

    def weighted_nll(probs: Tensor, weights, flip: bool) -> Tensor:
        if flip:
            probs = ad.sub(Tensor(np.ones_like(probs.data)), probs)
        nll = ad.scale(ad.clamped_log(probs, LOG_FLOOR), -1.0)
        if weights is None:
            return ad.mean_all(nll)
        w = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
        return ad.scale(ad.sum_all(ad.mul(nll, Tensor(w))), 1.0 / float(w.sum()))

    return ad.add(
        weighted_nll(src_probs, src_weights, flip=False),
        weighted_nll(tgt_probs, tgt_weights, flip=True),
    )


def support_alignment_loss(src_outs: Tensor, tgt_outs: Tensor) -> Tensor:
    """Symmetric mean distance from each side's outputs to the other's set.

    Works on the 1-D discriminator outputs. Nearest indices are found
    outside the graph (ties to the lowest index) and treated as fixed;
    gradients flow into both endpoints of each matched pair.
    """
    a, b = src_outs.data.ravel(), tgt_outs.data.ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("support_alignment_loss needs nonempty sides")
    _, idx_ab = nearest_abs_diff(a, b)
    _, idx_ba = nearest_abs_diff(b, a)

    def side_loss(x: Tensor, y: Tensor, idx: np.ndarray) -> Tensor:
        # one-hot selection matrix gathers each point's fixed nearest partner
        sel = np.zeros((x.data.shape[0], y.data.shape[0]))
        sel[np.arange(len(idx)), idx] = 1.0
        matched = ad.matmul(Tensor(sel), y)
        return ad.mean_all(ad.abs_(ad.sub(x, matched)))

    return ad.add(side_loss(src_outs, tgt_outs, idx_ab), side_loss(tgt_outs, src_outs, idx_ba))
