"""Direct coverage for the verification helpers themselves."""

import numpy as np

from suppalign import autodiff as ad
from suppalign import checks
from suppalign.autodiff import Tensor


def test_fd_gradient_exact_on_quadratic():
    # central differences are exact (up to roundoff) for quadratics
    p = Tensor(np.array([[1.5, -2.0, 0.25]]), requires_grad=True)

    def value():
        return float((p.data ** 2).sum())

    (g,) = checks.fd_gradient(value, [p], h=1e-6)
    assert np.allclose(g, 2.0 * p.data, atol=1e-8)


def test_ad_gradient_and_relative_error():
    p = Tensor(np.array([[0.5, 1.0]]), requires_grad=True)

    def loss():
        return ad.sum_all(ad.mul(p, p))

    g_ad, value = checks.ad_gradient(loss, [p])
    assert value == 1.25
    assert np.allclose(g_ad[0], 2.0 * p.data)
    assert p.grad is None  # ad_gradient cleans up after itself
    assert checks.relative_error(g_ad, [2.0 * p.data]) < 1e-15
    assert checks.relative_error(g_ad, [np.zeros((1, 2))]) > 0.9


def test_gradient_cases_cover_each_loss():
    cases = checks.gradient_check_cases(seed=1)
    names = [c.name for c in cases]
    for expect in ("source_classification", "conditional_entropy",
                   "discriminator_marginal", "discriminator_weighted",
                   "support_alignment", "smoothness_frozen",
                   "composite_fc", "reversed_discriminator"):
        assert expect in names
    for c in cases:
        assert c.ok, f"{c.name}: rel err {c.rel_err:.2e}"
        assert c.n_params > 0


def test_invariants_clean():
    for name, fn in checks.INVARIANTS:
        assert fn() == "", name


def test_run_all_report_is_json_ready():
    import json

    report = checks.run_all(seed=2)
    assert report["ok"] is True
    assert report["max_rel_err"] < checks.REL_TOL
    json.dumps(report)  # no numpy scalars may leak into the report
