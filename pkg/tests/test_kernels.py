"""Kernel evaluation, PSD-ness, and factorization guards."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdenet.errors import ConfigError, NumericError
from sdenet.kernels import (
    JITTER_REL,
    KernelSpec,
    LinkPrior,
    add_jitter,
    build_link_covariance,
    chol_psd,
    kernel_eval,
)


def test_tc_matrix_hand_case():
    spec = KernelSpec("TC")
    link = LinkPrior(s=1, gamma=1.0, beta=np.array([0.5]))
    k = build_link_covariance(spec, link, [1.0, 2.0])
    assert np.allclose(k, [[0.5, 0.25], [0.25, 0.25]], atol=1e-15)


def test_kernel_formulas_match_direct_expressions():
    t, s = 0.7, 1.9
    b = 0.45
    assert kernel_eval(KernelSpec("TC"), t, s, [b]) == pytest.approx(b ** max(t, s))
    b1, b2 = 0.3, 0.8
    assert kernel_eval(KernelSpec("DC"), t, s, [b1, b2]) == pytest.approx(
        b1 ** ((t + s) / 2.0) * b2 ** abs(t - s)
    )
    hi = max(t, s)
    assert kernel_eval(KernelSpec("SS"), t, s, [b]) == pytest.approx(
        b ** (t + s + hi) / 2.0 - b ** (3.0 * hi) / 6.0
    )


def test_kernel_decay_bounds_tail():
    # at beta = e^-1 the TC diagonal at lag 8 is e^-8 < 1e-3
    spec = KernelSpec("TC")
    val = kernel_eval(spec, 8.0, 8.0, [np.exp(-1.0)])
    assert val < 1e-3
    assert val > 0


def test_gamma_scale_and_sign():
    spec = KernelSpec("TC")
    lags = [0.5, 1.0, 1.5]
    pos = build_link_covariance(spec, LinkPrior(1, 2.0, np.array([0.6])), lags)
    neg = build_link_covariance(spec, LinkPrior(1, -2.0, np.array([0.6])), lags)
    assert np.array_equal(pos, neg)
    off = build_link_covariance(spec, LinkPrior(0, 2.0, np.array([0.6])), lags)
    assert np.array_equal(off, np.zeros((3, 3)))


def test_beta_validation():
    spec = KernelSpec("TC")
    with pytest.raises(ConfigError, match=r"\(0, 1\)"):
        kernel_eval(spec, 1.0, 1.0, [1.0])
    with pytest.raises(ConfigError, match="component"):
        kernel_eval(spec, 1.0, 1.0, [0.5, 0.5])
    with pytest.raises(ConfigError, match="unknown kernel"):
        KernelSpec("RBF")
    assert KernelSpec("DC").n_beta == 2


@settings(max_examples=80, deadline=None)
@given(
    kind=st.sampled_from(["TC", "DC", "SS"]),
    seed=st.integers(min_value=0, max_value=10**6),
    m=st.integers(min_value=1, max_value=25),
)
def test_kernel_matrices_symmetric_psd(kind, seed, m):
    rng = np.random.default_rng(seed)
    spec = KernelSpec(kind)
    lags = np.sort(rng.uniform(0.05, 8.0, size=m))
    link = LinkPrior(
        s=1,
        gamma=float(rng.lognormal(0, 1)),
        beta=np.clip(rng.random(spec.n_beta), 0.02, 0.98),
    )
    k = build_link_covariance(spec, link, lags)
    assert np.array_equal(k, k.T)
    w = np.linalg.eigvalsh(k)
    assert w.min() >= -1e-8 * max(np.trace(k), 1.0)


def test_add_jitter_relative_to_max_diagonal():
    k = np.array([[2.0, 0.5], [0.5, 1.0]])
    kj = add_jitter(k)
    assert kj[0, 0] == pytest.approx(2.0 + JITTER_REL * 2.0)
    assert kj[1, 1] == pytest.approx(1.0 + JITTER_REL * 2.0)
    assert kj[0, 1] == 0.5
    # original untouched
    assert k[0, 0] == 2.0


def test_chol_psd_factorizes_and_guards():
    spec = KernelSpec("TC")
    link = LinkPrior(1, 1.3, np.array([0.7]))
    k = build_link_covariance(spec, link, [0.5, 1.0, 1.5])
    c = chol_psd(k)
    assert np.allclose(c @ c.T, add_jitter(k))
    with pytest.raises(NumericError, match="positive definite"):
        chol_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))
