"""Shared fixtures and independent oracle implementations.

The oracles here recompute quantities by a different route than the
package (dense Gaussians, pairwise counting, Schur complements) so the
tests compare two independent derivations.
"""

import numpy as np
import pytest

from sdenet.dsf import build_regression_full
from sdenet.grid import build_grid
from sdenet.kernels import KernelSpec, LinkPrior, add_jitter, build_link_covariance
from sdenet.posterior import ModelConfig, link_colmap


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


# ---------------------------------------------------------------------------
# dense-marginal oracle


def dense_log_marginal(reg, r, active, links, sigma, spec):
    """log N(dY_r | 0, sigma dt I + dt^2 Phi_A K_A Phi_A') the direct way.

    ``links`` maps block index -> LinkPrior; the covariance is assembled
    as a dense N x N matrix and evaluated with slogdet, no low-rank
    identities involved. The per-block jitter is part of the model's
    covariance definition, so it is applied here too.
    """
    dt = reg.grid.dt
    n = reg.phi.shape[0]
    dy = reg.dy[:, r]
    cov = sigma * dt * np.eye(n)
    for j in active:
        k_j = add_jitter(build_link_covariance(spec, links[j], lag_times(reg)))
        phi_j = reg.phi[:, reg.block_slice(j)]
        cov = cov + dt * dt * phi_j @ k_j @ phi_j.T
    sign, logdet = np.linalg.slogdet(cov)
    assert sign > 0
    quad = float(dy @ np.linalg.solve(cov, dy))
    return -0.5 * (n * np.log(2.0 * np.pi) + logdet + quad)


def lag_times(reg):
    return reg.grid.dt * np.arange(1, reg.l + 1)


# ---------------------------------------------------------------------------
# metric oracles (quadratic-time, definition-level)


def brute_auroc(scores, truth):
    """Pairwise Mann-Whitney count: P(score_pos > score_neg) + half ties."""
    scores = np.asarray(scores, dtype=float).ravel()
    truth = np.asarray(truth).astype(bool).ravel()
    pos = scores[truth]
    neg = scores[~truth]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def brute_auprec(scores, truth):
    """Threshold sweep over distinct score values, descending."""
    scores = np.asarray(scores, dtype=float).ravel()
    truth = np.asarray(truth).astype(bool).ravel()
    n_pos = int(truth.sum())
    area = 0.0
    prev_recall = 0.0
    for thr in sorted(set(scores), reverse=True):
        taken = scores >= thr
        tp = int((taken & truth).sum())
        recall = tp / n_pos
        precision = tp / int(taken.sum())
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


# ---------------------------------------------------------------------------
# pinned-random-walk covariance oracle


def pinned_walk_cov(n_j):
    """Conditional covariance of a unit-step random walk pinned at both ends.

    Builds the full covariance Cov(S_i, S_j) = min(i, j) on 1..n_j and
    conditions the interior on the endpoint by a Schur complement.
    """
    idx = np.arange(1, n_j + 1)
    full = np.minimum(idx[:, None], idx[None, :]).astype(float)
    inner = full[:-1, :-1]
    cross = full[:-1, -1]
    return inner - np.outer(cross, cross) / full[-1, -1]


# ---------------------------------------------------------------------------
# random-instance builders


def random_regression(rng, m_samples=None, refinement=None, p=None, l=None,
                      with_inputs=False, filter_a=1.0):
    """Random small regression instance on a uniform measurement grid."""
    m = int(rng.integers(4, 9)) if m_samples is None else m_samples
    ref = int(rng.integers(1, 4)) if refinement is None else refinement
    p = int(rng.integers(1, 4)) if p is None else p
    grid = build_grid(np.arange(m, dtype=float), ref)
    l_max = grid.n_intervals
    l = int(rng.integers(1, min(4, l_max) + 1)) if l is None else l
    y_full = rng.standard_normal((len(grid.t), p))
    inputs = None
    if with_inputs:
        inputs = rng.standard_normal((len(grid.t), int(rng.integers(1, 3))))
    reg = build_regression_full(y_full, grid, filter_a=filter_a, lags=l,
                                inputs=inputs)
    return reg


def random_links(rng, reg, spec=None):
    """Random active set and per-block LinkPrior dict for node tests."""
    spec = spec or KernelSpec(rng.choice(["TC", "DC", "SS"]))
    blocks = reg.n_blocks
    active = sorted(
        int(j) for j in np.nonzero(rng.random(blocks) < 0.6)[0]
    )
    links = {
        j: LinkPrior(
            s=1,
            gamma=float(rng.lognormal(0.0, 0.7)),
            beta=np.clip(rng.random(spec.n_beta), 0.05, 0.95),
        )
        for j in range(blocks)
    }
    return spec, active, links


def colmaps_for(model, reg, active, links):
    lt = lag_times(reg)
    return [link_colmap(model, links[j], lt) for j in active]


def model_for(spec, **kw):
    return ModelConfig(kernel=spec, **kw)
