"""Collapsed node-wise posterior pieces.

For node r with active source blocks, the impulse-response weights w_r
carry a Gaussian kernel prior K_r and the differenced regression gives

    dY_r | w_r ~ N(dt * Phi w_r, sigma_r dt I).

Marginalizing w_r yields a Gaussian evidence whose determinant and
quadratic form are evaluated through the low-rank identity

    |sigma dt I + dt^2 Phi K Phi'| = (sigma dt)^N sigma^-m |M|,
    M = sigma I_m + dt G'G,  G = Phi C,  K = C C',

so nothing of size N x N is ever formed. The column map C is the kernel
block Cholesky factor, optionally composed with a pseudo-point
projection.
"""

from dataclasses import dataclass, field
from math import log, pi

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import ConfigError, NumericError
from .kernels import KernelSpec, chol_psd


@dataclass
class ModelConfig:
    """Prior and regression settings shared by all nodes."""

    kernel: KernelSpec = field(default_factory=KernelSpec)
    a0: float = 0.001
    b0: float = 0.001
    a1: float = 1.0
    p_s: float = 0.1
    filter_a: float = 1.0
    lags: int | None = None
    pseudo_points: int | None = None
    pin_diagonal: bool = False
    include_inputs: bool = False

    def __post_init__(self):
        if isinstance(self.kernel, str):
            self.kernel = KernelSpec(self.kernel)
        if not 0.0 < self.p_s < 1.0:
            raise ConfigError(f"p_s must lie in (0, 1), got {self.p_s}")
        if self.a0 <= 0 or self.b0 <= 0 or self.a1 <= 0:
            raise ConfigError("a0, b0, a1 must be positive")


@dataclass
class Evidence:
    """Factorized inner matrix M for one node and one hyperparameter state."""

    m: int
    logdet: float
    quad: float
    chol: tuple | None
    v: np.ndarray
    active: tuple
    widths: tuple


def node_evidence(reg, r, active, colmaps, sigma, node_label=None):
    """Assemble and factorize M = sigma I + dt G'G for node r.

    Parameters
    ----------
    reg : RegressionData
    r : int
        Target node index.
    active : sequence of int
        Active source-block indices, ascending.
    colmaps : sequence of ndarray
        Per-active-block column maps C_j (l x d_j).
    sigma : float
        Current innovation variance of node r.

    Returns
    -------
    Evidence
    """
    dt = reg.grid.dt
    widths = tuple(c.shape[1] for c in colmaps)
    m = int(sum(widths))
    if m == 0:
        return Evidence(0, 0.0, 0.0, None, np.zeros(0), tuple(active), widths)

    gram = reg.gram
    pdy = reg.phi_t_dy[:, r]
    gg = np.empty((m, m))
    v = np.empty(m)
    offs = np.concatenate([[0], np.cumsum(widths)]).astype(int)
    for a, (ja, ca) in enumerate(zip(active, colmaps)):
        sa = reg.block_slice(ja)
        v[offs[a] : offs[a + 1]] = ca.T @ pdy[sa]
        for b in range(a, len(active)):
            jb, cb = active[b], colmaps[b]
            blk = ca.T @ gram[sa, reg.block_slice(jb)] @ cb
            gg[offs[a] : offs[a + 1], offs[b] : offs[b + 1]] = blk
            if b != a:
                gg[offs[b] : offs[b + 1], offs[a] : offs[a + 1]] = blk.T
    mmat = dt * gg
    mmat[np.diag_indices_from(mmat)] += sigma
    try:
        cf = cho_factor(mmat, lower=True)
    except np.linalg.LinAlgError as exc:
        where = f" (node {node_label})" if node_label is not None else ""
        raise NumericError(f"inner matrix not positive definite{where}") from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    alpha = cho_solve(cf, v)
    return Evidence(m, logdet, float(v @ alpha), cf, v, tuple(active), widths)


def log_collapsed_marginal(reg, r, evidence, sigma):
    """log N(dY_r | 0, sigma dt I + dt^2 Phi K Phi'), constants included."""
    n = reg.phi.shape[0]
    dt = reg.grid.dt
    return (
        -0.5 * n * log(2.0 * pi)
        - 0.5 * n * log(sigma * dt)
        + 0.5 * evidence.m * log(sigma)
        - 0.5 * evidence.logdet
        - reg.dy_sq[r] / (2.0 * sigma * dt)
        + evidence.quad / (2.0 * sigma)
    )


def link_colmap(model, link, lag_times, pseudo=None):
    """Column map C for one active link: kernel Cholesky, projected if needed.

    Without pseudo points C = chol(K); with them C = D @ chol(K_DD) where
    D carries conditional-mean rows for the off-grid lags, so w = C u
    always lives on the full lag grid.
    """
    from .kernels import build_link_covariance
    from .sparse_approx import build_projection

    if pseudo is None or pseudo.is_full:
        return chol_psd(build_link_covariance(model.kernel, link, lag_times))
    k_dd = build_link_covariance(model.kernel, link, pseudo.pseudo_times)
    proj = build_projection(model.kernel, link.beta, pseudo)
    return proj @ chol_psd(k_dd)


def sample_w_conditional(reg, r, evidence, colmaps, sigma, rng, size=None):
    """Draw w_r from its Gaussian conditional, zeros on inactive blocks.

    With K = C C' the draw is w = C (M^-1 v + sqrt(sigma) R^-T xi) where
    M = R R'; the flat-prior limit of the mean is the least-squares
    solution of dY ~ dt Phi w.
    """
    cols = reg.phi.shape[1]
    single = size is None
    ns = 1 if single else int(size)
    out = np.zeros((ns, cols))
    if evidence.m:
        mu = cho_solve(evidence.chol, evidence.v)
        xi = rng.standard_normal((evidence.m, ns))
        dev = solve_triangular(evidence.chol[0].T, xi, lower=False)
        u = mu[:, None] + np.sqrt(sigma) * dev
        offs = np.concatenate([[0], np.cumsum(evidence.widths)]).astype(int)
        for a, (j, c) in enumerate(zip(evidence.active, colmaps)):
            out[:, reg.block_slice(j)] = (c @ u[offs[a] : offs[a + 1]]).T
    return out[0] if single else out


def sample_sigma_conditional(reg, r, w, a0, b0, rng, size=None):
    """Inverse-gamma draw for the innovation variance of node r."""
    n = reg.phi.shape[0]
    if n == 0:
        raise ConfigError("sigma conditional needs at least one increment")
    dt = reg.grid.dt
    resid = sigma_residual(reg, r, w)
    shape = a0 + 0.5 * n
    scale = b0 + resid / (2.0 * dt)
    if size is None:
        return scale / rng.gamma(shape)
    return scale / rng.gamma(shape, size=size)


def sigma_residual(reg, r, w):
    """||dY_r - dt Phi w||^2 via the cached Gram matrices."""
    dt = reg.grid.dt
    resid = (
        reg.dy_sq[r]
        - 2.0 * dt * float(w @ reg.phi_t_dy[:, r])
        + dt * dt * float(w @ reg.gram @ w)
    )
    return max(resid, 0.0)


def sample_lambda_conditional(z, y_meas, a0, b0, rng, size=None):
    """Inverse-gamma draw for the measurement-noise variance."""
    z = np.asarray(z, dtype=float)
    resid = float(np.sum((z - y_meas) ** 2))
    shape = a0 + 0.5 * z.size
    scale = b0 + 0.5 * resid
    if size is None:
        return scale / rng.gamma(shape)
    return scale / rng.gamma(shape, size=size)


def log_prior_hyper(s, gamma, p_s, a1, beta=None):
    """Log prior of indicators and active-link scales, up to constants.

    Inactive links contribute only their indicator term; their stored
    gamma values are bookkeeping and carry no prior mass here.  When
    ``beta`` is given, active shapes outside (0, 1) make the state
    impossible (-inf); the flat in-range density adds no varying term.
    """
    s = np.asarray(s)
    gamma = np.asarray(gamma, dtype=float)
    on = s != 0
    n_on = int(np.sum(on))
    n_off = s.size - n_on
    if beta is not None:
        beta = np.asarray(beta, dtype=float)
        active_beta = beta[on]
        if np.any(active_beta <= 0.0) or np.any(active_beta >= 1.0):
            return -np.inf
    return (
        n_on * log(p_s)
        + n_off * log(1.0 - p_s)
        - a1 * float(np.sum(np.abs(gamma[on])))
    )
