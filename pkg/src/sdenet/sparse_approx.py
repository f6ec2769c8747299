"""Pseudo-point projection of impulse-response weights.

The lag grid {dt, ..., l dt} is thinned to d pseudo lags D; weights on
the remaining lags R are replaced by their kernel conditional means,
w = D_proj w_D with D_proj = P [I; K_RD K_DD^-1]. Downstream the design
matrix shrinks to Phi @ D_proj and the prior to K_DD, so inner
factorizations are d-per-link instead of l-per-link.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .kernels import add_jitter, kernel_eval


def select_pseudo_points(l, d):
    """Deterministic approximately log-spaced lag indices (1-based).

    Always contains index 1, and index l whenever d >= 2; duplicates from
    rounding are backfilled with the smallest unused indices so exactly
    ``d`` distinct indices return, sorted ascending.
    """
    l, d = int(l), int(d)
    if not 1 <= d <= l:
        raise ConfigError(f"need 1 <= d <= l, got d={d}, l={l}")
    raw = np.unique(np.round(np.geomspace(1, l, d)).astype(int))
    chosen = set(int(i) for i in raw)
    fill = 1
    while len(chosen) < d:
        if fill not in chosen:
            chosen.add(fill)
        fill += 1
    return np.array(sorted(chosen), dtype=int)


@dataclass
class PseudoGrid:
    """Lag grid thinning: full lag times plus the selected subset."""

    lag_times: np.ndarray
    indices: np.ndarray  # 1-based positions of pseudo lags

    @property
    def d(self):
        return len(self.indices)

    @property
    def l(self):
        return len(self.lag_times)

    @property
    def is_full(self):
        return self.d == self.l

    @property
    def pseudo_times(self):
        return self.lag_times[self.indices - 1]

    @property
    def rest_times(self):
        mask = np.ones(self.l, dtype=bool)
        mask[self.indices - 1] = False
        return self.lag_times[mask]


def make_pseudo_grid(lag_times, d=None):
    lag_times = np.asarray(lag_times, dtype=float)
    l = len(lag_times)
    if d is None:
        d = min(l, 30)
    return PseudoGrid(lag_times=lag_times, indices=select_pseudo_points(l, d))


def build_projection(spec, beta, pseudo):
    """Full-grid reconstruction matrix D_proj (l x d).

    Rows at pseudo lags are unit vectors; rows at the remaining lags are
    the kernel conditional-mean weights K_RD K_DD^-1. The gamma scale
    cancels, so the projection depends on beta only.
    """
    l = pseudo.l
    sel = pseudo.indices - 1
    mask = np.zeros(l, dtype=bool)
    mask[sel] = True
    t_d = pseudo.lag_times[mask]
    t_r = pseudo.lag_times[~mask]
    proj = np.zeros((l, pseudo.d))
    proj[sel, np.arange(pseudo.d)] = 1.0
    if len(t_r):
        k_dd = add_jitter(kernel_eval(spec, t_d[:, None], t_d[None, :], beta))
        k_rd = kernel_eval(spec, t_r[:, None], t_d[None, :], beta)
        proj[~mask] = np.linalg.solve(k_dd, k_rd.T).T
    return proj


def conditional_covariance(spec, beta, pseudo):
    """Schur complement K_RR - K_RD K_DD^-1 K_DR (diagnostic; PSD)."""
    t_d = pseudo.pseudo_times
    t_r = pseudo.rest_times
    if not len(t_r):
        return np.zeros((0, 0))
    k_dd = add_jitter(kernel_eval(spec, t_d[:, None], t_d[None, :], beta))
    k_rd = kernel_eval(spec, t_r[:, None], t_d[None, :], beta)
    k_rr = kernel_eval(spec, t_r[:, None], t_r[None, :], beta)
    return k_rr - k_rd @ np.linalg.solve(k_dd, k_rd.T)
