"""Dynamical structure of partially observed linear systems.

A system dx = (A x + B u) dt + K dW with measured block y = x[:p] induces
a network representation Y = F_y Y + F_u U + F_w W whose off-diagonal
zero pattern in F_y is the measured-node topology: hidden states are
folded into direct links between measured nodes. This module evaluates
those transfer matrices, recovers them from input/output behaviour, and
assembles the time-domain regression used for posterior inference.
"""

from dataclasses import dataclass
from functools import cached_property
from math import ceil

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DataError


def ground_truth_topology(system):
    """Boolean p x p adjacency of the measured-node network.

    Entry (r, j) is True when A11[r, j] != 0 or a path j -> hidden ...
    hidden -> r exists through the hidden block; those paths become
    direct measured-node links once hidden states are marginalized out.
    """
    p = system.n_obs
    A = np.asarray(system.a)
    A11 = A[:p, :p]
    adj = A11 != 0
    h = A.shape[0] - p
    if h:
        b12 = (A[:p, p:] != 0).astype(np.int64)
        b21 = (A[p:, :p] != 0).astype(np.int64)
        b22 = (A[p:, p:] != 0).astype(np.int64)
        reach = np.eye(h, dtype=np.int64)
        power = np.eye(h, dtype=np.int64)
        for _ in range(h - 1):
            power = (power @ b22 > 0).astype(np.int64)
            reach |= power
        adj = adj | ((b12 @ reach @ b21) > 0)
    return adj


@dataclass
class DsfEval:
    """Transfer matrices on a set of frequency points."""

    s_points: np.ndarray
    F_y: np.ndarray  # (nf, p, p)
    F_u: np.ndarray  # (nf, p, q)
    F_w: np.ndarray  # (nf, p, m)


def _partitions(system):
    p = system.n_obs
    A = np.asarray(system.a, dtype=float)
    B = np.asarray(system.b, dtype=float)
    K = np.asarray(system.k, dtype=float)
    return (A[:p, :p], A[:p, p:], A[p:, :p], A[p:, p:], B[:p], B[p:], K[:p], K[p:])


def dsf_transfer_eval(system, s_points):
    """Evaluate F_y, F_u, F_w at the given (complex) frequency points."""
    a11, a12, a21, a22, b1, b2, k1, k2 = _partitions(system)
    s_points = np.atleast_1d(np.asarray(s_points, dtype=complex))
    h = a22.shape[0]
    fy, fu, fw = [], [], []
    for s in s_points:
        if h:
            x = a12 @ np.linalg.inv(s * np.eye(h) - a22)
        else:
            x = np.zeros((a11.shape[0], 0))
        fy.append((a11 + x @ a21) / s)
        fu.append((b1 + x @ b2) / s)
        fw.append((a12 + x @ a22) @ k2 / s + k1)
    return DsfEval(
        s_points=s_points,
        F_y=np.array(fy),
        F_u=np.array(fu),
        F_w=np.array(fw),
    )


def io_transfer_eval(system, s_points):
    """Closed-loop maps from inputs and noise paths to outputs.

    Returns (G_u, G_w) where G_u(s) = C (sI - A)^-1 B and, for the
    realization driven by the Wiener path W,
    G_w(s) = C (sI - A)^-1 A K + C K.
    """
    p = system.n_obs
    A = np.asarray(system.a, dtype=float)
    B = np.asarray(system.b, dtype=float)
    K = np.asarray(system.k, dtype=float)
    n = A.shape[0]
    s_points = np.atleast_1d(np.asarray(s_points, dtype=complex))
    gu, gw = [], []
    for s in s_points:
        res = np.linalg.inv(s * np.eye(n) - A)[:p]  # C (sI-A)^-1
        gu.append(res @ B)
        gw.append(res @ A @ K + K[:p])
    return np.array(gu), np.array(gw)


def recover_dsf_from_io(G_u, G_w, k1):
    """Invert the identifiability map under diagonal K1, zero K2.

    With process noise entering measured states only (K1 diagonal,
    K2 = 0), F_w = K1 independent of frequency, and
    F_y = I - K1 G_w^-1,  F_u = (I - F_y) G_u.
    """
    G_u = np.asarray(G_u, dtype=complex)
    G_w = np.asarray(G_w, dtype=complex)
    k1 = np.asarray(k1, dtype=float)
    p = k1.shape[0]
    nf = G_w.shape[0]
    F_y = np.empty((nf, p, p), dtype=complex)
    F_u = np.empty_like(G_u)
    for i in range(nf):
        kg = k1 @ np.linalg.inv(G_w[i])
        F_y[i] = np.eye(p) - kg
        F_u[i] = kg @ G_u[i]
    F_w = np.broadcast_to(k1.astype(complex), (nf, p, p)).copy()
    return F_y, F_u, F_w


# ---------------------------------------------------------------------------
# time-domain regression


def default_lag_count(grid):
    """Truncation length l = min(N, ceil(8 / dt)).

    Eight time units cover the impulse-response tails the decay kernels
    can represent at their default scales.
    """
    return int(min(grid.n_intervals, ceil(8.0 / grid.dt)))


def antialias_filter(y, dt, a):
    """Replace the integrator pole: yhat(t_i) = y(t_i) + a dt sum_{v<i} y(t_v).

    Left-endpoint quadrature of a * integral of y; ``a = 0`` returns the
    signal unchanged.
    """
    y = np.asarray(y, dtype=float)
    run = np.zeros_like(y)
    run[1:] = np.cumsum(y[:-1], axis=0)
    return y + a * dt * run


def merge_trajectories(grid, y_meas, y_interior):
    """Assemble the full-grid trajectory matrix from its two groups.

    ``y_meas`` holds rows at measurement instants (M x p), ``y_interior``
    the remaining grid rows in time order ((N+1-M) x p).
    """
    n_tot = len(grid.t)
    y_meas = np.asarray(y_meas, dtype=float)
    if y_meas.ndim == 1:
        y_meas = y_meas[:, None]
    y_interior = np.asarray(y_interior, dtype=float)
    p = y_meas.shape[1]
    full = np.empty((n_tot, p))
    full[grid.measurement_index] = y_meas
    idx = grid.interior_index
    if len(idx):
        full[idx] = np.reshape(y_interior, (len(idx), p))
    return full


def _lag_rows(yhat, l):
    """Rows i = 0..N of [yhat(t_{i-1}), ..., yhat(t_{i-l})], zero padded."""
    n_tot = len(yhat)
    pad = np.zeros(n_tot + l)
    pad[l:] = yhat
    win = sliding_window_view(pad, l)[:n_tot]
    return win[:, ::-1]


class RegressionData:
    """Differenced lag regression dY = dt * Phi w + noise increments.

    Rows are ordered from the last grid interval down to the first; the
    columns of Phi are per-source blocks of width l (measured nodes
    first, then optional input blocks).
    """

    def __init__(self, phi, dy, grid, filter_a, l, n_nodes, n_inputs=0, y_full=None):
        self.phi = phi
        self.dy = dy
        self.grid = grid
        self.filter_a = filter_a
        self.l = l
        self.n_nodes = n_nodes
        self.n_inputs = n_inputs
        self._y_full = y_full

    @property
    def n_blocks(self):
        return self.n_nodes + self.n_inputs

    def block_slice(self, j):
        return slice(j * self.l, (j + 1) * self.l)

    @cached_property
    def gram(self):
        """Phi' Phi, shared across nodes."""
        return self.phi.T @ self.phi

    @cached_property
    def phi_t_dy(self):
        """Phi' dY_r stacked column-wise over nodes r."""
        return self.phi.T @ self.dy

    @cached_property
    def dy_sq(self):
        """||dY_r||^2 per node."""
        return np.sum(self.dy**2, axis=0)

    @cached_property
    def t1_quadform(self):
        """sum_j (measurement increment)^2 / N_j per node."""
        k = self.grid.measurement_index
        y_meas = self._y_full[k]
        inc = np.diff(y_meas, axis=0)
        return np.sum(inc**2 / self.grid.segment_lengths[:, None], axis=0)


def build_regression(y_meas, y_interior, grid, filter_a=1.0, lags=None, inputs=None):
    """Build the lagged, filtered, differenced regression.

    Parameters
    ----------
    y_meas : ndarray, shape (M, p)
        Trajectory values at measurement instants.
    y_interior : ndarray, shape (N+1-M, p)
        Trajectory values at the remaining grid points, in time order
        (concatenation of the inter-measurement segments).
    grid : FineGrid
    filter_a : float
        Pole of the anti-causal filter replacement; 0 disables filtering.
    lags : int, optional
        Truncation length l; defaults to ``default_lag_count(grid)``.
    inputs : ndarray, shape (N+1, q), optional
        Known input values on the full grid; appended as extra source
        blocks with identical filter/lag treatment.

    Returns
    -------
    RegressionData
    """
    y_full = merge_trajectories(grid, y_meas, y_interior)
    return build_regression_full(
        y_full, grid, filter_a=filter_a, lags=lags, inputs=inputs
    )


def build_regression_full(y_full, grid, filter_a=1.0, lags=None, inputs=None):
    """Same as :func:`build_regression` from a full-grid trajectory matrix."""
    y_full = np.asarray(y_full, dtype=float)
    n_tot, p = y_full.shape
    if n_tot != len(grid.t):
        raise DataError(
            f"trajectory has {n_tot} rows but the grid has {len(grid.t)} points"
        )
    n = grid.n_intervals
    l = default_lag_count(grid) if lags is None else int(lags)
    if l < 1 or l > n:
        raise ConfigError(f"lag count must be in [1, N={n}], got {l}")

    sources = [y_full]
    q = 0
    if inputs is not None:
        inputs = np.asarray(inputs, dtype=float)
        if inputs.shape[0] != n_tot:
            raise DataError("inputs must be sampled on the full grid")
        q = inputs.shape[1]
        sources.append(inputs)

    blocks = []
    for src in sources:
        yhat = antialias_filter(src, grid.dt, filter_a)
        for j in range(src.shape[1]):
            rows = _lag_rows(yhat[:, j], l)
            # row for t_i uses the window ending at t_{i-1}; difference
            # consecutive windows and reverse to the t_N..t_1 order
            blocks.append(rows[n:0:-1] - rows[n - 1 :: -1])
    phi = np.hstack(blocks)
    dy = np.diff(y_full, axis=0)[::-1]

    return RegressionData(
        phi=phi,
        dy=dy,
        grid=grid,
        filter_a=filter_a,
        l=l,
        n_nodes=p,
        n_inputs=q,
        y_full=y_full,
    )
