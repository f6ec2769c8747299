"""Metropolis-within-partially-collapsed-Gibbs sampler.

Each iteration refines the latent trajectories with a preconditioned
Crank-Nicolson (pCN) move built from Brownian-bridge proposals, then per
node either toggles one link indicator (switch move) or perturbs the
hyperparameters of the active links (update move), then redraws weights
and variances from their conjugate conditionals. Weight vectors are
collapsed out of every Metropolis ratio, so indicator moves never depend
on the current weights.
"""

import json
import os
import tempfile
from dataclasses import asdict, dataclass
from math import inf, log, sqrt

import numpy as np

from .dsf import build_regression_full, default_lag_count
from .errors import ConfigError, DataError, NumericError
from .kernels import LinkPrior
from .posterior import (
    ModelConfig,
    link_colmap,
    node_evidence,
    sample_lambda_conditional,
    sample_sigma_conditional,
    sample_w_conditional,
)
from .sparse_approx import make_pseudo_grid

_BETA_EDGE = 1e-12  # keep proposed decays strictly inside (0, 1)


@dataclass
class SamplerConfig:
    """Chain length, step sizes, and bookkeeping knobs."""

    k_max: int = 1000
    seed: int = 0
    chain_id: int = 0
    eps_traj: float = 0.2
    eps_gamma: float = 0.3
    eps_beta: float = 0.1
    p_switch: float = 0.6
    thin: int = 1
    adapt_burnin: bool = False
    adapt_window: int = 50
    trajectory_proposal: str = "pcn"
    memory_cap_mb: float = 1024.0
    spill_dir: str | None = None

    def __post_init__(self):
        if self.k_max < 0:
            raise ConfigError("k_max must be nonnegative")
        if self.seed < 0 or self.chain_id < 0:
            raise ConfigError("seed and chain_id must be nonnegative")
        if not 0.0 < self.eps_traj <= 1.0:
            raise ConfigError("eps_traj must lie in (0, 1]")
        if self.eps_gamma <= 0 or not 0 < self.eps_beta < 1:
            raise ConfigError("eps_gamma must be > 0 and eps_beta in (0, 1)")
        if not 0.0 <= self.p_switch <= 1.0:
            raise ConfigError("p_switch must lie in [0, 1]")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.trajectory_proposal not in ("pcn", "rw"):
            raise ConfigError("trajectory_proposal must be 'pcn' or 'rw'")


@dataclass
class ChainState:
    """Current chain position."""

    y: np.ndarray  # (N+1, p) full-grid trajectories
    s: np.ndarray  # (p, blocks) link indicators (input blocks pinned 1)
    gamma: np.ndarray  # (p, blocks) scales, stale values kept for inactive
    beta: np.ndarray  # (p, blocks, n_beta) decays
    w: np.ndarray  # (p, cols) impulse-response weights on the lag grid
    sigma: np.ndarray  # (p,) innovation variances
    lam: float  # measurement-noise variance


@dataclass
class ChainSamples:
    """Everything stored along the chain, one row per kept iteration."""

    iters: np.ndarray
    s: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    w: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    y: np.ndarray
    n_proposed: dict
    n_accepted: dict
    grid: object
    model: ModelConfig
    sampler: SamplerConfig
    lag_times: np.ndarray
    n_nodes: int
    n_inputs: int

    @property
    def acceptance_rates(self):
        out = {}
        for k, prop in self.n_proposed.items():
            out[k] = self.n_accepted[k] / prop if prop else float("nan")
        return out


# ---------------------------------------------------------------------------
# proposals


def bridge_covariance(n_j):
    """Pinned-random-walk covariance of the N_j - 1 interior points.

    [C]_pq = p (N_j - q) / N_j for p <= q (symmetric), unit increment
    variance per step.
    """
    n_j = int(n_j)
    i = np.arange(1, n_j, dtype=float)
    c = np.minimum(i[:, None], i[None, :]) * (n_j - np.maximum(i[:, None], i[None, :]))
    return c / n_j


def propose_trajectory_pcn(y_full, grid, z, lam, sigma, eps, rng):
    """pCN proposal around the measurement-tied Gaussian reference.

    Measured values contract toward the data Z with fresh N(0, lam)
    noise; each inter-measurement segment contracts toward its linear
    bridge with fresh Brownian-bridge noise of variance sigma_r dt.
    eps = 0 returns the current trajectories; eps = 1 draws fresh from
    the reference.
    """
    k = grid.measurement_index
    dt = grid.dt
    c = sqrt(max(0.0, 1.0 - eps * eps))
    sl = sqrt(lam) if lam > 0 else 0.0
    y_new = np.array(y_full, dtype=float, copy=True)
    m = len(k)
    for r in range(y_full.shape[1]):
        y1k = y_full[k, r]
        y1p = z[:, r] + c * (y1k - z[:, r]) + eps * sl * rng.standard_normal(m)
        y_new[k, r] = y1p
        scale = eps * sqrt(sigma[r] * dt)
        for q, n_j in enumerate(grid.segment_lengths):
            if n_j < 2:
                continue
            frac = np.arange(1, n_j) / n_j
            mk = y1k[q] + frac * (y1k[q + 1] - y1k[q])
            mp = y1p[q] + frac * (y1p[q + 1] - y1p[q])
            cs = np.cumsum(rng.standard_normal(n_j))
            bridge = cs[:-1] - frac * cs[-1]
            seg = slice(k[q] + 1, k[q + 1])
            y_new[seg, r] = mp + c * (y_full[seg, r] - mk) + scale * bridge
    return y_new


def propose_trajectory_rw(y_full, grid, lam, sigma, eps, rng):
    """Plain random-walk ablation of the trajectory proposal."""
    k = grid.measurement_index
    idx = grid.interior_index
    dt = grid.dt
    y_new = np.array(y_full, dtype=float, copy=True)
    sl = sqrt(lam) if lam > 0 else 0.0
    for r in range(y_full.shape[1]):
        y_new[k, r] += eps * sl * rng.standard_normal(len(k))
        if len(idx):
            y_new[idx, r] += eps * sqrt(sigma[r] * dt) * rng.standard_normal(len(idx))
    return y_new


# ---------------------------------------------------------------------------
# acceptance ratios (log space)


def trajectory_log_ratio(reg_k, reg_p, evs_k, evs_p, sigma):
    """pCN residual ratio: determinant, measurement-increment, quad terms.

    The Gaussian bridge and measurement factors are already cancelled by
    the proposal, so only these three factors may appear.
    """
    dt = reg_k.grid.dt
    total = 0.0
    for r, (ek, ep) in enumerate(zip(evs_k, evs_p)):
        total += (
            -0.5 * (ep.logdet - ek.logdet)
            - (reg_p.t1_quadform[r] - reg_k.t1_quadform[r]) / (2.0 * sigma[r] * dt)
            + (ep.quad - ek.quad) / (2.0 * sigma[r])
        )
    return total


def switch_log_ratio(ev_k, ev_p, sigma, p_s, ds, dabs_gamma, a1):
    """Exact collapsed-marginal ratio for a single-link toggle.

    ``ds`` is s_proposed - s_current for the toggled link, ``dabs_gamma``
    the change |gamma_p| - |gamma_k| of its scale.
    """
    return (
        0.5 * (ev_p.m - ev_k.m) * log(sigma)
        - 0.5 * (ev_p.logdet - ev_k.logdet)
        + (ev_p.quad - ev_k.quad) / (2.0 * sigma)
        + ds * log(p_s / (1.0 - p_s))
        - a1 * dabs_gamma
    )


def update_log_ratio(ev_k, ev_p, sigma, a1, dabs_gamma_sum, q_correction=0.0):
    """Collapsed ratio for an all-active hyperparameter perturbation."""
    return (
        -0.5 * (ev_p.logdet - ev_k.logdet)
        + (ev_p.quad - ev_k.quad) / (2.0 * sigma)
        - a1 * dabs_gamma_sum
        + q_correction
    )


def windowed_uniform_bounds(center, lo, hi, eps):
    """Support of the clamped uniform window proposal."""
    if center <= lo + eps / 2.0:
        return lo, lo + eps
    if center >= hi - eps / 2.0:
        return hi - eps, hi
    return center - eps / 2.0, center + eps / 2.0


def windowed_uniform_sample(center, lo, hi, eps, rng):
    a, b = windowed_uniform_bounds(center, lo, hi, eps)
    return a + (b - a) * rng.random()


def windowed_uniform_logpdf(x, center, lo, hi, eps):
    a, b = windowed_uniform_bounds(center, lo, hi, eps)
    return -log(eps) if a <= x <= b else -inf


def _accept(rng, log_ratio):
    u = rng.random()
    if log_ratio >= 0.0:
        return True
    return u > 0.0 and log(u) < log_ratio


# ---------------------------------------------------------------------------
# the chain


class Chain:
    """Mutable chain over one dataset.

    Exposes the individual moves so exactness tests can drive them in
    isolation; ``run_chain`` is the assembled loop.
    """

    def __init__(self, z, grid, model, config, inputs=None):
        z = np.asarray(z, dtype=float)
        if z.ndim != 2:
            raise DataError("Z must be (measurements x nodes)")
        if z.shape[0] != grid.n_measurements:
            raise DataError(
                f"Z has {z.shape[0]} rows but the grid has "
                f"{grid.n_measurements} measurement instants"
            )
        self.z = z
        self.grid = grid
        self.model = model
        self.config = config
        self.p = z.shape[1]

        self.l = model.lags if model.lags is not None else default_lag_count(grid)
        self.lag_times = grid.dt * np.arange(1, self.l + 1)
        d = model.pseudo_points if model.pseudo_points is not None else min(self.l, 30)
        self.pseudo = make_pseudo_grid(self.lag_times, d)

        self.inputs_full = None
        self.n_inputs = 0
        if model.include_inputs and inputs is not None:
            inputs = np.asarray(inputs, dtype=float)
            if inputs.shape[0] != grid.n_measurements:
                raise DataError("inputs must be sampled at the measurement instants")
            self.inputs_full = np.column_stack(
                [
                    np.interp(grid.t, grid.measurement_times, inputs[:, j])
                    for j in range(inputs.shape[1])
                ]
            )
            self.n_inputs = inputs.shape[1]
        self.n_blocks = self.p + self.n_inputs
        self.cols = self.n_blocks * self.l

        self.streams = self._make_streams()
        self.counters = {
            "traj": [0, 0],
            "switch": [0, 0],
            "update": [0, 0],
            "numeric_rejects": [0, 0],
        }
        self.k = 0
        self.eps_traj = config.eps_traj
        self._adapt_acc = 0
        self._adapt_prop = 0

        self._initialize_state()

    # -- setup ------------------------------------------------------------

    def _make_streams(self):
        seed, cid = self.config.seed, self.config.chain_id

        def mk(tag):
            return np.random.default_rng(np.random.SeedSequence([seed, cid, tag]))

        return {
            "init": mk(0),
            "traj": mk(1),
            "lam": mk(2),
            "nodes": [mk(10 + r) for r in range(self.p)],
        }

    def _initialize_state(self):
        rng = self.streams["init"]
        grid, p = self.grid, self.p
        k = grid.measurement_index

        y = np.empty((len(grid.t), p))
        y[k] = self.z
        for q, n_j in enumerate(grid.segment_lengths):
            if n_j < 2:
                continue
            frac = np.arange(1, n_j)[:, None] / n_j
            y[k[q] + 1 : k[q + 1]] = self.z[q] + frac * (self.z[q + 1] - self.z[q])

        s = np.zeros((p, self.n_blocks), dtype=np.int8)
        s[:, :p] = (rng.random((p, p)) < self.model.p_s).astype(np.int8)
        np.fill_diagonal(s[:, :p], 1)
        s[:, p:] = 1  # input blocks always on

        nb = self.model.kernel.n_beta
        gamma = np.ones((p, self.n_blocks))
        beta = np.full((p, self.n_blocks, nb), 0.5)

        v = float(np.var(np.diff(self.z, axis=0)))
        v = max(v, 1e-6)
        sigma = np.full(p, v)
        lam = v

        self.state = ChainState(
            y=y, s=s, gamma=gamma, beta=beta,
            w=np.zeros((p, self.cols)), sigma=sigma, lam=lam,
        )
        self.reg = self._build_reg(y)
        self.colmaps = [dict() for _ in range(p)]
        for r in range(p):
            for j in self._active(r):
                self.colmaps[r][j] = self._make_colmap(r, j)
        self.evidences = [
            node_evidence(
                self.reg, r, self._active(r), self._colmap_list(r),
                self.state.sigma[r], node_label=r,
            )
            for r in range(p)
        ]
        for r in range(p):
            self.state.w[r] = sample_w_conditional(
                self.reg, r, self.evidences[r], self._colmap_list(r),
                self.state.sigma[r], rng,
            )

    def _build_reg(self, y_full):
        return build_regression_full(
            y_full, self.grid,
            filter_a=self.model.filter_a, lags=self.l, inputs=self.inputs_full,
        )

    def _active(self, r):
        return [j for j in range(self.n_blocks) if self.state.s[r, j]]

    def _colmap_list(self, r):
        return [self.colmaps[r][j] for j in self._active(r)]

    def _make_colmap(self, r, j, gamma=None, beta=None):
        link = LinkPrior(
            s=1,
            gamma=self.state.gamma[r, j] if gamma is None else gamma,
            beta=self.state.beta[r, j] if beta is None else beta,
        )
        return link_colmap(self.model, link, self.lag_times, self.pseudo)

    # -- moves ------------------------------------------------------------

    def trajectory_move(self):
        cfg, st = self.config, self.state
        rng = self.streams["traj"]
        evs_k = self._fresh_evidences(self.reg)
        if cfg.trajectory_proposal == "pcn":
            y_p = propose_trajectory_pcn(
                st.y, self.grid, self.z, st.lam, st.sigma, self.eps_traj, rng
            )
        else:
            y_p = propose_trajectory_rw(
                st.y, self.grid, st.lam, st.sigma, self.eps_traj, rng
            )
        try:
            reg_p = self._build_reg(y_p)
            evs_p = self._fresh_evidences(reg_p)
            if cfg.trajectory_proposal == "pcn":
                logr = trajectory_log_ratio(self.reg, reg_p, evs_k, evs_p, st.sigma)
            else:
                logr = self._potential(reg_p, evs_p) - self._potential(self.reg, evs_k)
        except NumericError:
            self.counters["numeric_rejects"][0] += 1
            logr, reg_p, evs_p = -inf, None, None
        self.counters["traj"][1] += 1
        self._adapt_prop += 1
        if _accept(rng, logr):
            self.counters["traj"][0] += 1
            self._adapt_acc += 1
            st.y = y_p
            self.reg = reg_p
            self.evidences = evs_p
        else:
            self.evidences = evs_k

    def _fresh_evidences(self, reg):
        return [
            node_evidence(
                reg, r, self._active(r), self._colmap_list(r),
                self.state.sigma[r], node_label=r,
            )
            for r in range(self.p)
        ]

    def _potential(self, reg, evs):
        """Full trajectory-dependent log target (random-walk ratio)."""
        st = self.state
        if st.lam <= 0:
            raise ConfigError("random-walk trajectory proposal needs lam > 0")
        y_meas = reg._y_full[self.grid.measurement_index]
        total = -float(np.sum((self.z - y_meas) ** 2)) / (2.0 * st.lam)
        dt = self.grid.dt
        for r, ev in enumerate(evs):
            total += (
                -0.5 * ev.logdet
                - reg.dy_sq[r] / (2.0 * st.sigma[r] * dt)
                + ev.quad / (2.0 * st.sigma[r])
            )
        return total

    def switch_move(self, r, rng=None, resample_hyper=True):
        st, cfg, model = self.state, self.config, self.model
        rng = self.streams["nodes"][r] if rng is None else rng
        cand = [j for j in range(self.p) if not (model.pin_diagonal and j == r)]
        j = cand[int(rng.integers(len(cand)))]
        s_k = int(st.s[r, j])
        gam_k, bet_k = st.gamma[r, j], st.beta[r, j].copy()
        s_p = 1 - s_k
        if resample_hyper:
            gam_p = gam_k + cfg.eps_gamma * rng.standard_normal()
            bet_p = np.clip(
                rng.random(model.kernel.n_beta), _BETA_EDGE, 1.0 - _BETA_EDGE
            )
        else:
            gam_p, bet_p = gam_k, bet_k.copy()

        active_p = [b for b in self._active(r) if b != j]
        cm_new = None
        if s_p:
            active_p = sorted(active_p + [j])
        self.counters["switch"][1] += 1
        try:
            if s_p:
                cm_new = self._make_colmap(r, j, gamma=gam_p, beta=bet_p)
            cmaps_p = [
                cm_new if b == j else self.colmaps[r][b] for b in active_p
            ]
            ev_p = node_evidence(
                self.reg, r, active_p, cmaps_p, st.sigma[r], node_label=r
            )
            logr = switch_log_ratio(
                self.evidences[r], ev_p, st.sigma[r], model.p_s,
                s_p - s_k, abs(gam_p) - abs(gam_k), model.a1,
            )
        except NumericError:
            self.counters["numeric_rejects"][1] += 1
            logr, ev_p = -inf, None
        if _accept(rng, logr):
            self.counters["switch"][0] += 1
            st.s[r, j] = s_p
            st.gamma[r, j] = gam_p
            st.beta[r, j] = bet_p
            if s_p:
                self.colmaps[r][j] = cm_new
            else:
                self.colmaps[r].pop(j, None)
            self.evidences[r] = ev_p
            return True
        return False

    def update_move(self, r, rng=None):
        st, cfg, model = self.state, self.config, self.model
        rng = self.streams["nodes"][r] if rng is None else rng
        active = self._active(r)
        self.counters["update"][1] += 1
        if not active:
            self.counters["update"][0] += 1
            return True

        gam_p = {}
        bet_p = {}
        q_corr = 0.0
        dabs = 0.0
        for j in active:
            g = st.gamma[r, j] + cfg.eps_gamma * rng.standard_normal()
            gam_p[j] = g
            dabs += abs(g) - abs(st.gamma[r, j])
            bp = np.empty(model.kernel.n_beta)
            for c in range(model.kernel.n_beta):
                bk = st.beta[r, j][c]
                x = windowed_uniform_sample(bk, 0.0, 1.0, cfg.eps_beta, rng)
                x = min(max(x, _BETA_EDGE), 1.0 - _BETA_EDGE)
                bp[c] = x
                q_corr += windowed_uniform_logpdf(
                    bk, x, 0.0, 1.0, cfg.eps_beta
                ) - windowed_uniform_logpdf(x, bk, 0.0, 1.0, cfg.eps_beta)
            bet_p[j] = bp
        try:
            cmaps_p = [
                self._make_colmap(r, j, gamma=gam_p[j], beta=bet_p[j]) for j in active
            ]
            ev_p = node_evidence(
                self.reg, r, active, cmaps_p, st.sigma[r], node_label=r
            )
            logr = update_log_ratio(
                self.evidences[r], ev_p, st.sigma[r], model.a1, dabs, q_corr
            )
        except NumericError:
            self.counters["numeric_rejects"][1] += 1
            logr, ev_p, cmaps_p = -inf, None, None
        if _accept(rng, logr):
            self.counters["update"][0] += 1
            for j, cm in zip(active, cmaps_p):
                st.gamma[r, j] = gam_p[j]
                st.beta[r, j] = bet_p[j]
                self.colmaps[r][j] = cm
            self.evidences[r] = ev_p
            return True
        return False

    def node_move(self, r):
        rng = self.streams["nodes"][r]
        if rng.random() <= self.config.p_switch:
            self.switch_move(r, rng)
        else:
            self.update_move(r, rng)

    def gibbs_node(self, r):
        st = self.state
        rng = self.streams["nodes"][r]
        st.w[r] = sample_w_conditional(
            self.reg, r, self.evidences[r], self._colmap_list(r), st.sigma[r], rng
        )
        st.sigma[r] = sample_sigma_conditional(
            self.reg, r, st.w[r], self.model.a0, self.model.b0, rng
        )

    def gibbs_lambda(self):
        st = self.state
        y_meas = st.y[self.grid.measurement_index]
        st.lam = sample_lambda_conditional(
            self.z, y_meas, self.model.a0, self.model.b0, self.streams["lam"]
        )

    def iterate(self):
        self.trajectory_move()
        for r in range(self.p):
            self.node_move(r)
            self.gibbs_node(r)
        self.gibbs_lambda()
        self.k += 1
        if self.config.adapt_burnin and self.k <= self.config.k_max // 2:
            if self._adapt_prop >= self.config.adapt_window:
                rate = self._adapt_acc / self._adapt_prop
                self.eps_traj *= 1.05 if rate > 0.25 else 0.95
                self.eps_traj = min(max(self.eps_traj, 1e-4), 1.0)
                self._adapt_acc = self._adapt_prop = 0

    # -- serialization ----------------------------------------------------

    def rng_states(self):
        states = {
            "init": self.streams["init"].bit_generator.state,
            "traj": self.streams["traj"].bit_generator.state,
            "lam": self.streams["lam"].bit_generator.state,
        }
        for r, g in enumerate(self.streams["nodes"]):
            states[f"node{r}"] = g.bit_generator.state
        return states

    def restore_rng_states(self, states):
        self.streams["init"].bit_generator.state = states["init"]
        self.streams["traj"].bit_generator.state = states["traj"]
        self.streams["lam"].bit_generator.state = states["lam"]
        for r, g in enumerate(self.streams["nodes"]):
            g.bit_generator.state = states[f"node{r}"]

    def restore_state(self, state):
        self.state = state
        self.reg = self._build_reg(state.y)
        self.colmaps = [dict() for _ in range(self.p)]
        for r in range(self.p):
            for j in self._active(r):
                self.colmaps[r][j] = self._make_colmap(r, j)
        self.evidences = self._fresh_evidences(self.reg)


# ---------------------------------------------------------------------------
# storage and the assembled loop


def _alloc(shape, dtype, cap_state):
    """Allocate in memory or spill to a disk-backed array past the cap."""
    nbytes = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if cap_state["left"] >= nbytes:
        cap_state["left"] -= nbytes
        return np.zeros(shape, dtype=dtype)
    if cap_state["dir"] is None:
        cap_state["dir"] = tempfile.mkdtemp(prefix="sdenet-samples-")
    path = os.path.join(cap_state["dir"], f"arr{cap_state['n']}.npy")
    cap_state["n"] += 1
    return np.lib.format.open_memmap(path, mode="w+", dtype=dtype, shape=shape)


def run_chain(
    z,
    grid,
    model,
    config,
    inputs=None,
    progress=None,
    progress_every=100,
    checkpoint_path=None,
    checkpoint_every=None,
    resume_from=None,
):
    """Run the sampler and return its stored samples.

    Iteration 0 is the initial state; every ``thin``-th iteration is
    stored. With ``checkpoint_path``/``checkpoint_every`` the full chain
    state (including RNG streams and samples so far) is written
    periodically, and ``resume_from`` continues a checkpointed run
    bit-exactly.
    """
    chain = Chain(z, grid, model, config, inputs=inputs)
    n_stored = config.k_max // config.thin + 1
    nb = model.kernel.n_beta
    cap = {
        "left": config.memory_cap_mb * 2**20,
        "dir": config.spill_dir,
        "n": 0,
    }
    p, blocks, cols = chain.p, chain.n_blocks, chain.cols
    n_grid = len(grid.t)
    store = {
        "iters": np.zeros(n_stored, dtype=np.int64),
        "s": _alloc((n_stored, p, blocks), np.int8, cap),
        "gamma": _alloc((n_stored, p, blocks), np.float64, cap),
        "beta": _alloc((n_stored, p, blocks, nb), np.float64, cap),
        "w": _alloc((n_stored, p, cols), np.float64, cap),
        "sigma": _alloc((n_stored, p), np.float64, cap),
        "lam": np.zeros(n_stored, dtype=np.float64),
        "y": _alloc((n_stored, n_grid, p), np.float64, cap),
    }

    filled = 0

    def record():
        nonlocal filled
        i = filled
        st = chain.state
        store["iters"][i] = chain.k
        store["s"][i] = st.s
        store["gamma"][i] = st.gamma
        store["beta"][i] = st.beta
        store["w"][i] = st.w
        store["sigma"][i] = st.sigma
        store["lam"][i] = st.lam
        store["y"][i] = st.y
        filled += 1

    k_start = 0
    if resume_from is not None:
        filled = _load_checkpoint(resume_from, chain, store, model, config)
        k_start = chain.k
    else:
        record()

    for k in range(k_start + 1, config.k_max + 1):
        try:
            chain.iterate()
        except NumericError as exc:
            raise NumericError(f"iteration {k}: {exc}") from exc
        if k % config.thin == 0:
            record()
        if progress is not None and k % progress_every == 0:
            rates = {
                name: (acc / prop if prop else float("nan"))
                for name, (acc, prop) in chain.counters.items()
            }
            progress(k, rates)
        if (
            checkpoint_path is not None
            and checkpoint_every
            and k % checkpoint_every == 0
        ):
            _save_checkpoint(checkpoint_path, chain, store, filled, model, config)

    if checkpoint_path is not None:
        _save_checkpoint(checkpoint_path, chain, store, filled, model, config)

    samples = ChainSamples(
        iters=store["iters"][:filled],
        s=store["s"][:filled],
        gamma=store["gamma"][:filled],
        beta=store["beta"][:filled],
        w=store["w"][:filled],
        sigma=store["sigma"][:filled],
        lam=store["lam"][:filled],
        y=store["y"][:filled],
        n_proposed={k: v[1] for k, v in chain.counters.items()},
        n_accepted={k: v[0] for k, v in chain.counters.items()},
        grid=grid,
        model=model,
        sampler=config,
        lag_times=chain.lag_times,
        n_nodes=chain.p,
        n_inputs=chain.n_inputs,
    )
    return samples


def _config_fingerprint(model, config):
    m = asdict(model)
    m["kernel"] = model.kernel.kind
    s = asdict(config)
    # k_max is a run-length budget, not a statistical setting: resuming a
    # checkpoint toward a longer horizon must be allowed
    for runtime_only in ("memory_cap_mb", "spill_dir", "k_max"):
        s.pop(runtime_only, None)
    return {"model": m, "sampler": s}


def _save_checkpoint(path, chain, store, filled, model, config):
    st = chain.state
    meta = {
        "k": chain.k,
        "filled": filled,
        "eps_traj": chain.eps_traj,
        "counters": chain.counters,
        "adapt": [chain._adapt_acc, chain._adapt_prop],
        "rng": chain.rng_states(),
        "fingerprint": _config_fingerprint(model, config),
        "lam": st.lam,
    }
    arrays = {
        "state_y": st.y,
        "state_s": st.s,
        "state_gamma": st.gamma,
        "state_beta": st.beta,
        "state_w": st.w,
        "state_sigma": st.sigma,
    }
    for name in ("iters", "s", "gamma", "beta", "w", "sigma", "lam", "y"):
        arrays[f"samples_{name}"] = np.asarray(store[name][:filled])
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, meta=json.dumps(meta, default=int), **arrays)
    os.replace(tmp, path)


def _load_checkpoint(path, chain, store, model, config):
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            arrays = {k: np.array(data[k]) for k in data.files if k != "meta"}
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read checkpoint {path!r}: {exc}") from exc
    if meta["fingerprint"] != _config_fingerprint(model, config):
        raise ConfigError(
            "checkpoint was produced under a different model/sampler "
            "configuration; refusing to resume"
        )
    if int(meta["k"]) > config.k_max:
        raise ConfigError(
            f"checkpoint is at iteration {meta['k']}, beyond k_max={config.k_max}"
        )
    state = ChainState(
        y=arrays["state_y"],
        s=arrays["state_s"],
        gamma=arrays["state_gamma"],
        beta=arrays["state_beta"],
        w=arrays["state_w"],
        sigma=arrays["state_sigma"],
        lam=float(meta["lam"]),
    )
    chain.restore_state(state)
    chain.k = int(meta["k"])
    chain.eps_traj = float(meta["eps_traj"])
    chain.counters = {k: list(v) for k, v in meta["counters"].items()}
    chain._adapt_acc, chain._adapt_prop = meta["adapt"]
    chain.restore_rng_states(meta["rng"])
    filled = int(meta["filled"])
    for name in ("iters", "s", "gamma", "beta", "w", "sigma", "lam", "y"):
        arr = arrays[f"samples_{name}"]
        store[name][: len(arr)] = arr
    return filled
