"""Ground-truth network generation and SDE simulation.

Systems are linear SDEs dx = (A x + B u) dt + K dW with the first p
states measured, inputs u that are themselves unit Wiener paths, and a
process-noise map K = [I_p; 0] scaled from the requested SNR at
simulation time. A path-driven ODE realization of the same SDE is
provided for integrator cross-checks.
"""

import warnings
from dataclasses import dataclass
from math import ceil, sqrt

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError, DataError, NumericError

_HURWITZ_TOL = -1e-8


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass
class SystemMatrices:
    """A network realization with measured/hidden state partitions."""

    a: np.ndarray
    b: np.ndarray
    k: np.ndarray
    n_obs: int
    n_hidden: int

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.k = np.asarray(self.k, dtype=float)
        n = self.n_obs + self.n_hidden
        if self.a.shape != (n, n):
            raise DataError(f"A must be {n}x{n}, got {self.a.shape}")
        if self.b.ndim != 2 or self.b.shape[0] != n:
            raise DataError("B must have one row per state")
        if self.k.ndim != 2 or self.k.shape[0] != n:
            raise DataError("K must have one row per state")

    @property
    def n_states(self):
        return self.n_obs + self.n_hidden

    @property
    def n_inputs(self):
        return self.b.shape[1]

    # measured/hidden partitions
    @property
    def a11(self):
        return self.a[: self.n_obs, : self.n_obs]

    @property
    def a12(self):
        return self.a[: self.n_obs, self.n_obs :]

    @property
    def a21(self):
        return self.a[self.n_obs :, : self.n_obs]

    @property
    def a22(self):
        return self.a[self.n_obs :, self.n_obs :]

    def to_dict(self):
        return {
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "k": self.k.tolist(),
            "n_obs": self.n_obs,
            "n_hidden": self.n_hidden,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                a=np.array(d["a"], dtype=float),
                b=np.array(d["b"], dtype=float),
                k=np.array(d["k"], dtype=float),
                n_obs=int(d["n_obs"]),
                n_hidden=int(d["n_hidden"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed system description: {exc}") from exc


def is_hurwitz(a):
    """All eigenvalue real parts below the -1e-8 stability tolerance."""
    return bool(np.max(np.linalg.eigvals(np.asarray(a, float)).real) < _HURWITZ_TOL)


def _default_k(n, p):
    k = np.zeros((n, p))
    k[:p, :p] = np.eye(p)
    return k


def _input_matrix(n, p, n_inputs):
    q = p if n_inputs is None else int(n_inputs)
    if q > p:
        raise ConfigError("n_inputs cannot exceed the number of measured nodes")
    b = np.zeros((n, q))
    for j in range(q):
        b[j, j] = 1.0
    return b


def generate_random_network(n, p, density=0.2, rng=None, n_inputs=None, max_tries=10000):
    """Sparse random stable system with p of n states measured.

    The diagonal is forced negative (-|N(0,1)|) and off-diagonal entries
    are standard normal under a Bernoulli mask whose rate is set so the
    expected total fill (diagonal included) is density*n^2; candidates
    are rejected until Hurwitz. By default each measured node gets its
    own input column (B = [I_p; 0]).
    """
    if not 0 < p <= n:
        raise ConfigError("need 0 < p <= n")
    if not 0.0 < density <= 1.0:
        raise ConfigError("density must lie in (0, 1]")
    rng = _as_rng(rng)
    q_off = 0.0
    if n > 1:
        q_off = min(max((density * n * n - n) / (n * n - n), 0.0), 1.0)
    for _ in range(max_tries):
        a = np.zeros((n, n))
        np.fill_diagonal(a, -np.abs(rng.standard_normal(n)))
        mask = rng.random((n, n)) < q_off
        np.fill_diagonal(mask, False)
        vals = rng.standard_normal((n, n))
        a[mask] = vals[mask]
        if is_hurwitz(a):
            return SystemMatrices(
                a=a,
                b=_input_matrix(n, p, n_inputs),
                k=_default_k(n, p),
                n_obs=p,
                n_hidden=n - p,
            )
    raise NumericError(
        f"no Hurwitz matrix found in {max_tries} tries (n={n}, density={density})"
    )


def generate_ring_network(p, rng=None, n_hidden=0, n_inputs=None, max_tries=10000):
    """Directed ring over the measured nodes, hidden nodes as sinks.

    The measured adjacency is exactly the cycle 1 -> 2 -> ... -> p -> 1
    with weights of magnitude in [0.5, 1.5] and random sign plus stable
    self-dynamics; each hidden node is fed by one random measured node
    and feeds nothing back, so hidden states never alter the measured
    ground truth. Candidates are rejected until Hurwitz.
    """
    if p < 2:
        raise ConfigError("a ring needs at least 2 measured nodes")
    rng = _as_rng(rng)
    n = p + n_hidden
    for _ in range(max_tries):
        a = np.zeros((n, n))
        np.fill_diagonal(a, -(1.0 + np.abs(rng.standard_normal(n))))
        mags = 0.5 + rng.random(p)
        signs = np.where(rng.random(p) < 0.5, -1.0, 1.0)
        for j in range(p):
            a[(j + 1) % p, j] = signs[j] * mags[j]
        for h in range(n_hidden):
            src = int(rng.integers(p))
            a[p + h, src] = rng.standard_normal()
        if is_hurwitz(a):
            return SystemMatrices(
                a=a,
                b=_input_matrix(n, p, n_inputs),
                k=_default_k(n, p),
                n_obs=p,
                n_hidden=n_hidden,
            )
    raise NumericError(f"no Hurwitz ring found in {max_tries} tries (n={n})")


# ---------------------------------------------------------------------------
# integration


def sigma_e_from_snr(snr_db):
    """Process-noise variance for unit input variance: 10^(-snr_db/10)."""
    if snr_db is None:
        return 1.0
    return 10.0 ** (-snr_db / 10.0)


def noise_scale_from_snr(snr_db):
    """Amplitude applied to the K pattern: sqrt(sigma_e)."""
    return sqrt(sigma_e_from_snr(snr_db))


@dataclass
class SimulationOutput:
    times: np.ndarray  # measurement instants (M,)
    z: np.ndarray  # noisy measured outputs (M, p)
    u: np.ndarray | None  # input paths at the instants (M, q) or None
    x_true: np.ndarray  # latent states on the internal grid
    t_fine: np.ndarray  # internal grid times
    system: SystemMatrices
    noise_scale: float
    lam_meas: float


def simulate_sde(
    system,
    times,
    rng=None,
    snr_db=None,
    lam_meas=0.0,
    dt_internal=None,
    x0=None,
    method="em",
):
    """Simulate the SDE and sample it at the given instants.

    Inputs (if any) evolve as unit Wiener paths entering the drift; the
    process-noise map K is scaled by sqrt(10^(-snr_db/10)); measurement
    noise of variance lam_meas is added at the instants. The internal
    step never exceeds dt_internal (default: smallest spacing / 100,
    at most spacing / 50) and lands exactly on every instant. Identical
    seeds give bit-identical output.

    method="exact" replaces Euler-Maruyama with the exact one-step
    Gaussian discretization of the linear SDE (autonomous systems only),
    for validating the integrator.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0):
        raise DataError("times must be >= 2 strictly increasing instants")
    if method not in ("em", "exact"):
        raise ConfigError("method must be 'em' or 'exact'")
    if lam_meas < 0:
        raise ConfigError("lam_meas must be nonnegative")
    rng = _as_rng(rng)
    n, p, q = system.n_states, system.n_obs, system.n_inputs
    if not is_hurwitz(system.a):
        warnings.warn("simulating an unstable (non-Hurwitz) system", stacklevel=2)
    if method == "exact" and q:
        raise ConfigError("exact stepping supports autonomous systems only (no inputs)")
    scale = noise_scale_from_snr(snr_db)
    spacings = np.diff(times)
    min_sp = float(spacings.min())
    if dt_internal is None:
        dt0 = min_sp / 100.0
    else:
        dt0 = float(dt_internal)
        if dt0 <= 0:
            raise ConfigError("dt_internal must be positive")
        if dt0 > min_sp / 50.0:
            raise ConfigError(
                f"dt_internal must be <= min spacing / 50 = {min_sp / 50.0:g}"
            )

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (n,):
        raise DataError(f"x0 must have length {n}")
    u = np.zeros(q)
    m_samp = len(times)
    z = np.empty((m_samp, p))
    u_rec = np.empty((m_samp, q)) if q else None
    z[0] = x[:p]
    if q:
        u_rec[0] = u
    t_fine = [times[0]]
    x_fine = [x.copy()]

    a_mat, b_mat, k_mat = system.a, system.b, system.k
    exact_cache = {}
    for i, sp in enumerate(spacings):
        n_sub = max(1, ceil(sp / dt0 - 1e-12))
        h = sp / n_sub
        sh = sqrt(h)
        if method == "exact":
            key = round(h, 15)
            if key not in exact_cache:
                exact_cache[key] = _exact_step_matrices(a_mat, k_mat, scale, h)
            phi, chol_q = exact_cache[key]
        for _ in range(n_sub):
            if method == "exact":
                x = phi @ x + chol_q @ rng.standard_normal(n)
            else:
                dw = sh * rng.standard_normal(p)
                drift = a_mat @ x
                if q:
                    drift = drift + b_mat @ u
                x = x + h * drift + scale * (k_mat @ dw)
                if q:
                    u = u + sh * rng.standard_normal(q)
            x_fine.append(x.copy())
        t_fine.extend(times[i] + h * np.arange(1, n_sub + 1))
        z[i + 1] = x[:p]
        if q:
            u_rec[i + 1] = u
    if lam_meas > 0:
        z = z + sqrt(lam_meas) * rng.standard_normal(z.shape)
    return SimulationOutput(
        times=times,
        z=z,
        u=u_rec,
        x_true=np.array(x_fine),
        t_fine=np.array(t_fine),
        system=system,
        noise_scale=scale,
        lam_meas=float(lam_meas),
    )


def _exact_step_matrices(a_mat, k_mat, scale, h):
    """Van Loan construction of (expm(A h), chol of the step covariance)."""
    n = a_mat.shape[0]
    qc = (scale * scale) * (k_mat @ k_mat.T)
    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = a_mat
    block[:n, n:] = qc
    block[n:, n:] = -a_mat.T
    g = expm(block * h)
    phi = g[:n, :n]
    cov = g[:n, n:] @ phi.T
    cov = 0.5 * (cov + cov.T)
    # guard the Cholesky: the covariance can be singular (e.g. K = 0)
    eps = 1e-12 * max(float(np.max(np.diag(cov))), 1e-30)
    try:
        chol_q = np.linalg.cholesky(cov + eps * np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"exact step covariance not PSD: {exc}") from exc
    return phi, chol_q


def integrate_sde_path(system, dt, w_path, u_path=None, x0=None, noise_scale=1.0):
    """Euler-Maruyama driven by a supplied Wiener path.

    w_path is the cumulative process-noise path (steps+1, p) with
    w_path[0] = 0; u_path the cumulative input path (steps+1, q).
    Returns the measured outputs y on the step grid (steps+1, p).
    """
    w_path = np.asarray(w_path, dtype=float)
    n, p, q = system.n_states, system.n_obs, system.n_inputs
    steps = w_path.shape[0] - 1
    if u_path is None:
        u_path = np.zeros((steps + 1, q))
    elif u_path.shape[0] != steps + 1:
        raise DataError("u_path and w_path must share the same grid")
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = np.empty((steps + 1, p))
    y[0] = x[:p]
    a_mat, b_mat, k_mat = system.a, system.b, system.k
    for i in range(steps):
        drift = a_mat @ x
        if q:
            drift = drift + b_mat @ u_path[i]
        x = x + dt * drift + noise_scale * (k_mat @ (w_path[i + 1] - w_path[i]))
        y[i + 1] = x[:p]
    return y


def simulate_equivalent_realization(
    system, dt, w_path, u_path=None, x0=None, noise_scale=1.0, method="heun"
):
    """Path-driven ODE realization of the same SDE.

    Integrates dz/dt = A z + B u + noise_scale * A K W with z(0) = x0
    and returns y = C z + noise_scale * C K W on the step grid, which
    matches the SDE output driven by the identical Wiener path W (the
    path itself, not its increments). method="euler" reproduces
    Euler-Maruyama up to roundoff; "heun" (default) is second order, so
    its gap to Euler-Maruyama is discretization-limited and shrinks
    linearly with the step.
    """
    if method not in ("heun", "euler"):
        raise ConfigError("method must be 'heun' or 'euler'")
    w_path = np.asarray(w_path, dtype=float)
    n, p, q = system.n_states, system.n_obs, system.n_inputs
    steps = w_path.shape[0] - 1
    if w_path.shape[1] != k_cols(system):
        raise DataError("w_path must have one column per K column")
    if u_path is None:
        u_path = np.zeros((steps + 1, q))
    elif u_path.shape[0] != steps + 1:
        raise DataError("u_path and w_path must share the same grid")
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    a_mat, b_mat, k_mat = system.a, system.b, system.k
    # forcing c_i = B u_i + noise_scale * A K W_i, precomputed per step
    forcing = noise_scale * (w_path @ (a_mat @ k_mat).T)
    if q:
        forcing = forcing + u_path @ b_mat.T
    meas_noise = noise_scale * (w_path @ k_mat[:p].T)
    y = np.empty((steps + 1, p))
    y[0] = x[:p] + meas_noise[0]
    for i in range(steps):
        f1 = a_mat @ x + forcing[i]
        if method == "euler":
            x = x + dt * f1
        else:
            xs = x + dt * f1
            f2 = a_mat @ xs + forcing[i + 1]
            x = x + 0.5 * dt * (f1 + f2)
        y[i + 1] = x[:p] + meas_noise[i + 1]
    return y


def k_cols(system):
    return system.k.shape[1]


def wiener_path(steps, dim, dt, rng):
    """Cumulative Wiener path (steps+1, dim) starting at zero."""
    rng = _as_rng(rng)
    inc = sqrt(dt) * rng.standard_normal((steps, dim))
    path = np.zeros((steps + 1, dim))
    np.cumsum(inc, axis=0, out=path[1:])
    return path


def coarsen_path(path, factor):
    """Subsample a cumulative path onto a grid ``factor`` times coarser."""
    if (path.shape[0] - 1) % factor:
        raise DataError("path length minus one must be divisible by factor")
    return path[::factor]
