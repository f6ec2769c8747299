"""Stable-spline covariance kernels on the truncated lag grid.

Each candidate link carries an impulse-response vector sampled on the lag
grid {dt, 2 dt, ..., l dt}; its prior covariance is a scaled kernel matrix
``s * |gamma| * k(t_p, t_q; beta)``. All kernels decay for beta in (0, 1),
which encodes exponential stability of the impulse responses.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError

# Diagonal jitter applied before any factorization, relative to the
# largest diagonal entry.
JITTER_REL = 1e-10

KERNEL_KINDS = ("TC", "DC", "SS")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family selector.

    kind : {"TC", "DC", "SS"}
        Tuned/correlated, diagonal/correlated, or stable-spline kernel.
    """

    kind: str = "TC"

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(
                f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}"
            )

    @property
    def n_beta(self):
        """Number of decay hyperparameters the kernel takes."""
        return 2 if self.kind == "DC" else 1


@dataclass
class LinkPrior:
    """Per-link hyperparameter bundle: indicator, scale, decay."""

    s: int
    gamma: float
    beta: np.ndarray


def kernel_eval(spec, t, s, beta):
    """Evaluate the kernel at times ``t``, ``s`` (scalars or arrays).

    Parameters
    ----------
    spec : KernelSpec
    t, s : float or ndarray
        Nonnegative times; broadcast against each other.
    beta : array_like
        Decay hyperparameters, each in (0, 1); one component for TC/SS,
        two for DC.

    Returns
    -------
    float or ndarray
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape[0] != spec.n_beta:
        raise ConfigError(
            f"kernel {spec.kind} takes {spec.n_beta} beta component(s), "
            f"got {beta.shape[0]}"
        )
    if np.any(beta <= 0.0) or np.any(beta >= 1.0):
        raise ConfigError(f"beta components must lie in (0, 1), got {beta}")
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    hi = np.maximum(t, s)
    if spec.kind == "TC":
        out = beta[0] ** hi
    elif spec.kind == "DC":
        out = beta[0] ** ((t + s) / 2.0) * beta[1] ** np.abs(t - s)
    else:  # SS
        b = beta[0]
        out = b ** (t + s + hi) / 2.0 - b ** (3.0 * hi) / 6.0
    if out.ndim == 0:
        return float(out)
    return out


def build_link_covariance(spec, link, lags):
    """Kernel covariance block for one link on the given lag times.

    Returns the zero matrix when the link indicator is off; otherwise
    ``|gamma| * k(t_p, t_q; beta)`` with the sign of gamma discarded.
    """
    lags = np.asarray(lags, dtype=float)
    m = len(lags)
    if link.s == 0 or link.gamma == 0.0:
        return np.zeros((m, m))
    tt, ss = np.meshgrid(lags, lags, indexing="ij")
    return abs(link.gamma) * kernel_eval(spec, tt, ss, link.beta)


def add_jitter(k):
    """Return a copy of ``k`` with relative diagonal jitter added."""
    k = np.array(k, dtype=float, copy=True)
    if k.size:
        k[np.diag_indices_from(k)] += JITTER_REL * float(np.max(np.diag(k)))
    return k


def chol_psd(k, what="kernel matrix"):
    """Lower Cholesky factor of a PSD matrix after jitter.

    Raises NumericError when the matrix is not positive definite even
    after jitter.
    """
    kj = add_jitter(k)
    try:
        return np.linalg.cholesky(kj)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"{what} is not positive definite after jitter") from exc
