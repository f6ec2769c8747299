"""Posterior summaries of a stored chain."""

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class PosteriorSummary:
    """Post-burn-in means and the most frequent measured topology."""

    link_prob: np.ndarray  # (p, blocks) indicator means
    s_map: np.ndarray  # (p, p) most frequent measured topology
    w_mean: np.ndarray  # (p, cols)
    y_mean: np.ndarray  # (grid, p)
    gamma_mean: np.ndarray
    beta_mean: np.ndarray
    sigma_mean: np.ndarray
    lam_mean: float
    burn_in: int
    n_kept: int
    acceptance_rates: dict
    n_nodes: int
    n_inputs: int
    lag_times: np.ndarray

    @property
    def edge_prob(self):
        """Measured-node link probabilities (p, p)."""
        return self.link_prob[:, : self.n_nodes]

    @property
    def s_threshold(self):
        """Per-link 0.5-threshold topology over measured nodes (p, p)."""
        return (self.edge_prob > 0.5).astype(self.s_map.dtype)


def summarize(samples, burn_in=None):
    """Reduce chain samples to posterior summaries.

    ``burn_in`` defaults to half the stored samples (rounded down). The
    hyperparameter means are raw chain means, so entries whose link was
    mostly off reflect carried-over values.
    """
    n = len(samples.iters)
    if n == 0:
        raise DataError("no stored samples to summarize")
    burn = n // 2 if burn_in is None else int(burn_in)
    if not 0 <= burn < n:
        raise DataError(f"burn_in must lie in [0, {n - 1}], got {burn}")
    p = samples.n_nodes

    s_kept = np.asarray(samples.s[burn:])
    link_prob = s_kept.mean(axis=0)

    counts = {}
    for i in range(s_kept.shape[0]):
        key = s_kept[i, :, :p].tobytes()
        if key in counts:
            counts[key][0] += 1
        else:
            counts[key] = [1, i]
    best_key, best_count = None, -1
    for key, (cnt, _first) in counts.items():  # insertion order = first seen
        if cnt > best_count:
            best_key, best_count = key, cnt
    s_map = np.frombuffer(best_key, dtype=samples.s.dtype).reshape(p, p).copy()

    return PosteriorSummary(
        link_prob=link_prob,
        s_map=s_map,
        w_mean=np.asarray(samples.w[burn:]).mean(axis=0),
        y_mean=np.asarray(samples.y[burn:]).mean(axis=0),
        gamma_mean=np.asarray(samples.gamma[burn:]).mean(axis=0),
        beta_mean=np.asarray(samples.beta[burn:]).mean(axis=0),
        sigma_mean=np.asarray(samples.sigma[burn:]).mean(axis=0),
        lam_mean=float(np.asarray(samples.lam[burn:]).mean()),
        burn_in=burn,
        n_kept=n - burn,
        acceptance_rates=samples.acceptance_rates,
        n_nodes=p,
        n_inputs=samples.n_inputs,
        lag_times=samples.lag_times,
    )


def pool_chains(samples_list, burn_in=None):
    """Concatenate the post-burn-in samples of several chains.

    Each chain discards its own burn-in first (default: half), then the
    kept samples are stacked into one ChainSamples-shaped object with
    summed move counters, ready for ``summarize(..., burn_in=0)``.
    """
    from .sampler import ChainSamples  # deferred to avoid an import cycle

    if not samples_list:
        raise DataError("no chains to pool")
    if len(samples_list) == 1 and burn_in is None:
        return samples_list[0]
    parts = {k: [] for k in ("iters", "s", "gamma", "beta", "w", "sigma", "lam", "y")}
    n_prop, n_acc = {}, {}
    for samples in samples_list:
        n = len(samples.iters)
        burn = n // 2 if burn_in is None else int(burn_in)
        if not 0 <= burn < n:
            raise DataError(f"burn_in must lie in [0, {n - 1}], got {burn}")
        for key in parts:
            parts[key].append(np.asarray(getattr(samples, key))[burn:])
        for key, v in samples.n_proposed.items():
            n_prop[key] = n_prop.get(key, 0) + v
        for key, v in samples.n_accepted.items():
            n_acc[key] = n_acc.get(key, 0) + v
    first = samples_list[0]
    return ChainSamples(
        **{k: np.concatenate(v, axis=0) for k, v in parts.items()},
        n_proposed=n_prop,
        n_accepted=n_acc,
        grid=first.grid,
        model=first.model,
        sampler=first.sampler,
        lag_times=first.lag_times,
        n_nodes=first.n_nodes,
        n_inputs=first.n_inputs,
    )


def impulse_score(summary):
    """Edge scores from posterior-mean impulse-response norms.

    score[r, j] = ||w_mean block (r, j)|| / ||w_mean row r||, zero when
    the row norm vanishes. Covers measured-node blocks only.
    """
    p = summary.n_nodes
    l = len(summary.lag_times)
    out = np.zeros((p, p))
    for r in range(p):
        row = summary.w_mean[r]
        denom = float(np.linalg.norm(row))
        if denom == 0.0:
            continue
        for j in range(p):
            out[r, j] = np.linalg.norm(row[j * l : (j + 1) * l]) / denom
    return out
