"""Uniform refinement grids over irregular measurement times.

Measurement instants T1 = {t_k1, ..., t_kM} are embedded into a finer
uniform grid T = {t_0, ..., t_N} with step dT, so that every measurement
falls exactly on a grid point. The points of T that are not measurement
instants form T2, grouped into inter-measurement segments.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GridError

# Relative tolerance used when checking that spacings are integer
# multiples of a common step.
_REL_TOL = 1e-9
# A common step that subdivides the shortest spacing more than this many
# times is useless in practice, so such spacings count as incommensurate.
_MAX_SUBDIV = 10**4


def _common_step(spacings):
    """Largest step g such that every spacing is an integer multiple of g.

    Spacings are expressed as rationals relative to the smallest one;
    returns None when they are incommensurate at the module tolerance or
    when the step would subdivide the shortest spacing absurdly finely.
    """
    from fractions import Fraction
    from math import lcm

    base = float(np.min(spacings))
    denom = 1
    for s in spacings:
        frac = Fraction(float(s) / base).limit_denominator(_MAX_SUBDIV)
        if abs(float(frac) - s / base) > _REL_TOL:
            return None
        denom = lcm(denom, frac.denominator)
        if denom > _MAX_SUBDIV:
            return None
    g = base / denom
    for s in spacings:
        k = s / g
        if abs(k - round(k)) > _REL_TOL * max(1.0, k):
            return None
    return g


@dataclass
class FineGrid:
    """Uniform grid with measurement bookkeeping.

    Attributes
    ----------
    t : ndarray, shape (N+1,)
        Grid times; ``t[0] == T1[0]`` and measurement instants are exact.
    dt : float
        Canonical grid step.
    measurement_index : ndarray of int, shape (M,)
        Indices k_q with ``t[measurement_index[q]] == T1[q]``.
    segment_lengths : ndarray of int, shape (M-1,)
        Interval counts N_q = k_{q+1} - k_q between consecutive
        measurements; ``segment_lengths.sum() == N``.
    snap_distance : float
        Largest distance a measurement was moved to land on the grid
        (zero unless a manual step forced snapping).
    """

    t: np.ndarray
    dt: float
    measurement_index: np.ndarray
    segment_lengths: np.ndarray
    snap_distance: float = 0.0

    @property
    def n_intervals(self):
        return len(self.t) - 1

    @property
    def n_measurements(self):
        return len(self.measurement_index)

    @property
    def measurement_times(self):
        return self.t[self.measurement_index]

    @property
    def interior_index(self):
        """Grid indices that are not measurement instants."""
        mask = np.ones(len(self.t), dtype=bool)
        mask[self.measurement_index] = False
        return np.nonzero(mask)[0]


def build_grid(times, refinement, manual_dt=None):
    """Build the uniform fine grid spanning the measurement times.

    Parameters
    ----------
    times : array_like, shape (M,)
        Strictly increasing measurement instants, M >= 2.
    refinement : int
        Intervals inserted per common step; refinement 1 with uniform
        spacing reproduces the measurement grid itself.
    manual_dt : float, optional
        Explicit base step overriding common-step detection. Measurement
        times are snapped to the nearest grid point and the largest snap
        distance is recorded on the result.

    Returns
    -------
    FineGrid

    Raises
    ------
    GridError
        If times are not strictly increasing, or no common step exists
        and ``manual_dt`` was not given.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 2:
        raise GridError("need at least two measurement times")
    spacings = np.diff(times)
    if np.any(spacings <= 0):
        bad = int(np.nonzero(spacings <= 0)[0][0])
        raise GridError(
            f"measurement times must be strictly increasing; "
            f"interval {bad} has spacing {spacings[bad]!r}"
        )
    refinement = int(refinement)
    if refinement < 1:
        raise GridError(f"refinement must be a positive integer, got {refinement}")

    if manual_dt is not None:
        if manual_dt <= 0:
            raise GridError("manual_dt must be positive")
        g = float(manual_dt)
    else:
        g = _common_step(spacings)
        if g is None:
            offenders = ", ".join(
                f"[{times[i]:g}, {times[i + 1]:g}]" for i in range(len(spacings))
            )
            raise GridError(
                "measurement spacings share no common step at relative "
                f"tolerance {_REL_TOL:g} (intervals: {offenders}); pass an "
                "explicit base step via manual_dt to snap times onto a grid"
            )

    dt = g / refinement
    counts = np.maximum(1, np.round(spacings / dt).astype(int))
    snap = 0.0
    if manual_dt is not None:
        snapped = times[0] + np.concatenate([[0], np.cumsum(counts)]) * dt
        snap = float(np.max(np.abs(snapped - times)))
    else:
        for i, (s, c) in enumerate(zip(spacings, counts)):
            if abs(s - c * dt) > _REL_TOL * max(1.0, abs(s)):
                raise GridError(
                    f"interval [{times[i]:g}, {times[i + 1]:g}] is not an "
                    f"integer multiple of dt={dt:g}"
                )

    k = np.concatenate([[0], np.cumsum(counts)])
    if manual_dt is not None:
        t = times[0] + np.arange(k[-1] + 1) * dt
    else:
        # assemble per-segment so measurement instants are exact floats
        pieces = []
        for i, c in enumerate(counts):
            seg = np.linspace(times[i], times[i + 1], c + 1)
            pieces.append(seg[:-1] if i < len(counts) - 1 else seg)
        t = np.concatenate(pieces)
        t[k] = times  # exact round-trip

    return FineGrid(
        t=t,
        dt=float(dt),
        measurement_index=k.astype(int),
        segment_lengths=counts,
        snap_distance=snap,
    )
