"""Sampled paths: generation, CSV ingestion, Holder characterisation.

A :class:`SampledPath` is a strictly increasing time grid with one vector
value per knot; between knots it evaluates by linear interpolation.  The
CSV wire format is ``t,x1,...,xd`` with rows sorted by time.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.special import ndtri

from .errors import PreconditionError

__all__ = [
    "SampledPath",
    "sample_brownian",
    "estimate_holder",
    "linear_path",
    "poly_path",
    "path_from_function",
]


@dataclass
class SampledPath:
    """Time grid plus vector values, with lazily estimated Holder data."""

    times: np.ndarray
    values: np.ndarray
    _holder: Optional[Tuple[float, float]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.times.ndim != 1 or len(self.times) != len(self.values):
            raise PreconditionError("path-shape", "times and values must align")
        if len(self.times) < 2 or np.any(np.diff(self.times) <= 0):
            raise PreconditionError("path-times", "times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise PreconditionError("path-values", "values must be finite")

    # ------------------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def grid_step(self) -> float:
        """Uniform step size; raises on non-uniform grids."""
        steps = np.diff(self.times)
        h = float(steps[0])
        if not np.allclose(steps, h, rtol=1e-9, atol=1e-12):
            raise PreconditionError("grid", "path grid is not uniform")
        return h

    def value_at(self, t) -> np.ndarray:
        """Linear interpolation; scalar ``t`` gives ``(d,)``, arrays ``(n, d)``."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < self.times[0] - 1e-12) or np.any(t_arr > self.times[-1] + 1e-12):
            raise PreconditionError("path-domain",
                                    f"query outside [{self.times[0]}, {self.times[-1]}]")
        idx = np.clip(np.searchsorted(self.times, t_arr, side="right") - 1,
                      0, len(self.times) - 2)
        t0 = self.times[idx]
        t1 = self.times[idx + 1]
        w = np.clip((t_arr - t0) / (t1 - t0), 0.0, 1.0)
        out = self.values[idx] * (1.0 - w[:, None]) + self.values[idx + 1] * w[:, None]
        return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out

    # ------------------------------------------------------------------
    @property
    def alpha_est(self) -> float:
        if self._holder is None:
            self._holder = estimate_holder(self)
        return self._holder[0]

    @property
    def norm_est(self) -> float:
        if self._holder is None:
            self._holder = estimate_holder(self)
        return self._holder[1]

    # ------------------------------------------------------------------
    def to_csv(self, target: Union[str, Path, io.TextIOBase]) -> None:
        header = "t," + ",".join(f"x{i+1}" for i in range(self.dim))
        data = np.column_stack([self.times, self.values])
        np.savetxt(target, data, delimiter=",", header=header, comments="",
                   fmt="%.17g")

    @classmethod
    def from_csv(cls, source: Union[str, Path, io.TextIOBase]) -> "SampledPath":
        data = np.loadtxt(source, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] < 2:
            raise PreconditionError("csv", "need at least columns t,x1")
        return cls(times=data[:, 0], values=data[:, 1:])


def path_from_function(fn: Callable[[np.ndarray], np.ndarray], n_points: int,
                       t_end: float = 1.0, t_start: float = 0.0) -> SampledPath:
    """Sample ``fn`` on a uniform grid; ``fn`` maps a time array to (n,) or (n,d)."""
    ts = np.linspace(t_start, t_end, n_points)
    vals = np.asarray(fn(ts), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return SampledPath(times=ts, values=vals)


def linear_path(n_points: int = 1025, t_end: float = 1.0, dim: int = 1) -> SampledPath:
    """The path ``x_j(t) = t`` in every coordinate."""
    ts = np.linspace(0.0, t_end, n_points)
    return SampledPath(times=ts, values=np.tile(ts[:, None], (1, dim)))


def poly_path(coeffs, n_points: int = 1025, t_end: float = 1.0) -> SampledPath:
    """Scalar polynomial path ``sum_k c_k t**k`` from low-order coefficients."""
    c = np.asarray(coeffs, dtype=float)
    ts = np.linspace(0.0, t_end, n_points)
    return SampledPath(times=ts, values=np.polyval(c[::-1], ts))


def sample_brownian(dim: int, n_points: int, horizon: float = 1.0,
                    seed: int = 0) -> SampledPath:
    """Seeded Brownian sample on a uniform grid of ``n_points = 2**k + 1`` knots.

    Generator recipe (fixed so any implementation can reproduce the paths):
    a PCG64 stream seeded with ``seed`` emits 53-bit uniforms in step-major,
    coordinate-minor order; increments are ``ndtri(u) * sqrt(step)`` (inverse
    normal CDF); the path starts at 0 and cumulatively sums the increments.
    """
    k = int(np.log2(max(n_points - 1, 1)))
    if n_points != 2**k + 1 or k < 1:
        raise PreconditionError("grid-points", f"n_points must be 2**k + 1, got {n_points}")
    if dim < 1:
        raise PreconditionError("dim", f"dim must be >= 1, got {dim}")
    step = horizon / (n_points - 1)
    gen = np.random.Generator(np.random.PCG64(seed))
    u = gen.random((n_points - 1, dim))
    z = ndtri(np.clip(u, 1e-300, 1.0 - 1e-16))
    values = np.vstack([np.zeros((1, dim)), np.cumsum(z * np.sqrt(step), axis=0)])
    ts = np.linspace(0.0, horizon, n_points)
    return SampledPath(times=ts, values=values)


def estimate_holder(path: SampledPath, scales: int = 8) -> Tuple[float, float]:
    """Estimate the Holder exponent and seminorm of a sampled path.

    Regresses ``log(max increment at lag s)`` against ``log s`` over dyadic
    lags (max, not mean, to match the seminorm definition).  The exponent is
    clamped to ``(0, 1]``; the seminorm is the largest observed ratio
    ``increment / s**alpha``, so the fitted bound holds on the estimation
    grid by construction.  Returns ``(alpha_est, norm_est)``.
    """
    n = len(path.times)
    max_scales = int(np.floor(np.log2((n - 1) / 2)))
    if max_scales < 4:
        raise PreconditionError("holder-scales", "need at least 4 dyadic scales")
    scales = min(scales, max_scales)
    span = path.t_end - path.t_start

    lags = [2**j for j in range(scales)]
    sizes = []
    incs = []
    for lag in lags:
        diffs = path.values[lag:] - path.values[:-lag]
        m = float(np.max(np.linalg.norm(diffs, axis=1)))
        sizes.append(lag * span / (n - 1))
        incs.append(m)
    sizes = np.array(sizes)
    incs = np.array(incs)

    if np.all(incs == 0.0):
        return 1.0, 0.0
    mask = incs > 0
    slope, _ = np.polyfit(np.log(sizes[mask]), np.log(incs[mask]), 1)
    alpha = float(np.clip(slope, 1e-3, 1.0))
    norm = float(np.max(incs / sizes**alpha))
    return alpha, norm
