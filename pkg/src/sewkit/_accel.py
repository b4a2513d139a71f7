"""Guarded Aitken acceleration of dyadic refinement sequences.

Refinement iterates of a coherent germ approach their limit with errors that
are (asymptotically) a short mix of geometric modes, e.g. ``c1*r**n + c2*r2**n``
with ``r`` fixed by the control-function exponent.  One Aitken pass removes
the dominant mode; chaining passes removes the next ones.  Every pass is
guarded: ratios must be stable and strictly inside (0, 0.97), otherwise the
sequence is returned untouched and the engine falls back to the plain iterate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

__all__ = ["Accelerator", "AccelEstimate"]

_MAX_WINDOW = 8
_RATIO_HI = 0.97
_RATIO_SPREAD = 0.35  # relative disagreement tolerated between successive ratios


@dataclass
class AccelEstimate:
    vector: np.ndarray
    residual: float  # distance between the last two accelerated estimates
    stages: int


def _aitken_pass(seq: List[np.ndarray]) -> Optional[List[np.ndarray]]:
    """One vector-Aitken sweep, or None when the ratios are untrustworthy."""
    out: List[np.ndarray] = []
    ratios: List[float] = []
    for i in range(len(seq) - 2):
        d1 = seq[i + 1] - seq[i]
        d2 = seq[i + 2] - seq[i + 1]
        den = float(d1 @ d1)
        if den == 0.0:
            return None
        r = float(d2 @ d1) / den
        if not (1e-6 < r < _RATIO_HI):
            return None
        ratios.append(r)
        out.append(seq[i + 2] + d2 * (r / (1.0 - r)))
    if len(ratios) >= 2:
        spread = max(ratios) - min(ratios)
        if spread > _RATIO_SPREAD * max(ratios):
            return None
    return out


class Accelerator:
    """Accumulates flat iterates and produces extrapolated limit estimates."""

    def __init__(self, max_stages: int = 2):
        self.max_stages = max_stages
        self._seq: List[np.ndarray] = []
        self._last: Optional[np.ndarray] = None

    def push(self, vec: np.ndarray) -> None:
        self._seq.append(np.asarray(vec, dtype=float))
        if len(self._seq) > _MAX_WINDOW:
            self._seq.pop(0)

    def estimate(self) -> Optional[AccelEstimate]:
        """Best current extrapolation, or None when no pass is admissible.

        The residual is measured between this call's estimate and the
        previous call's, which tracks how settled the extrapolation is.
        """
        if len(self._seq) < 3:
            return None
        seq = list(self._seq)
        stages = 0
        for _ in range(self.max_stages):
            if len(seq) < 3:
                break
            nxt = _aitken_pass(seq)
            if nxt is None:
                break
            seq = nxt
            stages += 1
        if stages == 0:
            return None
        vec = seq[-1]
        if self._last is not None and self._last.shape == vec.shape:
            residual = float(np.linalg.norm(vec - self._last))
        else:
            residual = float("inf")
        self._last = vec
        return AccelEstimate(vector=vec, residual=residual, stages=stages)
