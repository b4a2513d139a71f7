"""Control functions and their dyadic summed moduli.

A control function is a non-decreasing modulus ``V`` on ``[0, T)`` with
``V(0) = 0`` and a convergent dyadic series

    vbar_b(t) = sum_{n >= 0} b**n * V(t * 2**-n),

where the growth base ``b`` is 2 for additive sewing and a strong parameter
``theta > 2`` for multiplicative sewing.  The summed modulus is the quantity
that certifies how far a coherent germ can sit from its sewn limit, so every
engine in this package carries one around as its error certificate.

Built-in families:

* ``power``:   ``V(t) = scale * t**alpha`` with ``alpha > 1``.  The series is
  geometric and has the exact closed form
  ``scale * t**alpha * 2**alpha / (2**alpha - b)`` whenever ``b < 2**alpha``.
* ``logpow``:  ``V(t) = scale * t / log(1/t)**alpha`` with ``alpha > 1``,
  defined for ``t < 1``.  Summable only at base 2 (the terms decay like
  ``1/n**alpha``, so any base above 2 diverges); the tail is certified by an
  integral bound rather than a geometric one.
* ``custom``:  a user-supplied vectorised evaluator.  Summability cannot be
  proven for a black box, so it is checked empirically: partial sums of
  ``V(1/n)`` up to ``n_check`` must grow at a decaying rate, and the series
  tail is estimated from the observed ratio of the last terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonConvergenceError, PreconditionError

__all__ = [
    "ControlFunction",
    "power_control",
    "logpow_control",
    "custom_control",
    "summed_modulus",
    "summed_modulus_series",
    "modulus_over_t_limit_check",
    "check_monotone",
]

#: default number of series terms when no closed form applies
N_SERIES_DEFAULT = 64

#: default budget for the empirical summability check of custom evaluators
N_CHECK_DEFAULT = 2**20


@dataclass(frozen=True)
class ControlFunction:
    """A modulus ``V(t)`` together with its convergence metadata.

    ``theta`` is the optional strong-control growth base (strictly above 2).
    When it is ``None``, :meth:`strong_theta` picks an admissible default.
    """

    family: str  # "power" | "logpow" | "custom"
    alpha: Optional[float] = None
    scale: float = 1.0
    theta: Optional[float] = None
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    n_check: int = N_CHECK_DEFAULT
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.family not in ("power", "logpow", "custom"):
            raise PreconditionError("unknown-control-family", self.family)
        if self.family in ("power", "logpow"):
            if self.alpha is None or self.alpha <= 1.0:
                raise PreconditionError(
                    "control-exponent", f"{self.family} family needs alpha > 1, got {self.alpha}"
                )
        if self.family == "custom" and self.evaluator is None:
            raise PreconditionError("control-evaluator", "custom family needs an evaluator")
        if self.scale < 0:
            raise PreconditionError("control-scale", f"scale must be >= 0, got {self.scale}")
        if self.theta is not None and self.theta <= 2.0:
            raise PreconditionError("strong-theta", f"theta must be > 2, got {self.theta}")

    def __call__(self, t):
        """Evaluate ``V`` at scalar or array ``t`` (vectorised)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise PreconditionError("negative-time", "control functions live on t >= 0")
        if self.family == "power":
            out = self.scale * t**self.alpha
        elif self.family == "logpow":
            if np.any(t >= 1.0):
                raise PreconditionError(
                    "logpow-domain", "logpow control is defined for t < 1 only"
                )
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(t > 0, self.scale * t / np.log(1.0 / np.maximum(t, 1e-300)) ** self.alpha, 0.0)
        else:
            out = np.asarray(self.evaluator(t), dtype=float)
            if out.shape != t.shape:
                raise PreconditionError("control-evaluator", "evaluator must be shape-preserving")
        return float(out) if out.ndim == 0 else out

    def strong_theta(self) -> float:
        """Growth base used for the multiplicative (strong) summed modulus.

        Any value in ``(2, 2**p)`` is admissible for the power family with
        exponent ``p``; the midpoint-in-log default keeps the series well
        inside the convergent regime while never exceeding 2.5.
        """
        if self.theta is not None:
            return self.theta
        if self.family == "power":
            cap = 2.0 ** ((1.0 + self.alpha) / 2.0)  # geometric mean of 2 and 2**alpha
            return min(2.5, cap)
        return 2.5

    def check_summability(self, n_max: Optional[int] = None) -> None:
        """Empirical guard that ``sum_n V(1/n)`` converges (custom family).

        Partial-sum increments over doubling blocks must shrink by a stable
        factor below 1; otherwise the evaluator is rejected.  This is a
        heuristic screen, not a proof -- a black-box evaluator can defeat it.
        """
        if self.family != "custom":
            return  # built-in families are summable by construction (alpha > 1)
        n_max = n_max or self.n_check
        blocks = []
        lo = 1
        while lo < n_max:
            hi = min(2 * lo, n_max)
            n = np.arange(lo, hi + 1, dtype=float)
            blocks.append(float(np.sum(self(1.0 / n))))
            lo = hi + 1
        tail = [b for b in blocks[-4:] if b > 0]
        if len(tail) >= 2:
            ratios = [tail[i + 1] / tail[i] for i in range(len(tail) - 1)]
            if any(r >= 0.98 for r in ratios):
                raise NonConvergenceError(
                    f"partial sums of V(1/n) keep growing (block ratios {ratios}); "
                    f"modulus looks non-summable up to n={n_max}"
                )


def power_control(alpha: float, scale: float = 1.0, theta: Optional[float] = None) -> ControlFunction:
    """``V(t) = scale * t**alpha`` with ``alpha > 1``."""
    return ControlFunction("power", alpha=alpha, scale=scale, theta=theta,
                           label=f"power:{alpha:g}")


def logpow_control(alpha: float, scale: float = 1.0) -> ControlFunction:
    """``V(t) = scale * t / log(1/t)**alpha`` with ``alpha > 1``, for ``t < 1``."""
    return ControlFunction("logpow", alpha=alpha, scale=scale, label=f"logpow:{alpha:g}")


def custom_control(evaluator: Callable, theta: Optional[float] = None,
                   n_check: int = N_CHECK_DEFAULT) -> ControlFunction:
    """Wrap a vectorised black-box modulus; summability is checked empirically."""
    cf = ControlFunction("custom", evaluator=evaluator, theta=theta, n_check=n_check,
                         label="custom")
    cf.check_summability()
    return cf


def _series_terms(cf: ControlFunction, t: float, base: float, n_terms: int) -> np.ndarray:
    n = np.arange(n_terms, dtype=float)
    return base**n * np.asarray(cf(t * 2.0 ** (-n)), dtype=float)


def summed_modulus(cf: ControlFunction, t: float, base: float = 2.0) -> float:
    """The dyadic series ``sum_n base**n V(t 2**-n)``, certified from above.

    Closed form for the power family; otherwise a truncated series plus a
    tail bound (integral bound for ``logpow``, observed-ratio geometric bound
    for custom evaluators).  Raises :class:`NonConvergenceError` when the
    series provably or apparently diverges for the requested base.
    """
    if t < 0:
        raise PreconditionError("negative-time", f"t={t}")
    if base < 2.0:
        raise PreconditionError("summed-modulus-base", f"base must be >= 2, got {base}")
    if t == 0:
        return 0.0

    if cf.family == "power":
        pow2a = 2.0**cf.alpha
        if base >= pow2a:
            raise NonConvergenceError(
                f"geometric ratio {base}/2**{cf.alpha} >= 1: series diverges for base {base}"
            )
        return cf.scale * t**cf.alpha * pow2a / (pow2a - base)

    if cf.family == "logpow":
        if base > 2.0:
            raise NonConvergenceError(
                "logpow modulus is not a strong control: terms decay like 1/n**alpha, "
                f"so the series diverges for base {base} > 2"
            )
        terms = _series_terms(cf, t, base, N_SERIES_DEFAULT)
        # terms are t / (n log2 + log(1/t))**alpha; integral test from the last index
        big_l = math.log(1.0 / t)
        n_last = N_SERIES_DEFAULT - 1
        tail = (
            t
            * ((n_last * math.log(2.0) + big_l) ** (1.0 - cf.alpha))
            / ((cf.alpha - 1.0) * math.log(2.0))
        ) * cf.scale
        return float(np.sum(terms)) + tail

    return summed_modulus_series(cf, t, base, N_SERIES_DEFAULT)


def summed_modulus_series(cf: ControlFunction, t: float, base: float = 2.0,
                          n_terms: int = N_SERIES_DEFAULT) -> float:
    """Truncated-series evaluation with a tail bound appended.

    The power family uses its exact geometric ratio ``base * 2**-alpha`` for
    the tail, so this agrees with the closed form to machine precision and
    serves as the independent cross-check of :func:`summed_modulus`.
    """
    if t == 0:
        return 0.0
    terms = _series_terms(cf, t, base, n_terms)
    partial = float(np.sum(terms))
    last = float(terms[-1])
    if last == 0.0:
        return partial
    if cf.family == "power":
        r = base * 2.0 ** (-cf.alpha)
        if r >= 1.0:
            raise NonConvergenceError(f"geometric ratio {r} >= 1 for base {base}")
        return partial + last * r / (1.0 - r)
    # observed-ratio geometric bound; rejects evaluators whose terms stall
    nz = terms[terms > 0]
    if len(nz) >= 6:
        ratios = nz[-5:] / nz[-6:-1]
        r = float(np.max(ratios))
    else:
        r = 0.5
    if r >= 0.999:
        raise NonConvergenceError(
            f"series terms are not decaying (observed ratio {r:.6f}) for base {base}"
        )
    return partial + last * r / (1.0 - r)


def modulus_over_t_limit_check(cf: ControlFunction, t_sequence, base: float = 2.0,
                               rtol: float = 1e-9) -> bool:
    """Diagnostic: is ``vbar(t)/t`` non-increasing along ``t_sequence``?

    ``t_sequence`` must be strictly decreasing and positive.  Returns True
    when the ratios decrease (within ``rtol`` slack) toward their infimum --
    the self-test every registered control function should pass, since the
    summed modulus of a genuine control function is ``o(t)`` at zero.
    """
    ts = np.asarray(t_sequence, dtype=float)
    if ts.ndim != 1 or len(ts) < 2 or np.any(np.diff(ts) >= 0) or np.any(ts <= 0):
        raise PreconditionError("t-sequence", "need a strictly decreasing positive sequence")
    ratios = np.array([summed_modulus(cf, float(t), base) / float(t) for t in ts])
    slack = rtol * max(1.0, float(ratios[0]))
    return bool(np.all(np.diff(ratios) <= slack))


def check_monotone(cf: ControlFunction, ts) -> None:
    """Raise unless ``V(0) = 0`` and ``V`` is non-decreasing on the grid ``ts``."""
    ts = np.sort(np.asarray(ts, dtype=float))
    v0 = float(cf(0.0))
    if abs(v0) > 1e-15:
        raise PreconditionError("control-origin", f"V(0) = {v0}, expected 0")
    vals = np.asarray(cf(ts), dtype=float)
    if np.any(np.diff(vals) < -1e-12 * max(1.0, float(np.max(np.abs(vals))))):
        i = int(np.argmin(np.diff(vals)))
        raise PreconditionError(
            "control-monotonicity", f"V decreases between t={ts[i]} and t={ts[i+1]}"
        )
