"""Multiplicative sewing on a normed monoid.

The engine mirrors the additive one with products in place of sums: the
level-n iterate is the ordered product of the germ over the level-n dyadic
grid, combined by an ordered reduction tree (adjacent pairs first), which is
exactly the n-fold midpoint pairing.  Factors are never reordered.

The monoid is abstract: anything with an associative product, a unit ``I``,
a distance ``d`` satisfying ``d(xz, yz) <= |z| d(x, y)`` (both sides) and a
magnitude ``|.|`` with ``|I| = 1`` plugs in through :class:`MonoidOps`.
Square real matrices under the operator norm are the stock instance; the
truncated tensor algebra provides another (see ``sewkit.signature``).

Convergence of the iteration is only guaranteed while the running magnitude
supremum stays tame, so the engine tracks the largest magnitude seen among
all partial products of each level (``running_magnitude``) and aborts with
:class:`~sewkit.errors.BootstrapError` when it exceeds a ceiling; callers
then fall back to :func:`windowed_sew` over shorter windows, which is
equivalent by multiplicativity of the limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional

import numpy as np

from ._accel import Accelerator
from .control import ControlFunction, summed_modulus
from .errors import BootstrapError, GermEvaluationError, PreconditionError
from .additive import SewingResult
from .matops import operator_norm, operator_norms

__all__ = [
    "MonoidOps",
    "MatrixOps",
    "MultiplicativeGerm",
    "refine_once_mul",
    "sew_mul",
    "windowed_sew",
    "refined_mul",
    "coherence_ratios_mul",
]


class MonoidOps:
    """Operations a value type must expose to the multiplicative engine.

    Batches are opaque to the engine: it only ever stacks germ values,
    multiplies adjacent pairs (preserving time order) and asks for the
    largest magnitude in the batch.
    """

    def identity(self):
        raise NotImplementedError

    def multiply(self, x, y):
        raise NotImplementedError

    def distance(self, x, y) -> float:
        raise NotImplementedError

    def magnitude(self, x) -> float:
        raise NotImplementedError

    def flatten(self, x) -> np.ndarray:
        raise NotImplementedError

    def unflatten(self, vec: np.ndarray):
        raise NotImplementedError

    # batch interface -------------------------------------------------
    def stack(self, values: List[Any]):
        raise NotImplementedError

    def batch_count(self, batch) -> int:
        raise NotImplementedError

    def multiply_adjacent(self, batch):
        """Combine ``(v0 v1), (v2 v3), ...``; odd trailing element passes through."""
        raise NotImplementedError

    def batch_first(self, batch):
        raise NotImplementedError

    def max_magnitude(self, batch) -> float:
        raise NotImplementedError


class MatrixOps(MonoidOps):
    """m x m real matrices; distance and magnitude are the operator norm."""

    def __init__(self, dim: int):
        self.dim = dim

    def identity(self):
        return np.eye(self.dim)

    def multiply(self, x, y):
        return x @ y

    def distance(self, x, y) -> float:
        return operator_norm(x - y)

    def magnitude(self, x) -> float:
        return operator_norm(x)

    def flatten(self, x) -> np.ndarray:
        return np.ravel(np.asarray(x, dtype=float))

    def unflatten(self, vec: np.ndarray):
        return np.asarray(vec, dtype=float).reshape(self.dim, self.dim)

    def stack(self, values):
        return np.stack([np.asarray(v, dtype=float) for v in values])

    def batch_count(self, batch) -> int:
        return batch.shape[0]

    def multiply_adjacent(self, batch):
        if batch.shape[0] % 2:
            head = batch[:-1]
            tail = batch[-1:]
            return np.concatenate([head[0::2] @ head[1::2], tail]) if head.size else tail
        return batch[0::2] @ batch[1::2]

    def batch_first(self, batch):
        return batch[0]

    def max_magnitude(self, batch) -> float:
        return float(np.max(operator_norms(batch)))


@dataclass
class MultiplicativeGerm:
    """Monoid-valued two-parameter map with ``mu(a, a) = I``.

    ``control`` must be a strong control (its ``strong_theta()`` base feeds
    the certified bound).  ``evaluate_many`` returns a batch as understood
    by ``ops``.
    """

    domain_end: float
    evaluate: Callable[[float, float], Any]
    control: ControlFunction
    ops: MonoidOps
    evaluate_many: Optional[Callable[[np.ndarray, np.ndarray], Any]] = None
    label: str = field(default="", compare=False)


def _check_interval(germ, a: float, b: float) -> None:
    if not (0.0 <= a <= b < germ.domain_end):
        raise PreconditionError(
            "interval", f"need 0 <= a <= b < {germ.domain_end}, got ({a}, {b})"
        )


def _level_batch(germ: MultiplicativeGerm, level: int, a: float, b: float):
    edges = np.linspace(a, b, 2**level + 1)
    lefts, rights = edges[:-1], edges[1:]
    if germ.evaluate_many is not None:
        try:
            return germ.evaluate_many(lefts, rights)
        except Exception as exc:  # noqa: BLE001
            raise GermEvaluationError(a, b, exc) from exc
    vals = []
    for lo, hi in zip(lefts, rights):
        try:
            vals.append(germ.evaluate(float(lo), float(hi)))
        except Exception as exc:  # noqa: BLE001
            raise GermEvaluationError(float(lo), float(hi), exc) from exc
    return germ.ops.stack(vals)


def _ordered_product(germ: MultiplicativeGerm, level: int, a: float, b: float,
                     ceiling: Optional[float] = None):
    """Reduce the level-n batch to a single value; returns (value, max magnitude)."""
    ops = germ.ops
    batch = _level_batch(germ, level, a, b)
    peak = ops.max_magnitude(batch)
    if ceiling is not None and peak > ceiling:
        raise BootstrapError(
            f"iterate magnitude {peak:.3e} exceeded ceiling {ceiling:.3e} at level {level}; "
            "sew over shorter windows (windowed_sew)", level, peak)
    while ops.batch_count(batch) > 1:
        batch = ops.multiply_adjacent(batch)
        peak = max(peak, ops.max_magnitude(batch))
        if ceiling is not None and peak > ceiling:
            raise BootstrapError(
                f"iterate magnitude {peak:.3e} exceeded ceiling {ceiling:.3e} at level {level}; "
                "sew over shorter windows (windowed_sew)", level, peak)
    return ops.batch_first(batch), peak


def refine_once_mul(germ: MultiplicativeGerm, level: int, a: float, b: float):
    """Ordered product of the germ over the level-n dyadic grid of ``[a, b]``."""
    _check_interval(germ, a, b)
    if level < 0:
        raise PreconditionError("level", f"level must be >= 0, got {level}")
    if a == b:
        return germ.ops.identity()
    value, _ = _ordered_product(germ, level, a, b)
    return value


def sew_mul(
    germ: MultiplicativeGerm,
    a: float,
    b: float,
    tol: float = 1e-10,
    max_level: int = 18,
    extrapolate: bool = True,
    magnitude_ceiling: Optional[float] = None,
) -> SewingResult:
    """Iterate midpoint products to the unique multiplicative limit.

    Stops when the level-to-level distance drops below ``tol`` (or, with
    ``extrapolate``, when the guarded Aitken estimate settles to ``tol/2``).
    ``magnitude_ceiling`` defaults to ``10 * max(|mu(a,b)|, 1)``; crossing it
    raises :class:`BootstrapError` instead of silently diverging.
    """
    _check_interval(germ, a, b)
    if tol <= 0:
        raise PreconditionError("tol", f"tol must be > 0, got {tol}")
    ops = germ.ops
    theta = germ.control.strong_theta()
    certified = summed_modulus(germ.control, b - a, base=theta)
    if a == b:
        return SewingResult(ops.identity(), 0, 0.0, certified, True)

    mu0, h0 = _ordered_product(germ, 0, a, b)
    ceiling = magnitude_ceiling if magnitude_ceiling is not None else 10.0 * max(h0, 1.0)

    accel = Accelerator()
    accel.push(ops.flatten(mu0))
    prev = mu0
    value = None
    aposteriori = float("inf")
    converged = False
    extrapolated = False
    level = 0

    for level in range(1, max_level + 1):
        cur, _ = _ordered_product(germ, level, a, b, ceiling=ceiling)
        accel.push(ops.flatten(cur))
        aposteriori = ops.distance(cur, prev)
        if aposteriori <= tol:
            value = cur
            converged = True
            break
        if extrapolate:
            est = accel.estimate()
            if est is not None and est.residual <= 0.5 * tol:
                value = ops.unflatten(est.vector)
                converged = True
                extrapolated = True
                break
        prev = cur

    if value is None:
        est = accel.estimate() if extrapolate else None
        if est is not None:
            value = ops.unflatten(est.vector)
            extrapolated = True
        else:
            value = prev

    observed = ops.distance(value, mu0) / certified if certified > 0 else None
    return SewingResult(value, level, aposteriori, certified, converged,
                        extrapolated, observed)


def windowed_sew(
    germ: MultiplicativeGerm,
    a: float,
    b: float,
    window: float,
    tol: float = 1e-10,
    **kwargs,
):
    """Sew on subwindows of length <= ``window`` and multiply in time order.

    Equal to ``sew_mul`` on the whole interval by multiplicativity of the
    limit, but each window sees a shorter interval, which keeps the
    magnitude bootstrap condition satisfiable for germs that grow.
    """
    _check_interval(germ, a, b)
    if window <= 0:
        raise PreconditionError("window", f"window must be > 0, got {window}")
    if a == b:
        return germ.ops.identity()
    k = max(1, int(np.ceil((b - a) / window)))
    edges = np.linspace(a, b, k + 1)
    acc = None
    for lo, hi in zip(edges[:-1], edges[1:]):
        res = sew_mul(germ, float(lo), float(hi), tol=tol, **kwargs)
        acc = res.value if acc is None else germ.ops.multiply(acc, res.value)
    return acc


def refined_mul(germ: MultiplicativeGerm) -> MultiplicativeGerm:
    """The once-refined germ ``mu'(a,b) = mu(a,c) mu(c,b)`` at the midpoint."""
    ops = germ.ops

    def one(a, b):
        c = 0.5 * (a + b)
        return ops.multiply(germ.evaluate(a, c), germ.evaluate(c, b))

    many = None
    if germ.evaluate_many is not None:
        def many(los, his):  # noqa: ANN001
            mids = 0.5 * (los + his)
            left = germ.evaluate_many(los, mids)
            right = germ.evaluate_many(mids, his)
            return _interleave_product(ops, left, right)

    return MultiplicativeGerm(
        domain_end=germ.domain_end,
        evaluate=one,
        control=germ.control,
        ops=ops,
        evaluate_many=many,
        label=germ.label + "+refined" if germ.label else "refined",
    )


def _interleave_product(ops: MonoidOps, left, right):
    # pairwise product of two equally sized batches: out[i] = left[i] right[i]
    n = ops.batch_count(left)
    values = [ops.multiply(_batch_at(ops, left, i), _batch_at(ops, right, i))
              for i in range(n)]
    return ops.stack(values)


def _batch_at(ops: MonoidOps, batch, i: int):
    if isinstance(batch, np.ndarray):
        return batch[i]
    return batch.at(i)  # tensor batches expose .at()


def coherence_ratios_mul(germ: MultiplicativeGerm, rng: np.random.Generator,
                         n_triples: int = 100,
                         interval=None) -> np.ndarray:
    """Sampled ``d(mu(a,b), mu(a,c) mu(c,b)) / V(b - a)`` over random triples."""
    lo, hi = interval if interval is not None else (0.0, germ.domain_end * (1 - 1e-9))
    ops = germ.ops
    out = []
    while len(out) < n_triples:
        a, c, b = np.sort(rng.uniform(lo, hi, size=3))
        v = float(germ.control(b - a))
        if v <= 0:
            continue
        whole = germ.evaluate(a, b)
        split = ops.multiply(germ.evaluate(a, c), germ.evaluate(c, b))
        out.append(ops.distance(whole, split) / v)
    return np.array(out)
