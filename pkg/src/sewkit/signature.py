"""Truncated tensor algebra and Lyons-type extension of multiplicative data.

An element of the algebra truncated at depth ``L`` over R^d is a tuple of
levels ``(t_0, t_1, ..., t_L)`` with ``t_k`` a dense ``d**k`` coordinate
block (stored flat, row-major).  Levels carry the Euclidean norm, which is a
cross-norm: ``|u (x) v| = |u| |v|`` for elementary blocks, and the algebra
norm ``sum_k |t_k|`` is submultiplicative, so the truncated algebra is a
normed monoid and the multiplicative sewing engine applies verbatim.

A family ``X(a,b)`` of such elements (levels 1..n given, unit level 0) that
satisfies the Chen identity

    X_k(a,b) = sum_{i+j=k} X_i(a,c) (x) X_j(c,b)        for k <= n

and the graded Holder bounds ``|X_k(a,b)| <= M |b-a|**(k alpha)`` with
``alpha > 1/(n+1)`` extends uniquely to all levels: feed the zero-padded
truncation to multiplicative sewing with the strong control
``V(t) = M' t**((n+1) alpha)``.  Lower levels are preserved exactly (the
germ is already multiplicative there) and the tail above level n is bounded
by ``C |b-a|**((n+1) alpha)``.

The "grid signature" of a sampled path (iterated left-point sums) is the
workhorse input: it satisfies Chen exactly at grid points because it is a
product of one-step tensors, and its unique extension is the higher-level
iterated sum family on the same grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .control import power_control
from .errors import NonConvergenceError, PreconditionError
from .multiplicative import MonoidOps, MultiplicativeGerm, sew_mul
from .paths import SampledPath

__all__ = [
    "TruncatedTensor",
    "tensor_multiply",
    "tensor_exp",
    "tensor_log",
    "TensorOps",
    "GridSignature",
    "GeodesicFunctional",
    "CallableFunctional",
    "chen_defects",
    "extend_functional",
    "ExtendedFunctional",
    "decay_constants",
    "binomial_power_sum",
    "eval_e_beta",
    "growth_envelope",
    "EnvelopeFit",
    "signature_to_json",
    "signature_from_json",
]


# ======================================================================
# Truncated tensors
# ======================================================================

class TruncatedTensor:
    """Graded element of the tensor algebra over R^d, truncated at ``depth``.

    Levels are flat float arrays of length ``d**k``.  Instances are treated
    as immutable; arithmetic returns new objects.
    """

    __slots__ = ("d", "levels")

    def __init__(self, d: int, levels: Sequence[np.ndarray]):
        self.d = int(d)
        self.levels = [np.asarray(lv, dtype=float).reshape(-1) for lv in levels]
        for k, lv in enumerate(self.levels):
            if lv.shape != (self.d**k,):
                raise PreconditionError(
                    "tensor-shape", f"level {k} has {lv.shape[0]} coords, expected {self.d**k}"
                )

    # ------------------------------------------------------------------
    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @classmethod
    def unit(cls, d: int, depth: int) -> "TruncatedTensor":
        levels = [np.zeros(d**k) for k in range(depth + 1)]
        levels[0][0] = 1.0
        return cls(d, levels)

    @classmethod
    def zero(cls, d: int, depth: int) -> "TruncatedTensor":
        return cls(d, [np.zeros(d**k) for k in range(depth + 1)])

    def padded(self, depth: int) -> "TruncatedTensor":
        if depth < self.depth:
            raise PreconditionError("tensor-depth", "padded() cannot drop levels")
        levels = list(self.levels) + [np.zeros(self.d**k)
                                      for k in range(self.depth + 1, depth + 1)]
        return TruncatedTensor(self.d, levels)

    def truncated(self, depth: int) -> "TruncatedTensor":
        return TruncatedTensor(self.d, self.levels[: depth + 1])

    def level(self, k: int, reshape: bool = False) -> np.ndarray:
        lv = self.levels[k]
        return lv.reshape((self.d,) * k) if reshape and k > 0 else lv

    # ------------------------------------------------------------------
    def __add__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        self._compat(other)
        return TruncatedTensor(self.d, [a + b for a, b in zip(self.levels, other.levels)])

    def __sub__(self, other: "TruncatedTensor") -> "TruncatedTensor":
        self._compat(other)
        return TruncatedTensor(self.d, [a - b for a, b in zip(self.levels, other.levels)])

    def __mul__(self, scalar: float) -> "TruncatedTensor":
        return TruncatedTensor(self.d, [float(scalar) * lv for lv in self.levels])

    __rmul__ = __mul__

    def _compat(self, other: "TruncatedTensor") -> None:
        if self.d != other.d or self.depth != other.depth:
            raise PreconditionError(
                "tensor-compat",
                f"(d={self.d}, L={self.depth}) vs (d={other.d}, L={other.depth})",
            )

    # ------------------------------------------------------------------
    def level_norms(self) -> np.ndarray:
        return np.array([float(np.linalg.norm(lv)) for lv in self.levels])

    def algebra_norm(self) -> float:
        return float(np.sum(self.level_norms()))

    def as_vector(self) -> np.ndarray:
        return np.concatenate(self.levels)

    @classmethod
    def from_vector(cls, d: int, depth: int, vec: np.ndarray) -> "TruncatedTensor":
        levels = []
        pos = 0
        for k in range(depth + 1):
            n = d**k
            levels.append(vec[pos: pos + n])
            pos += n
        return cls(d, levels)

    def dilated(self, lam: float) -> "TruncatedTensor":
        """Scale level ``k`` by ``lam**k`` (the grading dilation)."""
        return TruncatedTensor(self.d, [lam**k * lv for k, lv in enumerate(self.levels)])

    def group_inverse(self) -> "TruncatedTensor":
        """Inverse of a unit-leading element via the truncated Neumann series."""
        if not np.isclose(self.levels[0][0], 1.0):
            raise PreconditionError("tensor-unit", "group_inverse needs level 0 == 1")
        u = TruncatedTensor(self.d, [lv.copy() for lv in self.levels])
        u.levels[0] = np.zeros(1)
        acc = TruncatedTensor.unit(self.d, self.depth)
        term = TruncatedTensor.unit(self.d, self.depth)
        for _ in range(self.depth):
            term = tensor_multiply(term, u) * (-1.0)
            acc = acc + term
        return acc

    def __repr__(self) -> str:
        return f"TruncatedTensor(d={self.d}, depth={self.depth}, |.|={self.algebra_norm():.4g})"


def tensor_multiply(s: TruncatedTensor, t: TruncatedTensor,
                    depth: Optional[int] = None) -> TruncatedTensor:
    """Graded product ``(s t)_k = sum_{i+j=k} s_i (x) t_j``, truncated."""
    if s.d != t.d:
        raise PreconditionError("tensor-compat", f"d={s.d} vs d={t.d}")
    depth = min(s.depth, t.depth) if depth is None else depth
    if depth > min(s.depth, t.depth):
        raise PreconditionError("tensor-depth", "operands shallower than requested depth")
    d = s.d
    out = []
    for k in range(depth + 1):
        acc = np.zeros(d**k)
        for i in range(k + 1):
            si, tj = s.levels[i], t.levels[k - i]
            acc += np.multiply.outer(si, tj).reshape(-1)
        out.append(acc)
    return TruncatedTensor(d, out)


def tensor_exp(x: TruncatedTensor) -> TruncatedTensor:
    """Exponential of an element with zero scalar part (nilpotent, exact)."""
    if not np.isclose(x.levels[0][0], 0.0):
        raise PreconditionError("tensor-exp", "exp needs level 0 == 0")
    acc = TruncatedTensor.unit(x.d, x.depth)
    term = TruncatedTensor.unit(x.d, x.depth)
    for j in range(1, x.depth + 1):
        term = tensor_multiply(term, x) * (1.0 / j)
        acc = acc + term
    return acc


def tensor_log(g: TruncatedTensor) -> TruncatedTensor:
    """Logarithm of a unit-leading element (nilpotent series, exact)."""
    if not np.isclose(g.levels[0][0], 1.0):
        raise PreconditionError("tensor-log", "log needs level 0 == 1")
    u = TruncatedTensor(g.d, [lv.copy() for lv in g.levels])
    u.levels[0] = np.zeros(1)
    acc = TruncatedTensor.zero(g.d, g.depth)
    power = TruncatedTensor.unit(g.d, g.depth)
    for j in range(1, g.depth + 1):
        power = tensor_multiply(power, u)
        acc = acc + power * ((-1.0) ** (j + 1) / j)
    return acc


# ======================================================================
# Batched representation + monoid ops
# ======================================================================

@dataclass
class TensorBatch:
    """Stack of truncated tensors: one ``(count, d**k)`` array per level."""

    d: int
    levels: List[np.ndarray]

    @property
    def count(self) -> int:
        return self.levels[0].shape[0]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def at(self, i: int) -> TruncatedTensor:
        return TruncatedTensor(self.d, [lv[i] for lv in self.levels])


def _batch_multiply(d: int, left: List[np.ndarray], right: List[np.ndarray]) -> List[np.ndarray]:
    depth = len(left) - 1
    out = []
    for k in range(depth + 1):
        acc = np.zeros_like(left[k])
        for i in range(k + 1):
            li = left[i]
            rj = right[k - i]
            acc += (li[:, :, None] * rj[:, None, :]).reshape(li.shape[0], -1)
        out.append(acc)
    return out


class TensorOps(MonoidOps):
    """Truncated tensor algebra as a normed monoid for the sewing engine."""

    def __init__(self, d: int, depth: int):
        self.d = d
        self.depth = depth
        self._sizes = [d**k for k in range(depth + 1)]

    def identity(self):
        return TruncatedTensor.unit(self.d, self.depth)

    def multiply(self, x, y):
        return tensor_multiply(x, y, self.depth)

    def distance(self, x, y) -> float:
        return (x - y).algebra_norm()

    def magnitude(self, x) -> float:
        return x.algebra_norm()

    def flatten(self, x) -> np.ndarray:
        return x.as_vector()

    def unflatten(self, vec: np.ndarray):
        return TruncatedTensor.from_vector(self.d, self.depth, vec)

    # batch interface -------------------------------------------------
    def stack(self, values):
        levels = [np.stack([v.levels[k] for v in values]) for k in range(self.depth + 1)]
        return TensorBatch(self.d, levels)

    def batch_count(self, batch) -> int:
        return batch.count

    def multiply_adjacent(self, batch):
        n = batch.count
        if n % 2:
            head = [lv[:-1] for lv in batch.levels]
            prod = _batch_multiply(self.d, [lv[0::2] for lv in head], [lv[1::2] for lv in head])
            levels = [np.concatenate([p, lv[-1:]]) for p, lv in zip(prod, batch.levels)]
            return TensorBatch(self.d, levels)
        left = [lv[0::2] for lv in batch.levels]
        right = [lv[1::2] for lv in batch.levels]
        return TensorBatch(self.d, _batch_multiply(self.d, left, right))

    def batch_first(self, batch):
        return batch.at(0)

    def max_magnitude(self, batch) -> float:
        mags = np.zeros(batch.count)
        for lv in batch.levels:
            mags += np.linalg.norm(lv, axis=1)
        return float(np.max(mags))


# ======================================================================
# Multiplicative functionals (the level-n input data)
# ======================================================================

class TensorFunctional:
    """Family ``(a, b) -> TruncatedTensor`` at input depth ``n_in``.

    Concrete classes fill in :meth:`eval`; ``alpha`` and ``holder_const``
    feed the extension's control function.
    """

    d: int
    n_in: int
    alpha: float
    holder_const: float
    domain_end: float

    def eval(self, a: float, b: float) -> TruncatedTensor:
        raise NotImplementedError

    def eval_many(self, los: np.ndarray, his: np.ndarray) -> TensorBatch:
        values = [self.eval(float(a), float(b)) for a, b in zip(los, his)]
        levels = [np.stack([v.levels[k] for v in values]) for k in range(self.n_in + 1)]
        return TensorBatch(self.d, levels)

    def aligned_max_level(self, a: float, b: float) -> Optional[int]:
        """Deepest dyadic refinement of [a, b] whose nodes stay exact; None if unconstrained."""
        return None

    def fit_holder_const(self, rng: np.random.Generator, n_pairs: int = 64) -> float:
        worst = 0.0
        for _ in range(n_pairs):
            a, b = np.sort(rng.uniform(0.0, self.domain_end * (1 - 1e-9), size=2))
            if b - a <= 1e-9:
                continue
            x = self.eval(float(a), float(b))
            for k in range(1, self.n_in + 1):
                nk = float(np.linalg.norm(x.levels[k]))
                worst = max(worst, nk / (b - a) ** (k * self.alpha))
        return worst


class GridSignature(TensorFunctional):
    """Iterated left-point sums of a sampled path, levels 1..n_in.

    Prefix sums ``P_k(t_i) = sum over increasing index tuples of length k``
    are cumulated once; any ``X(a, b)`` is then the group quotient
    ``X(0,a)^{-1} X(0,b)``, which is exact at grid points (the prefix family
    is a genuine ordered product of one-step tensors).  Off-grid queries
    interpolate the prefix arrays linearly.
    """

    def __init__(self, path: SampledPath, n_in: int = 2, alpha: Optional[float] = None):
        if n_in < 1:
            raise PreconditionError("depth", f"n_in must be >= 1, got {n_in}")
        self.path = path
        self.d = path.dim
        self.n_in = n_in
        self.alpha = float(alpha) if alpha is not None else min(1.0, path.alpha_est)
        self.domain_end = np.nextafter(path.t_end, np.inf)
        d = self.d
        x = path.values
        dx = np.diff(x, axis=0)
        n = len(path.times)
        prefix = [np.ones((n, 1))]
        prev = np.zeros((n, 1))
        prev[:, 0] = 1.0
        cur = np.concatenate([np.zeros((1, d)), np.cumsum(dx, axis=0)])
        prefix.append(cur)
        for _k in range(2, n_in + 1):
            contrib = (cur[:-1, :, None] * dx[:, None, :]).reshape(n - 1, -1)
            cur = np.concatenate([np.zeros((1, contrib.shape[1])),
                                  np.cumsum(contrib, axis=0)])
            prefix.append(cur)
        self._prefix = prefix
        rng = np.random.Generator(np.random.PCG64(20240601))
        self.holder_const = self.fit_holder_const(rng)

    def _prefix_at(self, ts: np.ndarray) -> List[np.ndarray]:
        times = self.path.times
        idx = np.clip(np.searchsorted(times, ts, side="right") - 1, 0, len(times) - 2)
        w = np.clip((ts - times[idx]) / (times[idx + 1] - times[idx]), 0.0, 1.0)
        out = []
        for lv in self._prefix:
            out.append(lv[idx] * (1.0 - w[:, None]) + lv[idx + 1] * w[:, None])
        return out

    def eval_many(self, los: np.ndarray, his: np.ndarray) -> TensorBatch:
        ga = self._prefix_at(np.asarray(los, dtype=float))
        gb = self._prefix_at(np.asarray(his, dtype=float))
        inv = _batch_group_inverse(self.d, ga)
        return TensorBatch(self.d, _batch_multiply(self.d, inv, gb))

    def eval(self, a: float, b: float) -> TruncatedTensor:
        return self.eval_many(np.array([a]), np.array([b])).at(0)

    def aligned_max_level(self, a: float, b: float) -> Optional[int]:
        h = self.path.grid_step()
        ia = (a - self.path.t_start) / h
        ib = (b - self.path.t_start) / h
        if abs(ia - round(ia)) > 1e-9 or abs(ib - round(ib)) > 1e-9:
            return None
        span = int(round(ib - ia))
        if span <= 0:
            return 0
        depth = 0
        while span % 2 == 0:
            span //= 2
            depth += 1
        return depth


def _batch_group_inverse(d: int, levels: List[np.ndarray]) -> List[np.ndarray]:
    # Neumann series of 1/(1+u), exact because u is nilpotent in truncation
    depth = len(levels) - 1
    u = [lv.copy() for lv in levels]
    u[0] = np.zeros_like(u[0])
    acc = [lv.copy() for lv in u]
    for k in range(depth + 1):
        acc[k] = np.zeros_like(levels[k])
    acc[0][:, 0] = 1.0
    term = [a.copy() for a in acc]
    for _ in range(depth):
        term = _batch_multiply(d, term, u)
        for k in range(depth + 1):
            term[k] = -term[k]
            acc[k] = acc[k] + term[k]
    return acc


class GeodesicFunctional(TensorFunctional):
    """Constant-velocity functional ``X(a, b) = exp(((b-a)/span) log g)``.

    The canonical multiplicative interpolation of a single group-like
    element ``g`` (its one-parameter flow), used by the CLI to turn a stored
    signature into extendable two-parameter data.  Chen holds exactly since
    the powers of one log commute.
    """

    def __init__(self, g: TruncatedTensor, span: float = 1.0,
                 alpha: float = 1.0, domain_end: Optional[float] = None):
        self.d = g.d
        self.n_in = g.depth
        self.alpha = alpha
        self.span = span
        self.domain_end = domain_end if domain_end is not None else span * (1 + 1e-12)
        self._log = tensor_log(g)
        rng = np.random.Generator(np.random.PCG64(20240602))
        self.holder_const = max(self.fit_holder_const(rng), 1e-12)

    def eval(self, a: float, b: float) -> TruncatedTensor:
        return tensor_exp(self._log * ((b - a) / self.span))


class CallableFunctional(TensorFunctional):
    """Adapter for closed-form level data ``(a, b) -> list of level arrays``."""

    def __init__(self, fn: Callable[[float, float], Sequence[np.ndarray]],
                 d: int, n_in: int, alpha: float, domain_end: float,
                 holder_const: Optional[float] = None):
        self.fn = fn
        self.d = d
        self.n_in = n_in
        self.alpha = alpha
        self.domain_end = domain_end
        if holder_const is None:
            rng = np.random.Generator(np.random.PCG64(20240603))
            self.holder_const = self.fit_holder_const(rng)
        else:
            self.holder_const = holder_const

    def eval(self, a: float, b: float) -> TruncatedTensor:
        levels = [np.asarray(lv, dtype=float).reshape(-1) for lv in self.fn(a, b)]
        return TruncatedTensor(self.d, levels)


# ======================================================================
# Chen checks and the extension
# ======================================================================

def chen_defects(eval_fn: Callable[[float, float], TruncatedTensor],
                 a: float, c: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-level Chen defect of an evaluator at one triple.

    Returns ``(absolute, relative)`` arrays indexed by level; the relative
    figure divides by the magnitude of the terms entering the identity, so
    it is scale-invariant.
    """
    whole = eval_fn(a, b)
    left = eval_fn(a, c)
    right = eval_fn(c, b)
    prod = tensor_multiply(left, right, whole.depth)
    absolute = (whole - prod).level_norms()
    ln = left.level_norms()
    rn = right.level_norms()
    wn = whole.level_norms()
    scale = np.array([wn[k] + sum(ln[i] * rn[k - i] for i in range(k + 1))
                      for k in range(whole.depth + 1)])
    relative = absolute / np.maximum(scale, 1e-300)
    return absolute, relative


class ExtendedFunctional:
    """Lazy extension of level-n data to depth L via multiplicative sewing."""

    def __init__(self, base: TensorFunctional, depth: int, tol: float,
                 max_level: int, germ: MultiplicativeGerm):
        self.base = base
        self.depth = depth
        self.tol = tol
        self.max_level = max_level
        self.germ = germ
        self._cache = {}

    def eval(self, a: float, b: float) -> TruncatedTensor:
        key = (float(a), float(b))
        if key not in self._cache:
            cap = self.base.aligned_max_level(a, b)
            lvl = self.max_level if cap is None or cap < 8 else min(self.max_level, cap)
            res = sew_mul(self.germ, a, b, tol=self.tol, max_level=lvl)
            self._cache[key] = res.value
        return self._cache[key]

    def tail_constant(self, pairs) -> float:
        """Fitted ``C`` in ``sum_{k>n} |Y_k(a,b)| <= C (b-a)**((n+1) alpha)``."""
        n, alpha = self.base.n_in, self.base.alpha
        worst = 0.0
        for a, b in pairs:
            if b - a <= 0:
                continue
            y = self.eval(float(a), float(b))
            tail = float(np.sum(y.level_norms()[n + 1:]))
            worst = max(worst, tail / (b - a) ** ((n + 1) * alpha))
        return worst


def extend_functional(base: TensorFunctional, depth: int, tol: float = 1e-11,
                      validate: bool = True, n_check_triples: int = 32,
                      check_tol: float = 1e-8, seed: int = 0,
                      max_level: int = 18) -> ExtendedFunctional:
    """Extend level-n multiplicative data to depth ``depth``.

    With ``validate`` the input contract is spot-checked first: Chen defects
    and graded Holder ratios on random triples; the worst offender is named
    in the refusal.  ``n_in >= depth`` inputs are returned as-is (nothing to
    extend; the wrapper just pads).
    """
    n = base.n_in
    if depth < n:
        raise PreconditionError("depth", f"target depth {depth} below input depth {n}")
    if base.alpha <= 1.0 / (n + 1):
        raise PreconditionError(
            "extension-alpha",
            f"alpha={base.alpha:.4f} <= 1/(n_in+1)={1.0/(n+1):.4f}; extension not certified",
        )

    if validate and n >= 1:
        rng = np.random.Generator(np.random.PCG64(seed))
        worst_rel, worst_triple = 0.0, None
        for _ in range(n_check_triples):
            a, c, b = np.sort(rng.uniform(0.0, base.domain_end * (1 - 1e-9), size=3))
            _, rel = chen_defects(base.eval, float(a), float(c), float(b))
            r = float(np.max(rel[: n + 1]))
            if r > worst_rel:
                worst_rel, worst_triple = r, (float(a), float(c), float(b))
        if worst_rel > check_tol:
            raise PreconditionError(
                "chen-defect",
                f"input violates the Chen identity: relative defect {worst_rel:.3e} "
                f"at triple {worst_triple}",
            )

    # control coefficient: the padded germ's defect lives at levels n+1..2n,
    # each a sum of at most n graded products bounded by the Holder constant
    m_const = max(base.holder_const, 1e-12)
    span = base.domain_end
    coeff = 0.0
    for k in range(n + 1, 2 * n + 1):
        terms = 2 * n - k + 1
        coeff += terms * m_const**2 * span ** ((k - (n + 1)) * base.alpha)
    coeff = max(coeff, 1e-12)
    control = power_control((n + 1) * base.alpha, scale=coeff)

    ops = TensorOps(base.d, depth)

    def many(los, his):
        batch = base.eval_many(np.asarray(los, dtype=float), np.asarray(his, dtype=float))
        levels = list(batch.levels) + [np.zeros((len(los), base.d**k))
                                       for k in range(n + 1, depth + 1)]
        return TensorBatch(base.d, levels)

    def one(a, b):
        return many(np.array([a]), np.array([b])).at(0)

    germ = MultiplicativeGerm(
        domain_end=base.domain_end,
        evaluate=one,
        evaluate_many=many,
        control=control,
        ops=ops,
        label="signature-extension",
    )
    return ExtendedFunctional(base, depth, tol, max_level, germ)


# ======================================================================
# Level-constant recursions and growth envelopes
# ======================================================================

def decay_constants(constants, alpha: float, n_max: int) -> np.ndarray:
    """Extend graded Holder constants by the midpoint-split recursion.

    Given ``K_1..K_N`` with ``|X_k(a,b)| <= K_k |b-a|**(k alpha)``, new
    levels obey ``K_{n+1} = sum_{k=1}^{n} K_k K_{n-k+1} / (2**((n+1) alpha) - 2)``,
    which dominates the best constants of the unique extension.
    """
    k = np.asarray(constants, dtype=float).copy()
    if np.any(k <= 0):
        raise PreconditionError("decay-constants", "level constants must be positive")
    n0 = len(k)
    if n_max <= n0:
        return k[:max(n_max, 0)] if n_max < n0 else k
    denom_min = 2.0 ** ((n0 + 1) * alpha) - 2.0
    if denom_min <= 0:
        raise PreconditionError(
            "decay-alpha", f"2**((n+1) alpha) <= 2 at n={n0}; recursion denominator <= 0"
        )
    out = list(k)
    for n in range(n0, n_max):
        denom = 2.0 ** ((n + 1) * alpha) - 2.0
        conv = sum(out[i] * out[n - 1 - i] for i in range(n))  # K_1..K_n paired
        out.append(conv / denom)
    return np.array(out)


def binomial_power_sum(n: int, beta: float) -> float:
    """``sum_k binom(n, k)**beta`` -- the squared-series coefficient bound."""
    return float(sum(math.comb(n, k) ** beta for k in range(n + 1)))


def eval_e_beta(x: float, beta: float, tol: float = 1e-16) -> float:
    """The entire function ``sum_n x**n / (n!)**beta`` by direct summation.

    Terms are added until they drop below ``tol`` times the running sum;
    convergence is unconditional for finite ``x >= 0``.
    """
    if x < 0:
        raise PreconditionError("e-beta-domain", f"x must be >= 0, got {x}")
    if beta <= 0:
        raise PreconditionError("e-beta-exponent", f"beta must be > 0, got {beta}")
    total = 1.0
    term = 1.0
    n = 0
    while True:
        n += 1
        term *= x / n**beta
        total += term
        if term < tol * total:
            return total
        if n > 100_000:
            raise NonConvergenceError("e_beta summation did not settle (x too large?)")


@dataclass
class EnvelopeFit:
    c: float
    x: float
    c_prime: float
    sup_ratio: float
    sup_at: int


def growth_envelope(constants, alpha: float, beta: float,
                    n_sup_cap: int = 200) -> EnvelopeFit:
    """Factorial-decay envelope ``K_m <= c x**m / (m!)**beta`` for all m.

    The pair ``(c, x)`` covers the given constants and satisfies the
    persistence condition ``1/c >= sup_{n>N} E_{n+1}/(2**((n+1) alpha) - 2)``
    with ``E_n = sum_k binom(n,k)**beta``, so the recursion keeps the
    envelope valid at every higher level.  Requires ``beta < alpha``, except
    for the classical boundary case ``beta = alpha = 1``.  The supremum is
    scanned up to ``n_sup_cap`` and certified by the tail ratios decaying.
    """
    k = np.asarray(constants, dtype=float)
    if np.any(k < 0):
        raise PreconditionError("envelope-constants", "constants must be >= 0")
    if beta <= 0:
        raise PreconditionError("envelope-beta", f"beta must be > 0, got {beta}")
    if beta > alpha or (beta == alpha and not np.isclose(alpha, 1.0)):
        raise PreconditionError(
            "envelope-exponents",
            f"need beta < alpha (or beta = alpha = 1), got beta={beta}, alpha={alpha}",
        )
    n_levels = len(k)
    ratios = []
    for n in range(n_levels + 1, n_sup_cap + 1):
        denom = 2.0 ** ((n + 1) * alpha) - 2.0
        if denom <= 0:
            raise PreconditionError("envelope-alpha", f"2**((n+1) alpha) <= 2 at n={n}")
        ratios.append(binomial_power_sum(n + 1, beta) / denom)
    ratios = np.array(ratios)
    tail = ratios[-20:]
    if np.any(np.diff(tail) > 1e-12 * np.maximum(tail[:-1], 1e-300)):
        raise NonConvergenceError(
            "persistence ratios are not decaying near the scan cap; raise n_sup_cap"
        )
    sup_ratio = float(np.max(ratios))
    sup_at = int(np.argmax(ratios)) + n_levels + 1
    c = 1.0 / sup_ratio

    x = 0.0
    for m in range(1, n_levels + 1):
        if k[m - 1] > 0:
            x = max(x, (k[m - 1] * math.factorial(m) ** beta / c) ** (1.0 / m))
    if x == 0.0:
        x = 1.0
    x *= 1.0 + 1e-12  # keep the fitted inequalities strict under rounding
    return EnvelopeFit(c=c, x=x, c_prime=max(c, 1.0), sup_ratio=sup_ratio, sup_at=sup_at)


# ======================================================================
# JSON wire format
# ======================================================================

def signature_to_json(tensor: TruncatedTensor, alpha: float = 1.0) -> str:
    """Serialise as ``{d, L, alpha, levels: [{k, coords}]}`` (row-major coords)."""
    doc = {
        "d": tensor.d,
        "L": tensor.depth,
        "alpha": alpha,
        "levels": [{"k": k, "coords": tensor.levels[k].tolist()}
                   for k in range(tensor.depth + 1)],
    }
    return json.dumps(doc, sort_keys=True)


def signature_from_json(text: str) -> Tuple[TruncatedTensor, float]:
    doc = json.loads(text)
    d = int(doc["d"])
    depth = int(doc["L"])
    levels = [np.zeros(d**k) for k in range(depth + 1)]
    for entry in doc["levels"]:
        k = int(entry["k"])
        coords = np.asarray(entry["coords"], dtype=float)
        if k > depth or coords.shape != (d**k,):
            raise PreconditionError("signature-json", f"level {k} malformed")
        levels[k] = coords
    return TruncatedTensor(d, levels), float(doc.get("alpha", 1.0))
