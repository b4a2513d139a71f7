"""Integral products ``prod (I + dA_t)`` and the Trotter splitting table.

For a Holder matrix path ``A_t`` with exponent above 1/2, the germs
``I + (A_b - A_a)`` and ``exp(A_b - A_a)`` both sew multiplicatively to the
same limit ``u(a, b)``, and ``H_t = u(0, t)`` solves the linear integral
equation ``H = I + int H dA``: the residual ``H_b - H_a - H_a (A_b - A_a)``
decays like ``(b - a)**(2 alpha)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .control import ControlFunction, power_control
from .errors import PreconditionError
from .matops import expm, operator_norm
from .multiplicative import MatrixOps, MultiplicativeGerm, sew_mul

__all__ = [
    "MatrixPath",
    "product_germ",
    "pair_product_germ",
    "product_integral",
    "ode_solution",
    "ode_residual",
    "TrotterStep",
    "trotter_limit",
]


@dataclass
class MatrixPath:
    """Matrix-valued path ``t -> A_t`` with Holder metadata.

    Built either from a closed-form evaluator (vectorised over a time array,
    returning ``(n, m, m)``) or from samples with linear interpolation.
    """

    dim: int
    domain_end: float
    evaluate: Callable[[np.ndarray], np.ndarray]
    alpha: float = 1.0
    holder_norm: float = 1.0
    label: str = field(default="", compare=False)

    def increment(self, a: float, b: float) -> np.ndarray:
        vals = self.evaluate(np.array([a, b]))
        return vals[1] - vals[0]

    def increments(self, los: np.ndarray, his: np.ndarray) -> np.ndarray:
        return self.evaluate(his) - self.evaluate(los)

    @classmethod
    def from_function(cls, fn: Callable[[float], np.ndarray], dim: int,
                      domain_end: float = 1.0, alpha: Optional[float] = None,
                      calib_points: int = 257) -> "MatrixPath":
        """Wrap a scalar-time evaluator; Holder data fitted on a dyadic probe."""
        def many(ts):
            return np.stack([np.asarray(fn(float(t)), dtype=float) for t in ts])

        path = cls(dim=dim, domain_end=domain_end, evaluate=many)
        a_fit, n_fit = _fit_holder(path, calib_points)
        path.alpha = alpha if alpha is not None else a_fit
        path.holder_norm = n_fit
        return path

    @classmethod
    def linear(cls, mat: np.ndarray, domain_end: float = 1.0) -> "MatrixPath":
        """``A_t = t * A``, exponent 1."""
        mat = np.asarray(mat, dtype=float)

        def many(ts):
            return ts[:, None, None] * mat

        return cls(dim=mat.shape[0], domain_end=domain_end, evaluate=many,
                   alpha=1.0, holder_norm=operator_norm(mat), label="linear")


def _fit_holder(path: MatrixPath, n_points: int):
    ts = np.linspace(0.0, path.domain_end * (1 - 1e-9), n_points)
    vals = path.evaluate(ts)
    lags = [2**j for j in range(int(np.log2(n_points - 1)))]
    sizes, incs = [], []
    for lag in lags:
        diffs = vals[lag:] - vals[:-lag]
        m = float(np.max(np.sqrt(np.sum(diffs**2, axis=(1, 2)))))
        if m > 0:
            sizes.append(lag * (ts[-1] - ts[0]) / (n_points - 1))
            incs.append(m)
    if not incs:
        return 1.0, 0.0
    slope, _ = np.polyfit(np.log(sizes), np.log(incs), 1)
    alpha = float(np.clip(slope, 1e-3, 1.0))
    norm = float(np.max(np.array(incs) / np.array(sizes) ** alpha))
    return alpha, norm


def product_germ(path: MatrixPath, form: str = "plus",
                 control: Optional[ControlFunction] = None) -> MultiplicativeGerm:
    """Multiplicative germ ``I + A_ab`` (``form="plus"``) or ``exp(A_ab)``.

    The coherence defect of the plus form is exactly ``-A_ac A_cb``, so the
    control is the squared Holder bound ``|A|_alpha**2 t**(2 alpha)``; the
    exp form carries an extra growth factor in its coefficient.
    """
    if form not in ("plus", "exp"):
        raise PreconditionError("germ-form", f"unknown form {form!r}")
    if path.alpha <= 0.5:
        raise PreconditionError(
            "product-alpha", f"need alpha > 1/2 for the product integral, got {path.alpha:.3f}"
        )
    if control is None:
        coeff = path.holder_norm**2
        if form == "exp":
            coeff *= float(np.exp(2.0 * path.holder_norm * path.domain_end**path.alpha))
        control = power_control(2.0 * path.alpha, scale=coeff)

    eye = np.eye(path.dim)
    if form == "plus":
        def many(los, his):
            return eye + path.increments(los, his)
    else:
        def many(los, his):
            return expm(path.increments(los, his))

    def one(a, b):
        return many(np.array([a]), np.array([b]))[0]

    return MultiplicativeGerm(
        domain_end=path.domain_end,
        evaluate=one,
        evaluate_many=many,
        control=control,
        ops=MatrixOps(path.dim),
        label=f"prodint-{form}",
    )


def pair_product_germ(path_a: MatrixPath, path_b: MatrixPath,
                      control: Optional[ControlFunction] = None) -> MultiplicativeGerm:
    """Split germ ``[I + A_ab][I + B_ab]`` whose limit interleaves both paths.

    Sews to ``prod (I + dA + dB)``; with linear paths this is the germ behind
    the Trotter formula.
    """
    if path_a.dim != path_b.dim:
        raise PreconditionError("dims", f"{path_a.dim} != {path_b.dim}")
    alpha = min(path_a.alpha, path_b.alpha)
    if alpha <= 0.5:
        raise PreconditionError("product-alpha", f"need alpha > 1/2, got {alpha:.3f}")
    if control is None:
        coeff = (path_a.holder_norm + path_b.holder_norm + 1.0) ** 2
        control = power_control(2.0 * alpha, scale=coeff)
    eye = np.eye(path_a.dim)

    def many(los, his):
        return (eye + path_a.increments(los, his)) @ (eye + path_b.increments(los, his))

    def one(a, b):
        return many(np.array([a]), np.array([b]))[0]

    return MultiplicativeGerm(
        domain_end=min(path_a.domain_end, path_b.domain_end),
        evaluate=one,
        evaluate_many=many,
        control=control,
        ops=MatrixOps(path_a.dim),
        label="trotter-pair",
    )


def product_integral(path: MatrixPath, a: float, b: float, tol: float = 1e-10,
                     germ_form: str = "plus", full_result: bool = False):
    """``prod_a^b (I + dA_t)`` by multiplicative sewing.

    Both germ forms converge to the same matrix (within solver tolerance);
    the choice is a matter of taste and conditioning.
    """
    germ = product_germ(path, form=germ_form)
    result = sew_mul(germ, a, b, tol=tol)
    return result if full_result else result.value


def ode_solution(path: MatrixPath, t: float, tol: float = 1e-10,
                 full_result: bool = False):
    """``H_t = prod_0^t (I + dA_s)``, the solution of ``H = I + int H dA``."""
    return product_integral(path, 0.0, t, tol=tol, full_result=full_result)


def ode_residual(path: MatrixPath, a: float, b: float, tol: float = 1e-12) -> float:
    """``|H_b - H_a - H_a A_ab|`` -- the first-order integral-equation defect.

    Decays like ``(b - a)**(2 alpha)`` since it equals
    ``|H_a [u(a,b) - I - A_ab]|``.
    """
    h_a = ode_solution(path, a, tol=tol)
    u_ab = product_integral(path, a, b, tol=tol)
    h_b = h_a @ u_ab
    return operator_norm(h_b - h_a - h_a @ path.increment(a, b))


@dataclass
class TrotterStep:
    n: int
    value: np.ndarray
    distance: float


def trotter_limit(mat_a: np.ndarray, mat_b: np.ndarray, n_max: int) -> List[TrotterStep]:
    """Splitting table ``P_n = (e^{A/2^n} e^{B/2^n})^{2^n}`` for ``n = 1..n_max``.

    Reports the operator-norm distance of each ``P_n`` to ``exp(A + B)``;
    the distances decay at first order in the step, i.e. halve per level.
    All ``2^n`` factors at a fixed level are equal, so the ordered product
    collapses to ``n`` repeated squarings (valid only for constant factors).
    """
    mat_a = np.asarray(mat_a, dtype=float)
    mat_b = np.asarray(mat_b, dtype=float)
    if mat_a.shape != mat_b.shape or mat_a.shape[0] != mat_a.shape[1]:
        raise PreconditionError("dims", f"incompatible shapes {mat_a.shape}, {mat_b.shape}")
    target = expm(mat_a + mat_b)
    steps = []
    for n in range(1, n_max + 1):
        scale = 2.0**n
        p = expm(mat_a / scale) @ expm(mat_b / scale)
        for _ in range(n):
            p = p @ p
        steps.append(TrotterStep(n=n, value=p, distance=operator_norm(p - target)))
    return steps
