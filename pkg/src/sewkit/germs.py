"""Concrete germs: Young integration and pathwise stochastic integration.

The Young germ ``mu(a,b) = x_a (y_b - y_a)`` sews to the Young integral of
``x`` against ``y`` whenever the Holder exponents satisfy
``alpha_x + alpha_y > 1``; its coherence defect factors exactly as
``-(x_c - x_a)(y_b - y_c)``.

The stochastic germ augments the first-order term with a gradient
correction against a precomputed second-order area table,

    mu(a,b) = f(X_a) dX + grad f(X_a) : area(a,b),

where ``area(a,b)`` holds grid sums of ``int_a^b (X_t - X_a) (x) dX_t``
under the Ito (left-point) or Stratonovich (midpoint) convention.  The
area's concatenation identity

    area(a,b) = area(a,c) + area(c,b) + (X_c - X_a) (x) (X_b - X_c)

holds exactly at grid points because it is an algebraic identity of the
grid sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .additive import AdditiveGerm, SewingResult, sew
from .control import ControlFunction, power_control
from .errors import PreconditionError
from .paths import SampledPath

__all__ = [
    "young_germ",
    "young_integral",
    "AreaTable",
    "build_area_table",
    "StochasticGerm",
    "stochastic_germ",
    "stochastic_integral",
    "scalar_field",
]


# ----------------------------------------------------------------------
# Young integration
# ----------------------------------------------------------------------

def young_germ(x: SampledPath, y: SampledPath, mode: str = "product",
               control: Optional[ControlFunction] = None) -> AdditiveGerm:
    """Germ ``x_a (y_b - y_a)`` with a control calibrated from Holder fits.

    ``mode="product"`` multiplies componentwise (a scalar ``x`` broadcasts
    against vector ``y`` increments); ``mode="outer"`` forms the outer
    product, flattened row-major.  Raises when the estimated exponents do
    not satisfy the Young condition ``alpha_x + alpha_y > 1``.
    """
    if mode not in ("product", "outer"):
        raise PreconditionError("young-mode", f"unknown mode {mode!r}")
    ax, ay = x.alpha_est, y.alpha_est
    if ax + ay <= 1.0:
        raise PreconditionError(
            "young-exponents",
            f"estimated alpha_x={ax:.3f} + alpha_y={ay:.3f} <= 1; Young condition fails",
        )
    if mode == "product" and not (x.dim == 1 or x.dim == y.dim):
        raise PreconditionError("young-dims", f"x dim {x.dim} incompatible with y dim {y.dim}")
    if control is None:
        control = power_control(ax + ay, scale=x.norm_est * y.norm_est)

    if mode == "product":
        shape = (y.dim,) if x.dim in (1, y.dim) else None

        def many(los, his):
            xa = x.value_at(los)
            dy = y.value_at(his) - y.value_at(los)
            return xa * dy if xa.shape == dy.shape else xa[:, :1] * dy
    else:
        shape = (x.dim * y.dim,)

        def many(los, his):
            xa = x.value_at(los)
            dy = y.value_at(his) - y.value_at(los)
            return (xa[:, :, None] * dy[:, None, :]).reshape(len(los), -1)

    def one(a, b):
        return many(np.array([a]), np.array([b]))[0]

    t_end = min(x.t_end, y.t_end)
    return AdditiveGerm(
        domain_end=np.nextafter(t_end, np.inf),
        evaluate=one,
        evaluate_many=many,
        control=control,
        value_shape=shape,
        label="young",
    )


def young_integral(x: SampledPath, y: SampledPath, a: float, b: float,
                   tol: float = 1e-9, mode: str = "product",
                   control: Optional[ControlFunction] = None,
                   full_result: bool = False):
    """Sewn limit of the Young germ: the integral of ``x`` against ``dy``.

    Agrees with the Riemann-Stieltjes integral for smooth paths.  Returns
    the value vector; pass ``full_result=True`` for the full
    :class:`~sewkit.additive.SewingResult` with error certificates.
    """
    germ = young_germ(x, y, mode=mode, control=control)
    result = sew(germ, a, b, tol=tol)
    return result if full_result else result.value


# ----------------------------------------------------------------------
# Area tables and the stochastic germ
# ----------------------------------------------------------------------

@dataclass
class AreaTable:
    """Cumulative second-order grid sums of a path, one convention each.

    Stores ``I(t_i) = sum_{j<i} X*_j (x) dX_j`` (``X*`` is the left or the
    midpoint value per convention) so any ``area(a, b)`` is two lookups:
    ``I(b) - I(a) - X_a (x) (X_b - X_a)``.
    """

    path: SampledPath
    convention: str
    cumulative: np.ndarray = field(repr=False)

    def area(self, a: float, b: float) -> np.ndarray:
        ia = self._cum_at(np.array([a]))[0]
        ib = self._cum_at(np.array([b]))[0]
        xa = self.path.value_at(a)
        xb = self.path.value_at(b)
        return ib - ia - np.outer(xa, xb - xa)

    def area_many(self, los: np.ndarray, his: np.ndarray) -> np.ndarray:
        ia = self._cum_at(los)
        ib = self._cum_at(his)
        xa = self.path.value_at(los)
        xb = self.path.value_at(his)
        return ib - ia - xa[:, :, None] * (xb - xa)[:, None, :]

    def _cum_at(self, ts: np.ndarray) -> np.ndarray:
        times = self.path.times
        idx = np.clip(np.searchsorted(times, ts, side="right") - 1, 0, len(times) - 2)
        w = np.clip((ts - times[idx]) / (times[idx + 1] - times[idx]), 0.0, 1.0)
        return (self.cumulative[idx] * (1.0 - w[:, None, None])
                + self.cumulative[idx + 1] * w[:, None, None])


def build_area_table(path: SampledPath, convention: str) -> AreaTable:
    """Grid realisation of ``int_a^b (X_t - X_a) (x) dX_t``.

    Left-point sums for ``"ito"``, midpoint sums for ``"stratonovich"``.
    Requires a uniform grid.  A single grid step has no interior points, so
    its Ito area is exactly zero; additivity across grid triples is exact.
    """
    if convention not in ("ito", "stratonovich"):
        raise PreconditionError("convention", f"unknown convention {convention!r}")
    path.grid_step()  # raises on non-uniform grids
    x = path.values
    dx = np.diff(x, axis=0)
    base = x[:-1] if convention == "ito" else 0.5 * (x[:-1] + x[1:])
    contrib = base[:, :, None] * dx[:, None, :]
    cumulative = np.concatenate(
        [np.zeros((1, path.dim, path.dim)), np.cumsum(contrib, axis=0)]
    )
    return AreaTable(path=path, convention=convention, cumulative=cumulative)


def scalar_field(f: Callable[[float], float], fprime: Callable[[float], float]):
    """Lift scalar ``f`` and ``f'`` to the tensor shapes of a 1-d stochastic germ."""
    def f_eval(xvec):
        return np.array([[f(float(xvec[0]))]])

    def df_eval(xvec):
        return np.array([[[fprime(float(xvec[0]))]]])

    return f_eval, df_eval


@dataclass
class StochasticGerm:
    """First-order germ of ``int f(X) dX`` over a sampled path.

    ``f_eval(x)`` maps a point of R^m to a ``(k, m)`` matrix (the integrand
    applied to increments) and ``df_eval(x)`` to a ``(k, m, m)`` gradient
    block contracted against the area.  The declared control ``V(t) =
    K t^{3/2}`` carries a coefficient fitted on sampled triples at
    construction.
    """

    path: SampledPath
    f_eval: Callable[[np.ndarray], np.ndarray]
    df_eval: Callable[[np.ndarray], np.ndarray]
    area: AreaTable
    convention: str
    control: ControlFunction
    out_dim: int

    def as_additive(self) -> AdditiveGerm:
        def one(a, b):
            xa = self.path.value_at(a)
            dx = self.path.value_at(b) - xa
            ar = self.area.area(a, b)
            return self.f_eval(xa) @ dx + np.tensordot(self.df_eval(xa), ar, 2)

        return AdditiveGerm(
            domain_end=np.nextafter(self.path.t_end, np.inf),
            evaluate=one,
            control=self.control,
            value_shape=(self.out_dim,),
            label=f"stochastic-{self.convention}",
        )


def stochastic_germ(path: SampledPath, f_eval, df_eval, convention: str,
                    area: Optional[AreaTable] = None,
                    fit_seed: int = 0, fit_triples: int = 100) -> StochasticGerm:
    """Assemble the germ; fits the 3/2-power control coefficient by sampling."""
    if area is None:
        area = build_area_table(path, convention)
    if area.convention != convention:
        raise PreconditionError(
            "convention-mismatch",
            f"area table is {area.convention!r}, germ wants {convention!r}",
        )
    probe = f_eval(path.value_at(path.t_start))
    out_dim = int(np.asarray(probe).shape[0])

    germ = StochasticGerm(path=path, f_eval=f_eval, df_eval=df_eval, area=area,
                          convention=convention,
                          control=power_control(1.5, scale=1.0), out_dim=out_dim)
    add = germ.as_additive()
    rng = np.random.Generator(np.random.PCG64(fit_seed))
    worst = 0.0
    for _ in range(fit_triples):
        a, c, b = np.sort(rng.uniform(path.t_start, path.t_end, size=3))
        if b - a < 4 * path.grid_step():
            continue
        defect = add.evaluate(a, b) - add.evaluate(a, c) - add.evaluate(c, b)
        worst = max(worst, float(np.linalg.norm(defect)) / (b - a) ** 1.5)
    germ.control = power_control(1.5, scale=max(worst * 1.25, 1e-12))
    return germ


def stochastic_integral(germ: StochasticGerm, a: float, b: float,
                        tol: float = 1e-9, full_result: bool = False):
    """Sewn value of the stochastic germ over ``[a, b]``.

    ``a`` and ``b`` must be grid-aligned so the dyadic refinement only ever
    reads exact grid data; refinement depth is capped at the grid resolution.
    For scalar paths under the Stratonovich convention with ``f = F'`` this
    reproduces ``F(X_b) - F(X_a)`` (the chain rule).
    """
    h = germ.path.grid_step()
    for t in (a, b):
        steps = (t - germ.path.t_start) / h
        if abs(steps - round(steps)) > 1e-9:
            raise PreconditionError("grid-alignment", f"{t} is not a grid point")
    span_steps = round((b - a) / h)
    max_level = max(1, int(np.floor(np.log2(span_steps)))) if span_steps >= 2 else 1
    result = sew(germ.as_additive(), a, b, tol=tol, max_level=max_level)
    return result if full_result else result.value
