"""Small dense-matrix helpers: operator norms and the matrix exponential.

Everything here broadcasts over leading batch axes so the multiplicative
engine can evaluate whole dyadic levels in one call.
"""

from __future__ import annotations

import numpy as np

__all__ = ["operator_norm", "operator_norms", "expm"]

# beyond this size the exact SVD is replaced by power iteration
_SVD_DIM_LIMIT = 8
_POWER_TOL = 1e-12
_POWER_MAX_ITER = 500


def operator_norm(mat: np.ndarray) -> float:
    """Induced 2-norm (largest singular value) of a square matrix.

    Exact SVD for dimension <= 8, power iteration on ``M^T M`` to 1e-12
    relative change otherwise.
    """
    mat = np.asarray(mat, dtype=float)
    m = mat.shape[-1]
    if m <= _SVD_DIM_LIMIT:
        return float(np.linalg.norm(mat, 2))
    gram = mat.T @ mat
    v = np.ones(m) / np.sqrt(m)
    lam = 0.0
    for _ in range(_POWER_MAX_ITER):
        w = gram @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - lam) <= _POWER_TOL * max(nw, 1.0):
            lam = nw
            break
        lam = nw
    return float(np.sqrt(lam))


def operator_norms(stack: np.ndarray) -> np.ndarray:
    """Operator norms of a ``(..., m, m)`` stack of matrices."""
    stack = np.asarray(stack, dtype=float)
    m = stack.shape[-1]
    if m <= _SVD_DIM_LIMIT:
        return np.linalg.svd(stack, compute_uv=False)[..., 0]
    flat = stack.reshape(-1, m, m)
    return np.array([operator_norm(x) for x in flat]).reshape(stack.shape[:-2])


# Pade-13 coefficients and scaling threshold (the standard degree-13 choice)
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def expm(mat: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade(13,13) core.

    Accepts ``(..., m, m)`` stacks; the scaling power is chosen from the
    largest 1-norm in the stack so all slices run the same branch.
    """
    a = np.asarray(mat, dtype=float)
    if a.shape[-1] != a.shape[-2]:
        raise ValueError(f"square matrices required, got shape {a.shape}")
    m = a.shape[-1]
    eye = np.broadcast_to(np.eye(m), a.shape).copy()

    norm1 = float(np.max(np.sum(np.abs(a), axis=-2))) if a.size else 0.0
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA13))) if norm1 > _THETA13 else 0)
    a = a / (2.0**s)

    b = _PADE13
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
    )
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r
