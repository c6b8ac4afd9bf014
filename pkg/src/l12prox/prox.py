"""Proximal operators for the l1-2 penalty family.

All operators solve problems of the form::

    minimize    0.5 * ||x - z||^2 + lam * g(x)

for ``g`` one of

* ``||x||_1``                       (:func:`prox_l1`)
* ``||x||_1 - ||x||_2``             (:func:`prox_l12`, :func:`prox_l12_numerical`)
* ``||X||_* - ||X||_F``             (:func:`prox_nuc_minus_frob`)
* ``||X||_1 - ||X||_{2,1}`` (rows)  (:func:`prox_l1_minus_l21_rows`)

Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ThinSvd",
    "check_lambda",
    "l1_norm",
    "l12_norm",
    "l2_subgradient",
    "phi_objective",
    "prox_l1",
    "prox_l12",
    "prox_l12_numerical",
    "prox_l1_minus_l21_rows",
    "prox_nuc_minus_frob",
    "soft_threshold",
]


@dataclass(frozen=True)
class ThinSvd:
    """Thin SVD factors ``X = U @ diag(sigma) @ V.T``.

    ``U`` is m x k and ``V`` is n x k with orthonormal columns, ``sigma`` is
    nonnegative and sorted in nonincreasing order. ``k`` may be zero.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U.shape[0], self.V.shape[0])

    def to_dense(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T

    @classmethod
    def from_dense(cls, Z: np.ndarray) -> "ThinSvd":
        U, s, Vt = np.linalg.svd(np.asarray(Z, dtype=float), full_matrices=False)
        return cls(U, s, Vt.T)


def check_lambda(lam) -> float:
    """Validate a penalty weight and return it as a float."""
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValueError(f"penalty weight must be finite and nonnegative, got {lam!r}")
    return lam


def _as_finite(z, name="z") -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError(f"{name} contains non-finite entries")
    return z


def _norm2(w, axis=None):
    """Euclidean norm scaled by the largest magnitude so tiny or huge entries neither underflow nor overflow."""
    if axis is None and w.size == 0:
        return np.float64(0.0)
    s = np.max(np.abs(w), axis=axis, keepdims=True, initial=0.0)
    safe = np.where(s > 0, s, 1.0)
    n = s * np.sqrt(np.sum((w / safe) ** 2, axis=axis, keepdims=True))
    return n.reshape(()) if axis is None else np.squeeze(n, axis=axis)


def l1_norm(x) -> float:
    return float(np.sum(np.abs(x)))


def l12_norm(x) -> float:
    """``||x||_1 - ||x||_2`` of the flattened array (nonnegative up to rounding)."""
    x = np.asarray(x, dtype=float)
    return float(np.sum(np.abs(x)) - _norm2(x))


def soft_threshold(z, lam):
    """Elementwise ``sign(z) * max(|z| - lam, 0)`` without validation."""
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def prox_l1(z, lam) -> np.ndarray:
    """Soft thresholding, the prox of ``lam * ||.||_1``.

    Parameters
    ----------
    z : array_like
        Input point.
    lam : float
        Nonnegative threshold.

    Returns
    -------
    x : ndarray
        ``sign(z) * max(|z| - lam, 0)`` with the shape of ``z``.
    """
    z = _as_finite(z)
    lam = check_lambda(lam)
    return soft_threshold(z, lam)


def phi_objective(x, z, lam) -> float:
    """Prox objective ``0.5*||x - z||^2 + lam*(||x||_1 - ||x||_2)``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs z {z.shape}")
    lam = check_lambda(lam)
    r = x - z
    return float(0.5 * np.sum(r * r) + lam * l12_norm(x))


def prox_l12(z, lam) -> np.ndarray:
    """Closed-form prox of ``lam * (||x||_1 - ||x||_2)``.

    With ``w = soft_threshold(z, lam)``:

    * if ``w != 0`` the minimizer is ``(1 + lam / ||w||_2) * w``;
    * if ``w == 0`` only the largest-magnitude entry of ``z`` survives,
      unchanged. Ties go to the lowest (flat) index.

    The output is zero exactly when ``z`` is zero. Arrays of any shape are
    treated as flat vectors; the result has the shape of ``z``.

    Parameters
    ----------
    z : array_like
        Prox anchor point. Must be finite.
    lam : float
        Nonnegative penalty weight.

    Returns
    -------
    x : ndarray
        A global minimizer of :func:`phi_objective`.
    """
    z = _as_finite(z)
    lam = check_lambda(lam)
    w = soft_threshold(z, lam)
    nw = _norm2(w)
    if nw > 0:
        return (1.0 + lam / nw) * w
    x = np.zeros_like(z)
    if z.size:
        j = np.argmax(np.abs(z).ravel())
        x.flat[j] = z.flat[j]
    return x


def l2_subgradient(x, direction, first: bool = False) -> np.ndarray:
    """Element of the subdifferential of ``||.||_2`` at ``x``.

    Away from zero this is ``x / ||x||``. At ``x = 0`` any vector in the unit
    ball is valid: on the very first iteration we pick ``0``; at a later zero
    iterate we pick the signed unit vector on the largest-magnitude entry of
    ``direction`` (the descent direction), which moves the iteration off the
    spurious fixed point at the origin.
    """
    nx = _norm2(x)
    if nx > 0:
        return x / nx
    s = np.zeros_like(x)
    if first or x.size == 0:
        return s
    j = np.argmax(np.abs(direction).ravel())
    s.flat[j] = np.sign(direction.flat[j])
    return s


def prox_l12_numerical(z, lam, max_iters: int = 1000, tol: float = 1e-10,
                       x0=None, callback=None) -> np.ndarray:
    """Prox of the l1-2 penalty by DC iterations (baseline for the closed form).

    Iterates ``x_{t+1} = prox_l1(z + lam * s_t, lam)`` with ``s_t`` a
    subgradient of ``||x_t||_2`` (see :func:`l2_subgradient`), starting from
    ``x0`` (zero by default), until
    ``||x_{t+1} - x_t|| <= tol * max(1, ||x_t||)``. A first step taken from
    the origin is never counted as converged.

    Parameters
    ----------
    z : array_like
    lam : float
    max_iters : int
        Iteration budget, at least 1.
    tol : float
        Relative change threshold, positive.
    x0 : array_like, optional
        Warm start.
    callback : callable, optional
        Called as ``callback(x)`` with every new iterate.
    """
    z = _as_finite(z)
    lam = check_lambda(lam)
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = np.zeros_like(z) if x0 is None else _as_finite(x0, "x0").copy()
    for t in range(max_iters):
        nx = _norm2(x)
        s = l2_subgradient(x, z - x, first=(t == 0))
        x_new = soft_threshold(z + lam * s, lam)
        if callback is not None:
            callback(x_new)
        step = np.sqrt(np.sum((x_new - x) ** 2))
        # a step taken with the arbitrary s = 0 at the origin proves nothing
        done = step <= tol * max(1.0, nx) and not (t == 0 and nx == 0)
        x = x_new
        if done:
            break
    return x


def prox_nuc_minus_frob(svd_z: ThinSvd, lam) -> ThinSvd:
    """Prox of ``lam * (||X||_* - ||X||_F)`` given the SVD of the anchor.

    The singular vectors are kept and the singular values are mapped through
    :func:`prox_l12`. Directions whose new singular value is zero are dropped,
    so the result may have lower rank than the input. When the top singular
    value is repeated and every value falls below ``lam`` the minimizer is not
    unique; the first pair of the given factors is returned.

    Raises
    ------
    ValueError
        If ``sigma`` is negative or not sorted in nonincreasing order.
    """
    lam = check_lambda(lam)
    sigma = _as_finite(svd_z.sigma, "sigma")
    if np.any(sigma < 0):
        raise ValueError("singular values must be nonnegative")
    if np.any(np.diff(sigma) > 0):
        raise ValueError("singular values must be sorted in nonincreasing order")
    s = prox_l12(sigma, lam)
    keep = s > 0
    return ThinSvd(svd_z.U[:, keep], s[keep], svd_z.V[:, keep])


def prox_l1_minus_l21_rows(Z, lam) -> np.ndarray:
    """Row-wise prox of ``lam * (||X||_1 - ||X||_{2,1})`` for a d x 2 matrix.

    Each row is mapped independently through :func:`prox_l12`; this is the
    vectorized form of that loop and agrees with it bit for bit.
    """
    Z = _as_finite(Z, "Z")
    lam = check_lambda(lam)
    if Z.ndim != 2 or Z.shape[1] != 2:
        raise ValueError(f"expected a d x 2 matrix, got shape {Z.shape}")
    W = soft_threshold(Z, lam)
    nw = _norm2(W, axis=1)
    X = np.zeros_like(Z)
    live = nw > 0
    X[live] = (1.0 + lam / nw[live])[:, None] * W[live]
    dead = np.flatnonzero(~live)
    if dead.size:
        j = np.argmax(np.abs(Z[dead]), axis=1)
        X[dead, j] = Z[dead, j]
    return X
