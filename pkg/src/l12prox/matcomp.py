"""Low-rank matrix completion with the nuclear-minus-Frobenius penalty.

Solves::

    minimize  0.5 * sum_{(i,j) observed} (X_ij - O_ij)^2 + lam * (||X||_* - ||X||_F)

with nmAPG. Iterates are kept in factored form and the prox argument
``Y - grad`` is a sparse matrix (the gradient lives on the observed entries)
plus a low-rank one, so the partial SVD only ever touches the operator
through products costing ``O(nnz + k (m + n))``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .prox import ThinSvd, check_lambda, prox_nuc_minus_frob
from .solvers import DivergenceError, SolverConfig, SolverTrace, _Clock

__all__ = [
    "LowRankFactor",
    "ObservedMatrix",
    "SparsePlusLowRank",
    "ThinSvd",
    "default_lambda",
    "mc_objective",
    "partial_svd",
    "prox_nuc_minus_frob_partial",
    "read_observed_csv",
    "rmse_matrix",
    "solve_mc_nmapg",
    "splr_matvec",
    "splr_rmatvec",
    "synthetic_low_rank",
    "write_observed_csv",
]


@dataclass(frozen=True)
class ObservedMatrix:
    """Observed entries of an m x n matrix in coordinate form."""

    shape: tuple
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        m, n = self.shape
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise ValueError("rows, cols and values must be 1-d arrays of equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise ValueError("observation index out of range")
        if np.unique(rows * n + cols).size != rows.size:
            raise ValueError("duplicate observation")
        if not np.all(np.isfinite(values)):
            raise ValueError("observed values must be finite")
        object.__setattr__(self, "shape", (int(m), int(n)))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)

    @property
    def nnz(self) -> int:
        return self.values.size

    def to_sparse(self, values=None) -> sp.csr_matrix:
        vals = self.values if values is None else values
        return sp.csr_matrix((vals, (self.rows, self.cols)), shape=self.shape)

    def subset(self, idx) -> "ObservedMatrix":
        return ObservedMatrix(self.shape, self.rows[idx], self.cols[idx], self.values[idx])

    def split(self, holdout: float, rng) -> tuple:
        """Random ``(train, test)`` partition with ``holdout`` fraction in test."""
        perm = rng.permutation(self.nnz)
        n_test = int(round(holdout * self.nnz))
        test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        return self.subset(train), self.subset(test)


@dataclass(frozen=True)
class LowRankFactor:
    """``X = U @ V.T`` with ``U`` m x k and ``V`` n x k."""

    U: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    @property
    def shape(self) -> tuple:
        return (self.U.shape[0], self.V.shape[0])

    def to_dense(self) -> np.ndarray:
        return self.U @ self.V.T

    def entries(self, rows, cols) -> np.ndarray:
        return np.einsum("ij,ij->i", self.U[rows], self.V[cols])

    @classmethod
    def from_svd(cls, svd: ThinSvd) -> "LowRankFactor":
        return cls(svd.U * svd.sigma, svd.V)


class SparsePlusLowRank:
    """Implicit ``Z = S + U V'`` with ``S`` sparse; never materialized."""

    def __init__(self, S, low_rank: LowRankFactor):
        S = sp.csr_matrix(S)
        if S.shape != low_rank.shape:
            raise ValueError(f"shape mismatch: S {S.shape} vs low-rank {low_rank.shape}")
        self.S = S
        self.low_rank = low_rank
        self.St = S.T.tocsr()
        self.shape = S.shape
        self.dtype = np.dtype(float)

    def matvec(self, v):
        return splr_matvec(self, v)

    def rmatvec(self, u):
        return splr_rmatvec(self, u)

    def matmat(self, B):
        lr = self.low_rank
        return self.S @ B + lr.U @ (lr.V.T @ B)

    def rmatmat(self, B):
        lr = self.low_rank
        return self.St @ B + lr.V @ (lr.U.T @ B)

    def to_dense(self):
        return self.S.toarray() + self.low_rank.to_dense()

    def aslinearoperator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.matvec, rmatvec=self.rmatvec,
                              matmat=self.matmat, rmatmat=self.rmatmat, dtype=float)


def splr_matvec(Z: SparsePlusLowRank, v) -> np.ndarray:
    """``(S + U V') v`` in ``O(nnz(S) + k (m + n))``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (Z.shape[1],):
        raise ValueError(f"expected a vector of length {Z.shape[1]}, got shape {v.shape}")
    return Z.S @ v + Z.low_rank.U @ (Z.low_rank.V.T @ v)


def splr_rmatvec(Z: SparsePlusLowRank, u) -> np.ndarray:
    """``(S + U V')' u``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (Z.shape[0],):
        raise ValueError(f"expected a vector of length {Z.shape[0]}, got shape {u.shape}")
    return Z.St @ u + Z.low_rank.V @ (Z.low_rank.U.T @ u)


def _as_operator(op):
    if isinstance(op, SparsePlusLowRank):
        return op
    return aslinearoperator(op)


def _orthonormal(B):
    Q, _ = np.linalg.qr(B)
    return Q


def partial_svd(op, k: int, warm_start: Optional[ThinSvd] = None, tol: float = 1e-6,
                max_iters: int = 30, oversample: int = 2, seed: int = 0):
    """Top-``k`` singular triplets by block power (subspace) iteration.

    The block has ``k + oversample`` columns (capped at ``min(m, n)``) and is
    seeded with the right singular vectors of ``warm_start`` when given,
    padded with random columns from a fixed seed. After every sweep a
    Rayleigh-Ritz step extracts the triplets; iteration stops once
    ``||op v_i - sigma_i u_i|| <= tol * sigma_1`` for every retained ``i``.

    Parameters
    ----------
    op : ndarray, sparse matrix, LinearOperator or SparsePlusLowRank
    k : int
        Number of triplets wanted, at least 1.
    warm_start : ThinSvd, optional
    tol : float
    max_iters : int
    oversample : int
    seed : int

    Returns
    -------
    svd : ThinSvd
        Best available factors, ``min(k, m, n)`` triplets.
    converged : bool
        Whether the residual test passed within ``max_iters`` sweeps.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    A = _as_operator(op)
    m, n = A.shape
    kk = min(k, m, n)
    p = min(kk + oversample, m, n)
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n, p))
    if warm_start is not None and warm_start.rank:
        j = min(warm_start.rank, p)
        Q[:, :j] = warm_start.V[:, :j]
    Q = _orthonormal(Q)
    Y = A.matmat(Q)
    converged = False
    U = S = V = None
    for _ in range(max_iters):
        Uy = _orthonormal(Y)
        W = A.rmatmat(Uy)
        Ub, S, Vbt = np.linalg.svd(W.T, full_matrices=False)
        U, V = Uy @ Ub, Vbt.T
        Y = A.matmat(V)
        if S[0] == 0.0:
            converged = True
            break
        res = np.linalg.norm(Y[:, :kk] - U[:, :kk] * S[:kk], axis=0)
        if np.all(res <= tol * S[0]):
            converged = True
            break
    return ThinSvd(U[:, :kk], S[:kk], V[:, :kk]), converged


def prox_nuc_minus_frob_partial(op, lam, k: int = 8, warm_start: Optional[ThinSvd] = None,
                                **svd_kw):
    """Nuclear-minus-Frobenius prox of an implicit matrix via :func:`partial_svd`.

    ``k`` is doubled (reusing the current factors as warm start) until the
    smallest computed singular value is at most ``lam`` or the whole spectrum
    is in hand, so every direction the prox keeps is found.

    Returns
    -------
    svd : ThinSvd
        Factors of the prox output.
    converged : bool
    """
    lam = check_lambda(lam)
    m, n = _as_operator(op).shape
    kmax = min(m, n)
    k = min(max(k, 1), kmax)
    while True:
        svd, ok = partial_svd(op, k, warm_start=warm_start, **svd_kw)
        if svd.sigma[-1] <= lam or k >= kmax:
            return prox_nuc_minus_frob(svd, lam), ok
        warm_start = svd
        k = min(2 * k, kmax)


class MatrixCompletionLoss:
    """``0.5 * ||P_obs(X - O)||_F^2``; gradient ``P_obs(X - O)`` is sparse, L = 1."""

    lipschitz = 1.0

    def __init__(self, obs: ObservedMatrix):
        self.obs = obs

    def observed_entries(self, X) -> np.ndarray:
        if isinstance(X, ThinSvd):
            X = LowRankFactor.from_svd(X)
        if isinstance(X, LowRankFactor):
            if X.shape != self.obs.shape:
                raise ValueError("shape mismatch")
            return X.entries(self.obs.rows, self.obs.cols)
        X = np.asarray(X, dtype=float)
        if X.shape != self.obs.shape:
            raise ValueError("shape mismatch")
        return X[self.obs.rows, self.obs.cols]

    def value(self, X) -> float:
        r = self.observed_entries(X) - self.obs.values
        return 0.5 * float(r @ r)

    def gradient(self, X) -> sp.csr_matrix:
        return self.obs.to_sparse(self.observed_entries(X) - self.obs.values)


def mc_objective(obs: ObservedMatrix) -> MatrixCompletionLoss:
    """Smooth part of the completion objective on the observed set."""
    return MatrixCompletionLoss(obs)


def default_lambda(obs: ObservedMatrix) -> float:
    """``0.1 * max |observed value|``."""
    return 0.1 * float(np.max(np.abs(obs.values))) if obs.nnz else 0.0


def _fro_norm(A, B) -> float:
    """``||A B'||_F`` through thin QR factors; avoids forming the product."""
    if A.shape[1] == 0:
        return 0.0
    Ra = np.linalg.qr(A, mode="r")
    Rb = np.linalg.qr(B, mode="r")
    return float(np.linalg.norm(Ra @ Rb.T))


def _combine(terms):
    """Factor pair for ``sum_i c_i X_i`` from ``(c_i, LowRankFactor_i)``."""
    terms = [(c, X) for c, X in terms if c != 0.0 and X.rank]
    if not terms:
        return None
    U = np.hstack([c * X.U for c, X in terms])
    V = np.hstack([X.V for _, X in terms])
    return LowRankFactor(U, V)


def _penalty(svd: ThinSvd) -> float:
    s = svd.sigma
    return float(np.sum(s) - np.sqrt(np.sum(s * s)))


def solve_mc_nmapg(obs: ObservedMatrix, lam, k_max: int = 100,
                   cfg: Optional[SolverConfig] = None, k_init: int = 8,
                   svd_iters: int = 30, svd_tol: float = 1e-6):
    """nmAPG for matrix completion with the nuclear-minus-Frobenius penalty.

    The step size is 1 (the loss gradient is 1-Lipschitz). Each prox step
    runs :func:`partial_svd` on the sparse-plus-low-rank argument, warm
    started from the previous factors, with ``k`` singular triplets where
    ``k`` is the number of triplets the previous prox kept plus one probe
    direction, capped at ``k_max``. A partial SVD that fails to converge is
    retried once with a doubled block; a second failure is noted in
    ``trace.warnings``.

    Returns
    -------
    X : LowRankFactor
    trace : SolverTrace
        Columns ``accepted``, ``reference``, ``anchor_gap`` and
        ``candidate_objective`` as in
        :func:`l12prox.solvers.solve_nmapg`, plus ``rank`` of the iterate.
    """
    cfg = cfg or SolverConfig(max_iters=500, tol=1e-6)
    lam = check_lambda(lam)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    m, n = obs.shape
    loss = mc_objective(obs)
    trace, clock = SolverTrace(solver="mc-nmapg"), _Clock()
    o = obs.values
    empty = ThinSvd(np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0)))
    state = {"k": min(k_init, k_max, m, n), "warm": None}

    def prox_step(base: Optional[LowRankFactor], base_entries):
        # base - grad, where grad is sparse on the observed set
        resid = base_entries - o
        S = obs.to_sparse(-resid)
        low = base if base is not None else LowRankFactor(np.zeros((m, 0)), np.zeros((n, 0)))
        Z = SparsePlusLowRank(S, low)
        k = state["k"]
        svd, ok = partial_svd(Z, k, warm_start=state["warm"], tol=svd_tol, max_iters=svd_iters)
        if not ok:
            svd, ok = partial_svd(Z, k, warm_start=svd, tol=svd_tol, max_iters=svd_iters,
                                  oversample=max(2, 2 * k))
            if not ok:
                trace.warnings.append(f"iteration {len(trace.iteration)}: partial SVD "
                                      f"did not reach tol {svd_tol}")
        out = prox_nuc_minus_frob(svd, lam)
        state["warm"] = svd
        state["k"] = max(1, min(out.rank + 1, k_max, m, n))
        return out

    def evaluate(svd: ThinSvd):
        lr = LowRankFactor.from_svd(svd)
        e = lr.entries(obs.rows, obs.cols)
        r = e - o
        F = 0.5 * float(r @ r) + lam * _penalty(svd)
        if not np.isfinite(F):
            raise DivergenceError("objective is not finite")
        return lr, e, F

    x_svd = z_svd = empty
    x_lr, ex, Fx = evaluate(x_svd)
    xp_lr, exp_ = x_lr, ex
    z_lr, ez = x_lr, ex
    a_prev, a = 0.0, 1.0
    c, q = Fx, 1.0
    trace.record(0, clock.now(), Fx, 0.0, rank=0)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        b1, b2 = a_prev / a, (a_prev - 1.0) / a
        if z_lr is x_lr:
            terms = [(1.0 + b2, x_lr), (-b2, xp_lr)]
            ey = (1.0 + b2) * ex - b2 * exp_
        else:
            terms = [(1.0 - b1 + b2, x_lr), (b1, z_lr), (-b2, xp_lr)]
            ey = (1.0 - b1 + b2) * ex + b1 * ez - b2 * exp_
        y_lr = _combine(terms)
        z_svd = prox_step(y_lr, ey)
        z_lr, ez, Fz = evaluate(z_svd)
        if y_lr is None:
            gap = float(np.sum(z_svd.sigma ** 2))
        else:
            gap = _fro_norm(np.hstack([z_lr.U, -y_lr.U]), np.hstack([z_lr.V, y_lr.V])) ** 2
        accepted = Fz <= c - cfg.delta * gap
        if accepted:
            new = (z_svd, z_lr, ez, Fz)
        else:
            v_svd = prox_step(x_lr if x_lr.rank else None, ex)
            v_lr, ev, Fv = evaluate(v_svd)
            new = (z_svd, z_lr, ez, Fz) if Fz <= Fv else (v_svd, v_lr, ev, Fv)
        c_used = c
        a_prev, a = a, 0.5 * (np.sqrt(4.0 * a * a + 1.0) + 1.0)
        q_new = cfg.eta * q + 1.0
        c = (cfg.eta * q * c + new[3]) / q_new
        q = q_new
        change = _fro_norm(np.hstack([new[1].U, -x_lr.U]), np.hstack([new[1].V, x_lr.V]))
        size = _fro_norm(x_lr.U, x_lr.V)
        xp_lr, exp_ = x_lr, ex
        x_svd, x_lr, ex, Fx = new
        if accepted:
            z_lr = x_lr
        if cfg.record_trace:
            trace.record(it, clock.now(), Fx, 0.0, accepted=bool(accepted),
                         reference=c_used, anchor_gap=gap, candidate_objective=Fz,
                         rank=x_svd.rank)
        if change <= cfg.tol * max(1.0, size):
            trace.converged = True
            break
    if trace.iteration[-1] != it:
        trace.record(it, clock.now(), Fx, 0.0, rank=x_svd.rank)
    return x_lr, trace


def rmse_matrix(X, O_full) -> float:
    """``sqrt(||X - O||_F^2 / (m n))``."""
    O_full = np.asarray(O_full, dtype=float)
    if isinstance(X, ThinSvd):
        X = X.to_dense()
    elif isinstance(X, LowRankFactor):
        X = X.to_dense()
    X = np.asarray(X, dtype=float)
    if X.shape != O_full.shape:
        raise ValueError(f"shape mismatch: {X.shape} vs {O_full.shape}")
    D = X - O_full
    return float(np.sqrt(np.sum(D * D) / D.size))


def synthetic_low_rank(m: int, n: int, rank: int, frac: float, noise: float, rng):
    """Random rank-``rank`` matrix with unit-variance entries and noisy samples.

    Returns ``(O, obs)``: the clean m x n matrix and ``round(frac m n)``
    entries chosen without replacement, each observed with additive
    ``N(0, noise^2)`` error.
    """
    if not 0 < frac <= 1:
        raise ValueError("frac must lie in (0, 1]")
    U = rng.standard_normal((m, rank))
    V = rng.standard_normal((n, rank))
    O = U @ V.T / np.sqrt(rank)
    n_obs = int(round(frac * m * n))
    flat = np.sort(rng.choice(m * n, size=n_obs, replace=False))
    rows, cols = np.divmod(flat, n)
    vals = O[rows, cols] + noise * rng.standard_normal(n_obs)
    return O, ObservedMatrix((m, n), rows, cols, vals)


def write_observed_csv(path, obs: ObservedMatrix):
    """Write ``m,n`` / sizes header lines then one ``row,col,value`` line per entry (0-based)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "n"])
        w.writerow(list(obs.shape))
        for i, j, v in zip(obs.rows, obs.cols, obs.values):
            w.writerow([int(i), int(j), repr(float(v))])


def read_observed_csv(path) -> ObservedMatrix:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        head = next(r)
        if [h.strip() for h in head] != ["m", "n"]:
            raise ValueError(f"{path}: first line must be 'm,n'")
        m, n = (int(v) for v in next(r))
        data = [row for row in r if row]
    if data:
        arr = np.array(data, dtype=float)
        rows, cols, vals = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2]
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    return ObservedMatrix((m, n), rows, cols, vals)
