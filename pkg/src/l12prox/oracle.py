"""Brute-force reference checks for the l1-2 prox in dimensions 1 to 3.

The prox objective is evaluated on a uniform grid covering the box
``[-||z||_inf, ||z||_inf]^d``, which contains every minimizer (a minimizer
never exceeds ``|z_i|`` in any coordinate). The grid has an odd number of
points per axis, so it contains the origin and each 1-sparse candidate axis.

The grid is symmetric and flipping the sign of ``x_i`` to agree with ``z_i``
never increases the objective, so the minimum over the whole grid equals the
minimum over the grid points in the closed orthant of ``sign(z)``. Only those
are evaluated, which is exact and eight times cheaper in three dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .prox import phi_objective, prox_l12, prox_l12_numerical

__all__ = ["GridResult", "ProxCheckReport", "grid_minimum", "run_prox_checks"]


@dataclass(frozen=True)
class GridResult:
    value: float
    point: np.ndarray
    spacing: float
    lipschitz: float

    @property
    def resolution_gap(self) -> float:
        """Bound on ``min over grid - true minimum`` (Lipschitz constant times half-diagonal)."""
        d = self.point.size
        return self.lipschitz * self.spacing * np.sqrt(d) / 2.0


def grid_minimum(z, lam, points: int = 401, chunk: int = 8) -> GridResult:
    """Minimum of the prox objective over a ``points**d`` grid.

    For ``d = 3`` the grid is swept a few slices of the first axis at a time
    to bound memory.
    """
    z = np.asarray(z, dtype=float).ravel()
    d = z.size
    if not 1 <= d <= 3:
        raise ValueError("brute force supports 1 <= d <= 3")
    if points % 2 == 0:
        raise ValueError("points must be odd so the grid contains zero")
    B = float(np.max(np.abs(z)))
    if B == 0.0:
        B = 1.0
    full = np.linspace(-B, B, points)
    h = full[1] - full[0]
    half = np.abs(full[points // 2:])
    # coordinates in the orthant of sign(z); zero entries of z keep the + side
    axes = [half if zi >= 0 else -half for zi in z]
    # separable parts per axis: 0.5 (t - z_i)^2 + lam |t|, and t^2
    sep = [0.5 * (a - zi) ** 2 + lam * half for a, zi in zip(axes, z)]
    sq = half * half
    points = half.size
    if d == 1:
        vals = sep[0] - lam * half
        k = int(np.argmin(vals))
        best, arg = vals[k], (k,)
    elif d == 2:
        vals = sep[0][:, None] + sep[1][None, :] - lam * np.sqrt(sq[:, None] + sq[None, :])
        k = np.unravel_index(int(np.argmin(vals)), vals.shape)
        best, arg = vals[k], k
    else:
        s23 = sep[1][:, None] + sep[2][None, :]
        q23 = sq[:, None] + sq[None, :]
        best, arg = np.inf, None
        for start in range(0, points, chunk):
            sl = slice(start, min(start + chunk, points))
            vals = (sep[0][sl, None, None] + s23[None]
                    - lam * np.sqrt(sq[sl, None, None] + q23[None]))
            k = np.unravel_index(int(np.argmin(vals)), vals.shape)
            if vals[k] < best:
                best, arg = vals[k], (k[0] + start, k[1], k[2])
    point = np.array([a[k] for a, k in zip(axes, arg)])
    # |grad| <= ||x - z|| + lam (||sign x|| + 1) on the box
    lip = 2.0 * B * np.sqrt(d) + lam * (np.sqrt(d) + 1.0)
    return GridResult(float(best), point, float(h), float(lip))


@dataclass
class ProxCheckReport:
    trials: int = 0
    passed: int = 0
    failures: list = field(default_factory=list)

    @property
    def failed(self) -> int:
        return self.trials - self.passed


def run_prox_checks(trials: int, dims=(1, 2, 3), seed: int = 42, points: int = 401,
                    numerical_tol: float = 1e-12, agree_tol: float = 1e-7,
                    perturb: float = 0.0) -> ProxCheckReport:
    """Randomized closed-form prox checks against the grid and the DC iteration.

    Each trial draws ``d`` from ``dims``, ``z ~ N(0, I)`` and ``lam``
    log-uniform on ``[0.01, 3]``, then requires

    * ``phi(prox) <= min over grid + rounding slack`` (global optimality),
    * ``min over grid <= phi(prox) + resolution gap`` (the grid is fine enough
      to have caught a worse answer),
    * ``||prox - prox_numerical|| <= agree_tol``.

    ``perturb`` is added to every coordinate of the closed-form output before
    checking; it exists to confirm that the checks can fail.
    """
    rng = np.random.default_rng(seed)
    dims = tuple(dims)
    report = ProxCheckReport()
    for t in range(trials):
        d = int(dims[rng.integers(len(dims))])
        z = rng.standard_normal(d)
        lam = float(np.exp(rng.uniform(np.log(0.01), np.log(3.0))))
        x = prox_l12(z, lam) + perturb
        fx = phi_objective(x, z, lam)
        grid = grid_minimum(z, lam, points=points)
        slack = 1e-12 * (1.0 + abs(grid.value))
        xn = prox_l12_numerical(z, lam, max_iters=100000, tol=numerical_tol)
        gap = float(np.linalg.norm(x - xn))
        problems = []
        if fx > grid.value + slack:
            problems.append(f"phi(prox)={fx!r} above grid minimum {grid.value!r}")
        if grid.value > fx + grid.resolution_gap:
            problems.append("grid minimum implausibly high")
        if gap > agree_tol:
            problems.append(f"closed form and DC iteration differ by {gap:.3e}")
        report.trials += 1
        if problems:
            report.failures.append({"trial": t, "z": z.tolist(), "lam": lam, "problems": problems})
        else:
            report.passed += 1
    return report
