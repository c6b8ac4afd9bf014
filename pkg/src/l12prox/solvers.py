"""First-order solvers for ``min_x f(x) + lam * g(x)``.

``f`` is smooth with an L-Lipschitz gradient (:class:`SmoothObjective`) and
``g`` is a :class:`Penalty`, i.e. a value function plus a prox operator. Step
sizes are fixed at ``1/L``; there is no line search.

Solvers
-------
solve_pg     plain proximal gradient
solve_fista  accelerated proximal gradient (convex ``g``)
solve_nmapg  nonmonotone accelerated proximal gradient (nonconvex ``g``)
solve_dca    DC programming for the l1-2 penalty, FISTA inner solver
solve_scp    sequential convex programming for the l1-2 penalty

Every solver returns ``(x, trace)`` with a :class:`SolverTrace`.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import aslinearoperator

from .prox import (
    check_lambda,
    l1_norm,
    l12_norm,
    l2_subgradient,
    prox_l1,
    prox_l12,
    prox_l12_numerical,
    soft_threshold,
)

__all__ = [
    "DivergenceError",
    "L1",
    "L12",
    "NO_PENALTY",
    "Penalty",
    "SmoothObjective",
    "SolverConfig",
    "SolverTrace",
    "estimate_lipschitz",
    "l12_numerical_penalty",
    "quadratic_objective",
    "solve_dca",
    "solve_fista",
    "solve_nmapg",
    "solve_pg",
    "solve_scp",
]


class DivergenceError(ArithmeticError):
    """Raised when an iterate or objective value stops being finite."""


@dataclass(frozen=True)
class SmoothObjective:
    """Smooth loss: value, gradient and a Lipschitz constant of the gradient.

    Losses of the form ``h(A x)`` may also supply ``forward`` (``x -> A x``)
    together with ``value_from`` and ``gradient_from``, which take ``A x``
    instead of ``x``. Solvers that need objective values at extrapolated
    points then carry ``A x`` along linearly and save one product per
    iteration.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    forward: Optional[Callable[[np.ndarray], np.ndarray]] = None
    value_from: Optional[Callable[[np.ndarray], float]] = None
    gradient_from: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if not (np.isfinite(self.lipschitz) and self.lipschitz > 0):
            raise ValueError(f"lipschitz must be positive and finite, got {self.lipschitz!r}")


@dataclass(frozen=True)
class Penalty:
    """Regularizer ``g`` given by its value and ``prox(v, t) = argmin 0.5||x-v||^2 + t g(x)``."""

    name: str
    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]


L1 = Penalty("l1", l1_norm, prox_l1)
L12 = Penalty("l1-2", l12_norm, prox_l12)
NO_PENALTY = Penalty("none", lambda x: 0.0, lambda v, t: np.array(v, dtype=float))


def l12_numerical_penalty(tol: float = 1e-10, max_iters: int = 1000,
                          warm_start: bool = False) -> Penalty:
    """l1-2 penalty whose prox runs DC iterations instead of the closed form.

    By default every prox call starts the DC iteration from zero. With
    ``warm_start`` each call starts from the previous output instead; the
    returned object then carries that state, so build a fresh one per run.
    """
    last = {}

    def prox(v, t):
        x0 = last.get("x") if warm_start else None
        if x0 is not None and x0.shape != np.shape(v):
            x0 = None
        x = prox_l12_numerical(v, t, max_iters=max_iters, tol=tol, x0=x0)
        last["x"] = x
        return x

    return Penalty("l1-2-numerical", l12_norm, prox)


def quadratic_objective(H, b) -> SmoothObjective:
    """``f(x) = 0.5 x'Hx - b'x`` for symmetric positive semidefinite ``H``."""
    H = np.asarray(H, dtype=float)
    b = np.asarray(b, dtype=float)
    L = float(np.linalg.eigvalsh(H)[-1])
    return SmoothObjective(
        value=lambda x: float(0.5 * x @ (H @ x) - b @ x),
        gradient=lambda x: H @ x - b,
        lipschitz=L if L > 0 else 1.0,
    )


@dataclass
class SolverConfig:
    """Stopping rule and algorithm constants shared by all solvers.

    Iteration stops once ``||x_{t+1} - x_t|| <= tol * max(1, ||x_t||)`` or
    after ``max_iters`` iterations. ``eta`` and ``delta`` are the nmAPG
    averaging weight and sufficient-decrease margin; ``inner_*`` configure the
    FISTA subproblem solver inside DCA.
    """

    max_iters: int = 10000
    tol: float = 1e-8
    record_trace: bool = True
    eta: float = 0.8
    delta: float = 1e-4
    inner_tol: float = 1e-6
    inner_max_iters: int = 2000

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass
class SolverTrace:
    """Per-iteration record of a solver run.

    Row 0 describes the starting point. ``seconds`` is wall time since the
    solver started (monotonic clock) and includes every objective evaluation;
    ``reporting_seconds`` is the part of it spent on evaluations the algorithm
    itself does not need, so benchmarks can subtract it.
    """

    solver: str = ""
    iteration: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    reporting_seconds: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
    converged: bool = False
    warnings: list = field(default_factory=list)

    def record(self, it, seconds, objective, reporting=0.0, **diag):
        self.iteration.append(int(it))
        self.seconds.append(float(seconds))
        self.objective.append(float(objective))
        self.reporting_seconds.append(float(reporting))
        for key, val in diag.items():
            self.info.setdefault(key, [None] * (len(self.iteration) - 1)).append(val)
        for key, col in self.info.items():
            if len(col) < len(self.iteration):
                col.append(None)

    @property
    def n_iters(self) -> int:
        return self.iteration[-1] if self.iteration else 0

    @property
    def final_objective(self) -> float:
        return self.objective[-1] if self.objective else float("nan")

    @property
    def elapsed(self) -> float:
        return self.seconds[-1] if self.seconds else 0.0

    def rows(self):
        keys = list(self.info)
        for i in range(len(self.iteration)):
            row = {
                "iter": self.iteration[i],
                "seconds": self.seconds[i],
                "objective": self.objective[i],
                "reporting_seconds": self.reporting_seconds[i],
            }
            for k in keys:
                row[k] = self.info[k][i]
            yield row

    def write_csv(self, path):
        fields = ["iter", "seconds", "objective", "reporting_seconds", *self.info]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


class _Clock:
    def __init__(self):
        self.start = time.perf_counter()
        self.reporting = 0.0

    def now(self):
        return time.perf_counter() - self.start


def _norm(x):
    return float(np.sqrt(np.sum(x * x)))


def _objective(f, penalty, lam, x):
    F = f.value(x) + lam * penalty.value(x)
    if not np.isfinite(F):
        raise DivergenceError("objective is not finite")
    return F


def _stalled(x_new, x, tol, first=False):
    nx = _norm(x)
    if first and nx == 0.0:
        # the subgradient chosen at the origin on step one is arbitrary
        return False
    return _norm(x_new - x) <= tol * max(1.0, nx)


def _report(trace, clock, f, penalty, lam, it, x, cfg, **diag):
    if not cfg.record_trace:
        return
    t0 = time.perf_counter()
    F = _objective(f, penalty, lam, x)
    clock.reporting += time.perf_counter() - t0
    trace.record(it, clock.now(), F, clock.reporting, **diag)


def _finish(trace, clock, f, penalty, lam, it, x, cfg):
    # always leave the final iterate in the trace, even with record_trace off
    if not trace.iteration or trace.iteration[-1] != it:
        trace.record(it, clock.now(), _objective(f, penalty, lam, x), clock.reporting)


def _start(x0, name):
    x = np.array(x0, dtype=float, copy=True)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 contains non-finite entries")
    return x, SolverTrace(solver=name), _Clock()


def solve_pg(f: SmoothObjective, penalty: Penalty, lam, x0,
             cfg: Optional[SolverConfig] = None):
    """Proximal gradient: ``x_{t+1} = prox_{(lam/L) g}(x_t - grad f(x_t) / L)``.

    Returns
    -------
    x : ndarray
        Final iterate.
    trace : SolverTrace
    """
    cfg = cfg or SolverConfig()
    lam = check_lambda(lam)
    x, trace, clock = _start(x0, "pg")
    L = f.lipschitz
    _report(trace, clock, f, penalty, lam, 0, x, cfg)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        x_new = penalty.prox(x - f.gradient(x) / L, lam / L)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"non-finite iterate at iteration {it}")
        stop = _stalled(x_new, x, cfg.tol)
        x = x_new
        _report(trace, clock, f, penalty, lam, it, x, cfg)
        if stop:
            trace.converged = True
            break
    _finish(trace, clock, f, penalty, lam, it, x, cfg)
    return x, trace


def solve_fista(f: SmoothObjective, penalty: Penalty, lam, x0,
                cfg: Optional[SolverConfig] = None):
    """FISTA with momentum ``(alpha_{t-1} - 1) / alpha_t``.

    ``alpha_0 = alpha_1 = 1`` so the first step is a plain proximal gradient
    step; afterwards ``alpha_{t+1} = (sqrt(4 alpha_t^2 + 1) + 1) / 2``.
    Intended for convex ``g``.
    """
    cfg = cfg or SolverConfig()
    lam = check_lambda(lam)
    x, trace, clock = _start(x0, "fista")
    L = f.lipschitz
    x_prev = x
    a_prev = a = 1.0
    _report(trace, clock, f, penalty, lam, 0, x, cfg)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        y = x + ((a_prev - 1.0) / a) * (x - x_prev)
        x_new = penalty.prox(y - f.gradient(y) / L, lam / L)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"non-finite iterate at iteration {it}")
        a_prev, a = a, 0.5 * (np.sqrt(4.0 * a * a + 1.0) + 1.0)
        stop = _stalled(x_new, x, cfg.tol)
        x_prev, x = x, x_new
        _report(trace, clock, f, penalty, lam, it, x, cfg)
        if stop:
            trace.converged = True
            break
    _finish(trace, clock, f, penalty, lam, it, x, cfg)
    return x, trace


def solve_nmapg(f: SmoothObjective, penalty: Penalty, lam, x0,
                cfg: Optional[SolverConfig] = None):
    """Nonmonotone accelerated proximal gradient (nmAPG) with step ``1/L``.

    Each iteration extrapolates::

        y = x_t + (a_{t-1}/a_t)(z_t - x_t) + ((a_{t-1} - 1)/a_t)(x_t - x_{t-1})

    takes a prox-gradient step from ``y`` to get the candidate ``z_{t+1}``,
    and accepts it when ``F(z) <= c_t - delta ||z - y||^2``. Otherwise a
    safeguard step ``v`` from ``x_t`` is computed and the better of ``z`` and
    ``v`` is kept. The reference value is a running weighted average,
    ``q_{t+1} = eta q_t + 1``, ``c_{t+1} = (eta q_t c_t + F(x_{t+1})) / q_{t+1}``.

    The trace records, per iteration, ``accepted`` (candidate passed the
    test), ``reference`` (the ``c_t`` it was tested against),
    ``anchor_gap`` (``||z - y||^2``) and ``candidate_objective`` (``F(z)``).
    """
    cfg = cfg or SolverConfig()
    lam = check_lambda(lam)
    x, trace, clock = _start(x0, "nmapg")
    L = f.lipschitz
    t_lam = lam / L
    tracked = f.forward is not None
    if tracked:
        image, fval, fgrad = f.forward, f.value_from, f.gradient_from
    else:
        image, fval, fgrad = (lambda u: u), f.value, f.gradient

    def objective(u, x):
        F = fval(u) + lam * penalty.value(x)
        if not np.isfinite(F):
            raise DivergenceError("objective is not finite")
        return F

    x_prev = z = x
    ux = ux_prev = uz = image(x)
    a_prev, a = 0.0, 1.0
    Fx = objective(ux, x)
    c, q = Fx, 1.0
    trace.record(0, clock.now(), Fx, 0.0)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        b1, b2 = a_prev / a, (a_prev - 1.0) / a
        y = x + b1 * (z - x) + b2 * (x - x_prev)
        uy = ux + b1 * (uz - ux) + b2 * (ux - ux_prev) if tracked else y
        z = penalty.prox(y - fgrad(uy) / L, t_lam)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"non-finite iterate at iteration {it}")
        uz = image(z)
        Fz = objective(uz, z)
        gap = float(np.sum((z - y) ** 2))
        accepted = Fz <= c - cfg.delta * gap
        if accepted:
            x_new, ux_new, F_new = z, uz, Fz
        else:
            v = penalty.prox(x - fgrad(ux) / L, t_lam)
            uv = image(v)
            Fv = objective(uv, v)
            x_new, ux_new, F_new = (z, uz, Fz) if Fz <= Fv else (v, uv, Fv)
        c_used = c
        a_prev, a = a, 0.5 * (np.sqrt(4.0 * a * a + 1.0) + 1.0)
        q_new = cfg.eta * q + 1.0
        c = (cfg.eta * q * c + F_new) / q_new
        q = q_new
        stop = _stalled(x_new, x, cfg.tol)
        x_prev, x = x, x_new
        ux_prev, ux = ux, ux_new
        if cfg.record_trace:
            trace.record(it, clock.now(), F_new, 0.0, accepted=bool(accepted),
                         reference=c_used, anchor_gap=gap, candidate_objective=Fz)
        if stop:
            trace.converged = True
            break
    if not trace.iteration or trace.iteration[-1] != it:
        trace.record(it, clock.now(), F_new, 0.0)
    return x, trace


def solve_scp(f: SmoothObjective, lam, x0, cfg: Optional[SolverConfig] = None):
    """Sequential convex programming for ``f + lam (||x||_1 - ||x||_2)``.

    ``x_{t+1} = prox_l1(x_t + (lam/L) s_t - grad f(x_t)/L, lam/L)`` with
    ``s_t`` a subgradient of ``||x_t||_2``; ``s_1 = 0`` when starting at the
    origin (see :func:`l12prox.prox.l2_subgradient`).
    """
    cfg = cfg or SolverConfig()
    lam = check_lambda(lam)
    x, trace, clock = _start(x0, "scp")
    L = f.lipschitz
    _report(trace, clock, f, L12, lam, 0, x, cfg)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = f.gradient(x)
        s = l2_subgradient(x, -g, first=(it == 1))
        x_new = soft_threshold(x + (lam / L) * s - g / L, lam / L)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"non-finite iterate at iteration {it}")
        stop = _stalled(x_new, x, cfg.tol, first=(it == 1))
        x = x_new
        _report(trace, clock, f, L12, lam, it, x, cfg)
        if stop:
            trace.converged = True
            break
    _finish(trace, clock, f, L12, lam, it, x, cfg)
    return x, trace


def solve_dca(f: SmoothObjective, lam, x0, cfg: Optional[SolverConfig] = None):
    """DC algorithm for ``f + lam (||x||_1 - ||x||_2)``.

    Each outer step linearizes ``-||x||_2`` at ``x_t`` and solves
    ``min f(x) - lam s_t'x + lam ||x||_1`` with FISTA, warm-started at
    ``x_t``, to ``cfg.inner_tol`` within ``cfg.inner_max_iters`` iterations.
    An inner solve that runs out of budget is noted in ``trace.warnings`` and
    its last iterate is used. Trace times include the inner solves; the
    ``inner_iters`` column counts FISTA iterations per outer step.
    """
    cfg = cfg or SolverConfig()
    lam = check_lambda(lam)
    x, trace, clock = _start(x0, "dca")
    inner_cfg = SolverConfig(max_iters=cfg.inner_max_iters, tol=cfg.inner_tol,
                             record_trace=False)
    _report(trace, clock, f, L12, lam, 0, x, cfg, inner_iters=0)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        # the descent direction only matters at the origin
        direction = -f.gradient(x) if not np.any(x) else x
        s = l2_subgradient(x, direction, first=(it == 1))
        lin = lam * s
        sub = SmoothObjective(
            value=lambda u, lin=lin: f.value(u) - float(lin @ u),
            gradient=lambda u, lin=lin: f.gradient(u) - lin,
            lipschitz=f.lipschitz,
        )
        x_new, inner = solve_fista(sub, L1, lam, x, inner_cfg)
        if not inner.converged:
            trace.warnings.append(
                f"outer iteration {it}: inner solver hit {cfg.inner_max_iters} iterations")
        stop = _stalled(x_new, x, cfg.tol, first=(it == 1))
        x = x_new
        _report(trace, clock, f, L12, lam, it, x, cfg, inner_iters=inner.n_iters)
        if stop:
            trace.converged = True
            break
    _finish(trace, clock, f, L12, lam, it, x, cfg)
    return x, trace


def estimate_lipschitz(A, max_iters: int = 100, rtol: float = 1e-8,
                       safety: float = 1.01) -> float:
    """Upper estimate of ``||A'A||_2`` by power iteration.

    ``A`` may be a dense array, a scipy sparse matrix or a
    ``scipy.sparse.linalg.LinearOperator``. The start vector comes from a
    fixed seed, so the result is deterministic. Returns 1.0 for the zero
    operator.
    """
    op = aslinearoperator(A)
    v = np.random.default_rng(0).standard_normal(op.shape[1])
    v /= _norm(v)
    est = 0.0
    for _ in range(max_iters):
        w = op.rmatvec(op.matvec(v))
        nw = _norm(w)
        if nw == 0.0:
            return 1.0
        done = abs(nw - est) <= rtol * nw
        est = nw
        v = w / nw
        if done:
            break
    return safety * est
