"""Sparse recovery from a coherent cosine dictionary.

A 200 x 800 dictionary, 40 nonzeros and a little noise. nmAPG with the l1-2
prox is compared with FISTA on the l1 penalty and with DCA.

Run with ``python demos/compressed_sensing.py`` (about half a minute).
"""

import numpy as np

from l12prox.cs import CsConfig, cs_objective, gen_instance, rmse_normalized, solve_instance
from l12prox.solvers import SolverConfig

cfg = CsConfig(d=200)
inst = gen_instance(cfg, seed=42)
f = cs_objective(inst.A, inst.y)
x0 = np.zeros(inst.A.shape[1])
lam = cfg.lambda_grid[2]
solver_cfg = SolverConfig(max_iters=5000)

print(f"dictionary {inst.A.shape}, {cfg.n_nonzero} nonzeros, lambda {lam:g}")
print(f"{'solver':<16} {'rmse':>8} {'iters':>6} {'seconds':>8}")
for name in ("nmapg-closed", "nmapg-numerical", "fista-l1", "dca"):
    x, trace = solve_instance(f, lam, name, x0, solver_cfg)
    secs = trace.elapsed - trace.reporting_seconds[-1]
    print(f"{name:<16} {rmse_normalized(x, inst.x_true):8.4f} {trace.n_iters:6d} {secs:8.2f}")
