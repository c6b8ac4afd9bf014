"""Trace checks shared by several test modules."""

import numpy as np


def assert_nonincreasing(values, slack):
    v = np.asarray(values, dtype=float)
    rises = np.diff(v)
    assert np.all(rises <= slack), f"largest rise {rises.max():.3e} exceeds {slack:.1e}"


def assert_nmapg_invariant(trace, eta=0.8, delta=1e-4, rtol=1e-12):
    """Recompute the reference sequence and acceptance flags from recorded values."""
    acc = trace.info["accepted"]
    ref = trace.info["reference"]
    gap = trace.info["anchor_gap"]
    cand = trace.info["candidate_objective"]
    F = trace.objective
    c, q = F[0], 1.0
    checked = 0
    for t in range(1, len(F)):
        if acc[t] is None:  # closing row written after the loop
            continue
        scale = rtol * max(1.0, abs(c))
        assert abs(ref[t] - c) <= scale, f"reference drifted at step {t}"
        assert acc[t] == (cand[t] <= ref[t] - delta * gap[t]), f"flag inconsistent at step {t}"
        if acc[t]:
            assert F[t] <= ref[t] - delta * gap[t]
            assert F[t] == cand[t]
        else:
            assert F[t] <= cand[t]
        q_new = eta * q + 1.0
        c = (eta * q * c + F[t]) / q_new
        q = q_new
        checked += 1
    return checked
