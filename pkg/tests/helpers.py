"""Shared finite-difference oracles for the test suite.

Central differences at step 1e-4 stay independent of the jet code paths
they check (the oracle evaluates plain floats only).
"""

import numpy as np

FD_STEP = 1e-4


def fd_derivative(f, base, alpha):
    """Central finite difference of d^alpha f at base (orders <= 2)."""
    base = np.asarray(base, dtype=float)
    h = FD_STEP
    idx = [i for i, e in enumerate(alpha) for _ in range(e)]
    order = len(idx)
    if order == 0:
        return f(base)
    if order == 1:
        i = idx[0]
        return (f(_bump(base, i, h)) - f(_bump(base, i, -h))) / (2 * h)
    i, j = idx
    if i == j:
        return (f(_bump(base, i, h)) - 2 * f(base) + f(_bump(base, i, -h))) / h ** 2
    return (
        f(_bump(_bump(base, i, h), j, h))
        - f(_bump(_bump(base, i, h), j, -h))
        - f(_bump(_bump(base, i, -h), j, h))
        + f(_bump(_bump(base, i, -h), j, -h))
    ) / (4 * h ** 2)


def _bump(v, i, h):
    out = v.copy()
    out[i] += h
    return out
