"""Pure-python (numpy) implementations of the hot kernels.

Same contracts as the compiled ``hotwall._ckernels``:

``cross_scan`` advances a batch of renewal paths through one block of cycle
durations, stopping each path at the cycle that straddles its target time.
``kahan_cumsum`` returns compensated prefix sums.

The fallback uses ``np.longdouble`` accumulation instead of the compiled
kernel's per-step Kahan summation; the two may differ in the last ulp of a
prefix sum, which the statistical tolerances downstream absorb.
"""

from __future__ import annotations

import numpy as np

__all__ = ["cross_scan", "kahan_cumsum"]


def cross_scan(tau_block, gval_block, t_target, S, C, N, G, GC, tau_next, done):
    """Consume one block of cycle durations for every unfinished path.

    Parameters
    ----------
    tau_block : (n, K) float64
        Candidate cycle durations, consumed left to right per path.
    gval_block : (n, K) float64 or None
        Optional per-cycle values accumulated into ``G`` for consumed cycles.
    t_target : (n,) float64
        Per-path horizon. A path finishes at the first cycle with
        ``S + tau > t_target``; that cycle is *not* added to ``S`` and its
        duration is recorded in ``tau_next``.
    S, C : (n,) float64
        Running compensated sums of consumed cycles (estimate + correction).
    N : (n,) int64
        Count of consumed cycles.
    G, GC : (n,) float64
        Compensated accumulator for ``gval_block`` (ignored when it is None).
    tau_next : (n,) float64
    done : (n,) bool

    Returns
    -------
    int
        Number of paths still unfinished after the block.
    """
    active = ~done
    if not np.any(active):
        return 0
    rows = np.nonzero(active)[0]
    taus = tau_block[rows].astype(np.longdouble)
    base = S[rows].astype(np.longdouble) + C[rows].astype(np.longdouble)
    cum = base[:, None] + np.cumsum(taus, axis=1)
    exceed = cum > t_target[rows].astype(np.longdouble)[:, None]
    crossed = exceed.any(axis=1)
    kfirst = np.argmax(exceed, axis=1)

    K = tau_block.shape[1]
    # Consumed-cycle count in this block: kfirst for crossed rows, K otherwise.
    ncons = np.where(crossed, kfirst, K)

    # New compensated sums after consuming ncons cycles.
    with_prev = np.concatenate([base[:, None], cum], axis=1)
    new_sum = with_prev[np.arange(len(rows)), ncons]
    s64 = new_sum.astype(np.float64)
    c64 = (new_sum - s64.astype(np.longdouble)).astype(np.float64)
    S[rows] = s64
    C[rows] = c64
    N[rows] += ncons

    if gval_block is not None:
        g = gval_block[rows].astype(np.longdouble)
        gbase = G[rows].astype(np.longdouble) + GC[rows].astype(np.longdouble)
        gcum = np.concatenate([gbase[:, None], gbase[:, None] + np.cumsum(g, axis=1)], axis=1)
        gnew = gcum[np.arange(len(rows)), ncons]
        g64 = gnew.astype(np.float64)
        G[rows] = g64
        GC[rows] = (gnew - g64.astype(np.longdouble)).astype(np.float64)

    hit = rows[crossed]
    tau_next[hit] = tau_block[hit, kfirst[crossed]]
    done[hit] = True
    return int(len(rows) - crossed.sum())


def kahan_cumsum(x):
    """Compensated prefix sums of a 1-D float64 array."""
    acc = np.cumsum(np.asarray(x, dtype=np.longdouble))
    return acc.astype(np.float64)
