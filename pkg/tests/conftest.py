"""Shared fixtures and oracle helpers for the ospkit test suite."""
from __future__ import annotations

import numpy as np
import pytest

from ospkit import Candidate, CycleContext, SystemModel

# Reference 3-state plant used throughout (flexible-link drive with a fast
# actuator mode at -1000 and two coupled slow modes).
A3 = np.array([[-10.0, 1.0, 0.0], [-0.02, -2.0, 156.3], [0.0, 0.0, -1000.0]])
B3 = np.array([[0.0], [0.0], [64.0]])
Q3 = 1e-2 * np.eye(3)
T3 = 0.01

# Two observation geometries for the 6-observer experiments: C_AXES reads
# single states (pairs of duplicated rows), C_MIX couples every state into
# every observation.
C_AXES = np.array(
    [[1.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0], [0, 1.0, 0], [0, 0, 1.0], [0, 0, 1.0]]
)
C_MIX = np.array(
    [
        [1.0, 1.0, 1.0],
        [1.0, 1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0],
        [1.0, 1.0, -1.0],
    ]
)

SIGMA0_SQ = 1e-2
SIGMA1_SQ = 1.0


def make_model(C, R, periods, *, A=A3, B=B3, Q=Q3, T=T3) -> SystemModel:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    return SystemModel(
        A=np.asarray(A, dtype=float),
        B=np.asarray(B, dtype=float),
        C=C,
        Q=np.asarray(Q, dtype=float),
        R=R,
        T=float(T),
        observer_periods=tuple(float(p) for p in periods),
    )


def scalar_model(a=0.0, b=1.0, q=0.0, r=1e-2, T=1.0, period=1.0) -> SystemModel:
    return make_model(
        [[1.0]], [[r]], (period,), A=[[a]], B=[[b]], Q=[[q]], T=T
    )


@pytest.fixture(scope="session")
def search_model() -> SystemModel:
    """10-observer model over the reference plant for search/oracle tests."""
    rng = np.random.default_rng(7)
    C = rng.normal(size=(10, 3))
    R = np.diag(rng.uniform(1e-3, 1.0, size=10))
    return make_model(C, R, (T3,) * 10)


def random_context(rng, model, L=None, k=None) -> CycleContext:
    """Random schedulable-or-not instance: sorted timestamps inside the
    cycle, positive airtimes, a random action load."""
    if L is None:
        L = int(rng.integers(1, 11))
    if k is None:
        k = int(rng.integers(1, 50))
    T = model.T
    lo, hi = (k - 1) * T, k * T
    ts = np.sort(rng.uniform(lo, hi, size=L))
    observers = rng.choice(model.n_observers, size=L, replace=False)
    order = np.lexsort((observers, ts))
    cands = tuple(
        Candidate(timestamp=float(ts[i]), airtime=float(rng.uniform(0.05, 0.4) * T), observer=int(observers[i]))
        for i in order
    )
    actions = tuple(float(a) for a in rng.uniform(0.0, 0.15 * T, size=int(rng.integers(0, 3))))
    return CycleContext(
        candidates=cands,
        action_airtimes=actions,
        T=T,
        cycle_index=k,
        t0=float(lo),
        prior_cov=np.eye(model.n_states),
    )


def harvest_closed_form(seq, ctx) -> float:
    """Independent oracle for the end-of-harvest time: with relative offsets
    o_i and airtimes O_i over the chosen subsequence, the drain ends at
    max_i (o_i + sum of airtimes from i onward)."""
    seq = tuple(seq)
    if not seq:
        return 0.0
    offs = [ctx.rel_offset(i) for i in seq]
    airs = [ctx.candidates[i].airtime for i in seq]
    best = -np.inf
    for i in range(len(seq)):
        best = max(best, offs[i] + sum(airs[i:]))
    return float(best)


def first_obs_grid_oracle(T, T_n, k):
    """Timetable oracle: enumerate the sampling grid m * T_n directly
    instead of using the ceil/floor closed forms.  Grid points within
    1e-9 T of a cycle boundary snap to it; slow observers (T_n > T) own
    boundary points as cycle *ends* (half-open on the left), fast ones own
    the cycle start."""
    import math

    tol = 1e-9 * T
    lo, hi = (k - 1) * T, k * T
    m_hi = int(math.ceil(hi / T_n)) + 2
    pts = []
    for m in range(0, m_hi + 1):
        p = m * T_n
        b = round(p / T)
        if abs(p - b * T) <= tol:
            p = b * T
        pts.append(p)
    if T_n <= T + tol:
        hits = [p for p in pts if lo <= p < hi]
    else:
        hits = [p for p in pts if lo < p <= hi]
    return min(hits) if hits else None


def random_stable_system(rng, n):
    """Random Hurwitz A (spectrum shifted left of the imaginary axis) and a
    random PSD Q of matching size."""
    M = rng.normal(size=(n, n))
    shift = max(np.real(np.linalg.eigvals(M)).max(), 0.0) + rng.uniform(0.1, 1.0)
    A = M - shift * np.eye(n)
    G = rng.normal(size=(n, n))
    Q = G @ G.T / n
    return A, Q
