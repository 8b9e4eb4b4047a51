"""Slow, trusted index values for desk-size projects.

Two routes that share nothing with the greedy algorithms:

* enumeration over every nested stopping rule (each state picks the first
  horizon at which it is played, or never), taking the best reward/time ratio;
* bisection on the retirement charge of the one-armed dynamic program.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from .calibration import h_sequence, one_armed_block
from .model import BanditModel

ENUM_BUDGET = 10**6


class BudgetExceeded(ValueError):
    pass


def _profiles(n: int, d: int) -> np.ndarray:
    """Every entry-horizon map that matters at horizon d, lexicographic.

    Values run over 1..d+1 with d+1 meaning never. Entering at d itself never
    changes horizon-d measures (the first play is forced), so d is skipped and
    only d**n profiles are built.
    """
    if d ** n > ENUM_BUDGET:
        raise BudgetExceeded(f"d^n = {d ** n} distinct profiles exceeds {ENUM_BUDGET}")
    choices = np.append(np.arange(1, d), d + 1)
    # profile k, read as n base-d digits (most significant first)
    k = np.arange(d ** n)[:, None]
    digits = (k // d ** np.arange(n - 1, -1, -1)) % d
    return choices[digits]


def profile_measures(model: BanditModel, entry: np.ndarray, d: int):
    """Reward and time measures at horizon d for a batch of profiles.

    ``entry`` has shape (K, n); state j is in ``A_s`` iff ``entry[:, j] <= s``. The
    returned (K, n) arrays give the measures when the project is played at
    (d, i) regardless of whether i belongs to ``A_d``.
    """
    K, n = entry.shape
    Bt = model.B.T
    r = np.tile(model.R, (K, 1))
    w = np.ones((K, n))
    for s in range(2, d + 1):
        m = (entry <= s - 1).astype(float)
        r = model.R + (r * m) @ Bt
        w = 1.0 + (w * m) @ Bt
    return r, w


def enumerate_all(model: BanditModel, d: int):
    """Best ratio and the lexicographically first maximizing profile, for every state."""
    prof = _profiles(model.n, d)
    r, w = profile_measures(model, prof, d)
    lam = r / w
    best = lam.max(axis=0)
    arg = lam.argmax(axis=0)
    return best, prof[arg]


def oracle_index_enumerate(model: BanditModel, d: int, i: int) -> float:
    """Exact index at (d, i) by brute force over nested stopping rules."""
    return float(enumerate_all(model, d)[0][i])


def oracle_table_enumerate(model: BanditModel, T: int) -> np.ndarray:
    return np.array([enumerate_all(model, d)[0] for d in range(1, T + 1)])


def oracle_index_exact(model: BanditModel, d: int, i: int, P=None, R=None, beta=None) -> Fraction:
    """Rational-arithmetic enumeration (use with small n and d only).

    Pass ``P``, ``R`` and ``beta`` as Fractions to avoid any float rounding in the
    inputs themselves.
    """
    n = model.n
    P = P if P is not None else [[Fraction(x) for x in row] for row in model.P.tolist()]
    R = R if R is not None else [Fraction(x) for x in model.R.tolist()]
    beta = Fraction(beta if beta is not None else model.beta)
    if d ** n > ENUM_BUDGET:
        raise BudgetExceeded("profile budget exceeded")
    best = None
    for entry in itertools.product(list(range(1, d)) + [d + 1], repeat=n):
        r = list(R)
        w = [Fraction(1)] * n
        for s in range(2, d + 1):
            act = [entry[j] <= s - 1 for j in range(n)]
            r = [R[a] + beta * sum(P[a][j] * r[j] for j in range(n) if act[j]) for a in range(n)]
            w = [1 + beta * sum(P[a][j] * w[j] for j in range(n) if act[j]) for a in range(n)]
        val = r[i] / w[i]
        if best is None or val > best:
            best = val
    return best


def oracle_index_bisect(model: BanditModel, d: int, i: int, tol: float = 1e-10) -> float:
    """Smallest retirement charge at (d, i), by bisection on the one-armed DP."""
    return float(oracle_table_bisect(model, d, tol)[d - 1, i])


def oracle_table_bisect(model: BanditModel, T: int, tol: float = 1e-10) -> np.ndarray:
    """Bisection for all (d, i) with d <= T at once; one DP lane per pair."""
    n = model.n
    lo_r, hi_r = float(model.R.min()), float(model.R.max())
    lanes_d = np.repeat(np.arange(1, T + 1), n)
    lanes_i = np.tile(np.arange(n), T)
    lo = np.full(T * n, lo_r)
    hi = np.full(T * n, hi_r)
    h = h_sequence(model.beta, T)
    stop_h = h[lanes_d - 1]
    while np.any(hi - lo >= tol):
        mid = 0.5 * (lo + hi)
        v = np.empty(T * n)
        for d, V in one_armed_block(model, mid, T):
            sel = lanes_d == d
            v[sel] = V[lanes_i[sel], np.flatnonzero(sel)]
        stop = mid * stop_h
        retire = v <= stop + 1e-13 * np.maximum(1.0, np.abs(stop))
        active = hi - lo >= tol
        hi = np.where(active & retire, mid, hi)
        lo = np.where(active & ~retire, mid, lo)
    return (0.5 * (lo + hi)).reshape(T, n)


def threshold_profile(table: np.ndarray, d: int, lam: float) -> np.ndarray:
    """Entry horizons of the rule "keep playing at (s, j) iff index(s, j) >= lam", s < d."""
    n = table.shape[1]
    entry = np.full(n, d + 1)
    for s in range(d - 1, 0, -1):
        entry = np.where(table[s - 1] >= lam, s, entry)
    return entry


def oracle_optimal_stopping_time(model: BanditModel, d: int, i: int, table: np.ndarray | None = None):
    """An optimal profile for (d, i) and whether the index-threshold rule also attains it.

    The threshold rule keeps playing at (d - t, X(t)) iff its index is at least
    the index at (d, i). Returns ``(entry, value, threshold_entry, threshold_value)``.
    """
    best, arg = enumerate_all(model, d)
    if table is None:
        table = oracle_table_enumerate(model, d)
    lam = table[d - 1, i]
    thr = threshold_profile(table, d, lam)
    r, w = profile_measures(model, thr[None, :], d)
    return arg[i], float(best[i]), thr, float(r[0, i] / w[0, i])


def discrete_sufficiency_max(model: BanditModel, d: int, i: int, table: np.ndarray) -> float:
    """Best ratio over threshold rules whose threshold is a lower-horizon index value."""
    if d == 1:
        return float(model.R[i])
    cands = np.unique(table[: d - 1].ravel())
    prof = np.array([threshold_profile(table, d, lam) for lam in cands])
    r, w = profile_measures(model, prof, d)
    return float((r[:, i] / w[:, i]).max())
