"""Calibration method: approximate indices from the one-armed DP on a grid of charges.

The one-armed problem pits the project against a standard arm paying a constant
``lam`` per period. Its value obeys

    v_1(i) = max(lam, R(i))
    v_d(i) = max(lam * h_d, R(i) + beta * sum_j p(i, j) v_{d-1}(j))

and the index at (d, i) is the smallest ``lam`` for which retiring at once is optimal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counting import OpCounter
from .model import BanditModel

PASSIVE = 0
ACTIVE = 1
INDIFFERENT = 2


class GridDoesNotCover(ValueError):
    pass


def h_sequence(beta: float, T: int) -> np.ndarray:
    """Discounted horizon weights ``h[d-1] = 1 + beta + ... + beta**(d-1)`` for d = 1..T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if beta == 1.0:
        return np.arange(1, T + 1, dtype=float)
    h = np.empty(T)
    h[0] = 1.0
    for d in range(1, T):
        h[d] = 1.0 + beta * h[d - 1]
    return h


@dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray

    @classmethod
    def uniform(cls, lo: float, hi: float, L: int) -> "LambdaGrid":
        if L < 2:
            raise ValueError("a grid needs L >= 2 points")
        return cls(np.linspace(lo, hi, L))

    @classmethod
    def for_model(cls, model: BanditModel, L: int) -> "LambdaGrid":
        return cls.uniform(float(model.R.min()), float(model.R.max()), L)

    @classmethod
    def digits(cls, model: BanditModel, m: int) -> "LambdaGrid":
        """Grid of 10**m + 1 points spanning [min R, max R]."""
        if m < 1:
            raise ValueError("need at least one significant digit (L >= 2)")
        return cls.for_model(model, 10**m + 1)

    @property
    def L(self) -> int:
        return len(self.values)

    @property
    def spacing(self) -> float:
        return float(self.values[-1] - self.values[0]) / (self.L - 1)


@dataclass(frozen=True)
class OneArmedSolution:
    lam: float
    values: np.ndarray  # values[d-1, i] = v_d(i; lam)
    actions: np.ndarray  # PASSIVE / ACTIVE / INDIFFERENT per (d, i)

    def v(self, d: int, i: int) -> float:
        return float(self.values[d - 1, i])


def solve_one_armed(model: BanditModel, lam: float, T: int) -> OneArmedSolution:
    R = model.R
    B = model.B
    h = h_sequence(model.beta, T)
    values = np.empty((T, model.n))
    actions = np.empty((T, model.n), dtype=np.int8)
    cont = R.copy()
    for d in range(1, T + 1):
        if d > 1:
            cont = R + B @ values[d - 2]
        stop = lam * h[d - 1]
        values[d - 1] = np.maximum(stop, cont)
        tie = np.abs(cont - stop) <= 1e-12 * max(1.0, abs(stop))
        actions[d - 1] = np.where(tie, INDIFFERENT, np.where(cont > stop, ACTIVE, PASSIVE))
    return OneArmedSolution(float(lam), values, actions)


def one_armed_block(model: BanditModel, lams: np.ndarray, T: int):
    """Yield ``(d, V_d)`` with ``V_d[i, l] = v_d(i; lams[l])`` for d = 1..T."""
    lams = np.asarray(lams, dtype=float)
    R = model.R[:, None]
    B = model.B
    h = h_sequence(model.beta, T)
    V = np.maximum(lams[None, :], R)
    yield 1, V
    for d in range(2, T + 1):
        V = B @ V
        np.add(V, R, out=V)
        np.maximum(V, h[d - 1] * lams[None, :], out=V)
        yield d, V


def _retire_mask(V: np.ndarray, stop: np.ndarray, eps: float) -> np.ndarray:
    return V <= stop + eps * np.maximum(1.0, np.abs(stop))


def _first_true(pred: np.ndarray) -> np.ndarray:
    """Per row, the first column where a monotone false→true predicate holds (binary search)."""
    n, L = pred.shape
    rows = np.arange(n)
    lo = np.full(n, -1)
    hi = np.full(n, L - 1)
    while True:
        live = hi - lo > 1
        if not live.any():
            return hi
        mid = np.where(live, (lo + hi) // 2, hi)
        t = pred[rows, mid]
        hi = np.where(live & t, mid, hi)
        lo = np.where(live & ~t, mid, lo)


def calibrate_index(model: BanditModel, grid: LambdaGrid, T: int, eps: float = 1e-9,
                    counter: OpCounter | None = None) -> np.ndarray:
    """Approximate index table ``out[d-1, i]`` by the block calibration method.

    Each stage updates the n-by-L value block with one matrix product.
    """
    R = model.R
    n = model.n
    if R.min() == R.max():
        return np.tile(R, (T, 1))
    lams = grid.values
    L = grid.L
    if lams[0] > R.min() or lams[-1] < R.max():
        raise GridDoesNotCover("grid must span [min R, max R]")
    h = h_sequence(model.beta, T)
    out = np.empty((T, n))
    out[0] = R
    for d, V in one_armed_block(model, lams, T):
        if counter is not None:
            # same accounting as the scalar path: n(n+1)+1 multiplies and as many adds per grid point
            counter.dp_ops += n * L if d == 1 else 2 * L * (n * (n + 1) + 1)
        if d == 1:
            continue
        pred = _retire_mask(V, h[d - 1] * lams[None, :], eps)
        if not pred[:, -1].all():
            bad = np.flatnonzero(~pred[:, -1])
            raise GridDoesNotCover(f"no grid point retires at d={d}, states {bad.tolist()}")
        out[d - 1] = lams[_first_true(pred)]
    return out


def calibrate_index_scalar(model: BanditModel, grid: LambdaGrid, T: int, eps: float = 1e-9,
                           counter: OpCounter | None = None) -> np.ndarray:
    """Reference calibration with explicit loops; counts every multiply and add."""
    counter = counter if counter is not None else OpCounter()
    P = model.P.tolist()
    R = model.R.tolist()
    beta = model.beta
    n = model.n
    out = np.full((T, n), np.nan)
    out[0] = R
    for lam in grid.values.tolist():
        v = [max(lam, r) for r in R]
        counter.dp_ops += n  # the n subtractions deciding each max
        htil = lam
        for d in range(2, T + 1):
            htil = lam + beta * htil
            counter.dp_ops += 2
            nv = []
            for i in range(n):
                acc = P[i][0] * v[0]
                for j in range(1, n):
                    acc += P[i][j] * v[j]
                cont = R[i] + beta * acc
                nv.append(max(htil, cont))
            counter.dp_ops += n * (2 * n - 1 + 3)
            v = nv
            for i in range(n):
                if np.isnan(out[d - 1, i]) and v[i] <= htil + eps * max(1.0, abs(htil)):
                    out[d - 1, i] = lam
    if np.isnan(out).any():
        raise GridDoesNotCover("some (d, i) never retired on the grid")
    return out


def predicted_calibration_ops(n: int, T: int, L: int) -> int:
    """Operation count of the calibration method for L grid points."""
    return 2 * (T - 1) * L * (n * (n + 1) + 1) + L * n
