"""Exact finite-horizon index via the adaptive-greedy algorithm.

Notation used throughout:

* ``A_s`` is the set of states where a candidate stopping rule keeps playing
  with s periods to go; rules are nested, ``A_1 ⊆ A_2 ⊆ ... ⊆ A_T``.
* ``w_d(i)`` / ``r_d(i)`` are the expected discounted active time and reward
  when the project is played at (d, i) and then follows the rule.
* The index value assigned at each greedy step is the productivity ``r/w`` of
  the augmented state added.

:func:`ag_reference` recomputes every measure from scratch at each step and is
only for checking. :func:`rag_full` and friends run the staged recursion, in
which stage d replays stage d-1's step sequence and only has to search over
states with horizon d.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .counting import OpCounter
from .model import BanditModel, SparseBanditModel

NEG_INF = -np.inf


@dataclass
class StageRecord:
    """Step sequence emitted by one stage: horizon, state position and index value."""

    d: int
    s: np.ndarray
    i: np.ndarray
    lam: np.ndarray
    consumed: int  # steps replayed from the previous stage

    @property
    def length(self) -> int:
        return len(self.s)


@dataclass
class IndexTable:
    """Index values ``values[d-1][p]`` for the state at layout position p.

    For a finite model the layout is ``0..n-1`` at every horizon. For a
    reachable-set computation horizon d only covers the first ``len(values[d-1])``
    states of ``states``.
    """

    T: int
    values: list
    states: tuple
    stages: list = field(default_factory=list)
    ops: OpCounter = field(default_factory=OpCounter)
    peak_slots: int = 0

    @property
    def n(self) -> int:
        return len(self.values[0])

    @property
    def stage_lengths(self) -> list:
        return [st.length for st in self.stages]

    def table(self) -> np.ndarray:
        """(T, n) array, NaN where a horizon does not cover a state."""
        out = np.full((self.T, len(self.values[0])), np.nan)
        for d, v in enumerate(self.values):
            out[d, : len(v)] = v
        return out

    def value(self, d: int, state) -> float:
        pos = self._pos[state]
        v = self.values[d - 1]
        if pos >= len(v):
            raise KeyError(f"({d}, {state!r}) is not a relevant pair")
        return float(v[pos])

    @property
    def _pos(self) -> dict:
        cache = self.__dict__.get("_pos_cache")
        if cache is None:
            cache = {s: k for k, s in enumerate(self.states)}
            self.__dict__["_pos_cache"] = cache
        return cache

    def order(self) -> list:
        """Full greedy sequence ``(s, state, value)`` over every relevant pair.

        The final stage's emissions come first; each earlier stage contributes the
        tail its successor never replayed.
        """
        if not self.stages:
            return []
        seq = []
        nxt_consumed = None
        for st in reversed(self.stages):
            start = 0 if nxt_consumed is None else nxt_consumed
            for s, i, lam in zip(st.s[start:], st.i[start:], st.lam[start:]):
                seq.append((int(s), self.states[int(i)], float(lam)))
            nxt_consumed = st.consumed
        return seq

    def rows(self):
        for d, v in enumerate(self.values, start=1):
            for p, lam in enumerate(v):
                yield d, self.states[p], float(lam)


# ---------------------------------------------------------------------------
# measure recursions

def measure_refresh(B, R, in_prev, w_prev, r_prev):
    """Measures at horizon d from scratch, given horizon d-1 measures and ``A_{d-1}``.

    ``w(i) = 1 + sum_{j in A_{d-1}} b(i, j) w_prev(j)`` and likewise for ``r`` with ``R(i)``.
    """
    m = np.asarray(in_prev, dtype=float)
    w = 1.0 + B @ (np.asarray(w_prev) * m)
    r = np.asarray(R, dtype=float) + B @ (np.asarray(r_prev) * m)
    return np.asarray(w).ravel(), np.asarray(r).ravel()


def measure_rank1_update(B, w, r, i_star, w_at, r_at):
    """Measures after ``i_star`` joins ``A_{d-1}``: add column ``i_star`` of B scaled by two scalars."""
    col = B[:, i_star]
    if sp.issparse(col):
        col = col.toarray().ravel()
    return w + col * w_at, r + col * r_at


# ---------------------------------------------------------------------------
# reference one-pass algorithm

def _all_measures(R, B, A, T):
    n = len(R)
    w = np.empty((T, n))
    r = np.empty((T, n))
    w[0] = 1.0
    r[0] = R
    for s in range(2, T + 1):
        m = A[s - 1]
        w[s - 1] = 1.0 + B @ (w[s - 2] * m)
        r[s - 1] = R + B @ (r[s - 2] * m)
    return w, r


def ag_reference(model: BanditModel, T: int) -> IndexTable:
    """One-pass adaptive-greedy over all T*n augmented states, measures rebuilt each step.

    Ties go to the larger horizon, then to the lower state.
    """
    n = model.n
    R = model.R
    B = model.B
    # A[s] for s = 0..T+1; A[T+1] is the whole space
    A = np.zeros((T + 2, n), dtype=float)
    A[T + 1] = 1.0
    values = np.full((T, n), np.nan)
    s_seq, i_seq, l_seq = [], [], []
    ops = OpCounter()
    for _ in range(T * n):
        w, r = _all_measures(R, B, A, T)
        ops.refresh_ops += 4 * n * int(A[1:T].sum())
        lam = r / w
        admissible = (A[2:T + 2] > 0) & (A[1:T + 1] == 0)
        cand = np.where(admissible, lam, NEG_INF)
        best = cand.max()
        ss, ii = np.nonzero(cand == best)
        top = ss.max()
        s, i = int(top), int(ii[ss == top].min())
        values[s, i] = best
        A[s + 1, i] = 1.0
        s_seq.append(s + 1)
        i_seq.append(i)
        l_seq.append(best)
    stage = StageRecord(T, np.array(s_seq), np.array(i_seq), np.array(l_seq), consumed=0)
    return IndexTable(T, list(values), tuple(range(n)), [stage], ops)


# ---------------------------------------------------------------------------
# staged recursion

def _slice(B, rows, cols):
    if sp.issparse(B):
        return B[:rows, :cols].tocsr()
    return B[:rows, :cols]


def _column(Bd, Bd_csc, j):
    if Bd_csc is None:
        return Bd[:, j], Bd.shape[0]
    lo, hi = Bd_csc.indptr[j], Bd_csc.indptr[j + 1]
    return (Bd_csc.indices[lo:hi], Bd_csc.data[lo:hi]), int(hi - lo)


def run_stages(R, B, sizes: Sequence[int], block: bool = False,
               counter: OpCounter | None = None):
    """Run stages 1..T of the recursive algorithm.

    ``R`` holds rewards in layout order and ``B = beta * P`` (dense array or scipy
    sparse) in the same layout. ``sizes[d-1]`` is the number of leading layout
    states indexed at horizon d; sizes must be nonincreasing in d. With
    ``block=True`` the per-step refreshes are replaced by premultiplied archives
    and a single matrix product at the end of each stage.

    Returns ``(values, stages, peak_slots)``.
    """
    counter = counter if counter is not None else OpCounter()
    T = len(sizes)
    sparse = sp.issparse(B)
    if sparse:
        B = B.tocsr()
    R = np.asarray(R, dtype=float)
    n1 = sizes[0]

    # stage 1: one period left, the index is the immediate reward
    v1 = R[:n1].copy()
    o1 = np.argsort(-v1, kind="stable")
    values = [v1]
    stages = [StageRecord(1, np.ones(n1, dtype=np.int64), o1, v1[o1], consumed=0)]
    peak = 0
    if T == 1:
        return values, stages, peak

    # archives of the previous stage; entry e holds the measures before its step e+1
    rank = np.empty(n1, dtype=np.int64)
    rank[o1] = np.arange(n1)
    if block:
        n2 = sizes[1]
        mask = (np.arange(n1)[:, None] > rank[None, :]).astype(float)
        stack = np.vstack([mask, mask * v1[None, :]])
        prod = _block_product(stack, _slice(B, n2, n1), counter)
        W_prev, R_prev = prod[:n1], prod[n1:]
        wstar_prev = np.ones(n1)
        rstar_prev = v1.copy()
        peak = 2 * n1 * n2
    else:
        W_prev = np.broadcast_to(np.ones(n1), (n1, n1))
        R_prev = np.broadcast_to(v1, (n1, n1))
        wstar_prev = rstar_prev = None

    for d in range(2, T + 1):
        nd, npv = sizes[d - 1], sizes[d - 2]
        last = d == T
        prev = stages[-1]
        p_s, p_i, p_lam = prev.s, prev.i, prev.lam
        Lp = len(p_s)
        Bd = _slice(B, nd, npv)
        Bd_csc = Bd.tocsc() if sparse else None
        colnnz = np.diff(Bd_csc.indptr).tolist() if sparse else None
        Rd = R[:nd]

        cap = Lp + nd
        if not last:
            W_cur = np.empty((cap, nd))
            R_cur = np.empty((cap, nd))
        w = np.ones(nd)
        r = Rd.copy()
        ratio = r / w
        in_d = np.zeros(nd, dtype=bool)
        in_prev = np.zeros(npv)
        a_nnz = 0  # stored entries of Bd in columns of A_{d-1}
        a_size = 0
        vals = np.full(nd, np.nan)
        out_s = np.empty(cap, dtype=np.int64)
        out_i = np.empty(cap, dtype=np.int64)
        out_l = np.empty(cap)
        if block:
            kstar = np.empty(nd, dtype=np.int64)
            wstar = np.empty(nd)
            rstar = np.empty(nd)

        k = kd = e = 0
        while kd < nd:
            i_star = int(np.argmax(ratio))
            cand = ratio[i_star]
            lam_prev = p_lam[e] if e < Lp else NEG_INF
            if not last:
                W_cur[k] = w
                R_cur[k] = r
            if cand >= lam_prev:
                vals[i_star] = cand
                in_d[i_star] = True
                ratio[i_star] = NEG_INF
                kd += 1
                out_s[k], out_i[k], out_l[k] = d, i_star, cand
                if block:
                    kstar[i_star] = k
                    wstar[i_star] = w[i_star]
                    rstar[i_star] = r[i_star]
            else:
                s, j = int(p_s[e]), int(p_i[e])
                if s == d - 1:
                    if block:
                        wa, ra = wstar_prev[j], rstar_prev[j]
                    else:
                        wa, ra = W_prev[e, j], R_prev[e, j]
                    col, cnt = _column(Bd, Bd_csc, j)
                    if sparse:
                        idx, dat = col
                        w[idx] += dat * wa
                        r[idx] += dat * ra
                    else:
                        w += col * wa
                        r += col * ra
                    counter.rank1_ops += 4 * cnt
                    in_prev[j] = 1.0
                    a_size += 1
                    if sparse:
                        a_nnz += int(colnnz[j])
                elif block:
                    np.add(1.0, W_prev[e + 1], out=w)
                    np.add(Rd, R_prev[e + 1], out=r)
                    counter.vector_ops += 2 * nd
                else:
                    tmp = np.empty((npv, 2))
                    np.multiply(W_prev[e + 1], in_prev, out=tmp[:, 0])
                    np.multiply(R_prev[e + 1], in_prev, out=tmp[:, 1])
                    res = Bd @ tmp
                    np.add(1.0, res[:, 0], out=w)
                    np.add(Rd, res[:, 1], out=r)
                    counter.refreshes += 1
                    counter.refresh_ops += 4 * (a_nnz if sparse else a_size * nd)
                np.divide(r, w, out=ratio)
                ratio[in_d] = NEG_INF
                out_s[k], out_i[k], out_l[k] = s, j, lam_prev
                e += 1
            k += 1

        values.append(vals)
        stages.append(StageRecord(d, out_s[:k].copy(), out_i[:k].copy(), out_l[:k].copy(), consumed=e))
        live = 2 * k * nd + 2 * Lp * (W_prev.shape[1] if W_prev.ndim == 2 else 0)
        if last:
            peak = max(peak, live)
            break
        if block:
            nn = sizes[d]
            keep = np.arange(k)[:, None] > kstar[None, :]
            stack = np.vstack([W_cur[:k] * keep, R_cur[:k] * keep])
            prod = _block_product(stack, _slice(B, nn, nd), counter)
            W_prev, R_prev = prod[:k], prod[k:]
            wstar_prev, rstar_prev = wstar, rstar
            live += 2 * k * nn
        else:
            W_prev, R_prev = W_cur[:k], R_cur[:k]
        peak = max(peak, live)
    return values, stages, peak


def _block_product(stack, Bn, counter):
    """Premultiply every archived row by B: returns ``stack @ Bn.T``."""
    counter.block_products += 1
    if sp.issparse(Bn):
        counter.block_ops += 2 * stack.shape[0] * Bn.nnz
        return np.asarray((Bn @ stack.T).T)
    counter.block_ops += 2 * stack.shape[0] * Bn.shape[0] * Bn.shape[1]
    return stack @ Bn.T


def _finite_table(model, B, T, block):
    counter = OpCounter()
    values, stages, peak = run_stages(model.R, B, [model.n] * T, block=block, counter=counter)
    return IndexTable(T, values, tuple(range(model.n)), stages, counter, peak)


def rag_full(model: BanditModel, T: int) -> IndexTable:
    """All index values for horizons 1..T via the staged recursion with dense refreshes."""
    if isinstance(model, SparseBanditModel):
        model = model.to_dense()
    return _finite_table(model, model.B, T, block=False)


def rag_full_sparse(model, T: int) -> IndexTable:
    """Staged recursion whose products touch only the stored nonzeros of B."""
    if isinstance(model, BanditModel):
        model = model.to_sparse()
    return _finite_table(model, model.B, T, block=False)


def block_rag_full(model, T: int) -> IndexTable:
    """Staged recursion with one archive-wide matrix product per stage."""
    B = model.B
    return _finite_table(model, B, T, block=True)
