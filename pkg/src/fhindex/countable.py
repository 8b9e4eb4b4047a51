"""Index values at the (d, i) pairs reachable from one initial state.

Only states reachable within T - d steps need an index with d periods to go, so
a countable project with bounded fanout yields a finite computation. States are
laid out in breadth-first discovery order; the states relevant at horizon d are
then a prefix of the layout, and every stage of the recursion works on
leading slices of the same vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .counting import OpCounter
from .model import BanditModel, CountableModelSpec, reachable_sets, successor_function
from .rag import IndexTable, rag_full, run_stages


@dataclass
class RelevantStateSpace:
    i0: object
    T: int
    layout: tuple
    sizes: list  # sizes[d-1] = number of states relevant at horizon d
    R: np.ndarray
    B: sp.csr_matrix

    @property
    def count(self) -> int:
        return sum(self.sizes)


class MismatchReport(AssertionError):
    def __init__(self, mismatches):
        super().__init__(f"{len(mismatches)} mismatching pairs, first: {mismatches[:5]}")
        self.mismatches = mismatches


def _reward_fn(spec):
    if isinstance(spec, CountableModelSpec):
        return spec.reward
    return lambda i: float(spec.R[i])


def relevant_space(spec, i0, T: int) -> RelevantStateSpace:
    if T < 1:
        raise ValueError("T must be >= 1")
    reach = reachable_sets(spec, i0, T - 1)
    layout = reach.order
    pos = {s: k for k, s in enumerate(layout)}
    sizes = [reach.sizes[T - d] for d in range(1, T + 1)]
    succ = successor_function(spec)
    reward = _reward_fn(spec)
    R = np.array([reward(s) for s in layout], dtype=float)
    # rows beyond depth T-2 are never used: stage 1 needs no transitions
    inner = reach.sizes[T - 2] if T >= 2 else 0
    ii, jj, bb = [], [], []
    for a in range(inner):
        for v, p in succ(layout[a]):
            if p > 0:
                ii.append(a)
                jj.append(pos[v])
                bb.append(spec.beta * p)
    n = len(layout)
    B = sp.csr_matrix((bb, (ii, jj)), shape=(n, n))
    return RelevantStateSpace(i0, T, layout, sizes, R, B)


def relevant_count(spec, i0, T: int) -> int:
    """Number of relevant (d, i) pairs for horizon T starting from ``i0``."""
    reach = reachable_sets(spec, i0, T - 1)
    return sum(reach.sizes[T - d] for d in range(1, T + 1))


def rag_from_initial(spec, i0, T: int, block: bool = False) -> IndexTable:
    """Index values on every relevant pair, using sparse products over the reachable layout."""
    space = relevant_space(spec, i0, T)
    counter = OpCounter()
    values, stages, peak = run_stages(space.R, space.B, space.sizes, block=block, counter=counter)
    return IndexTable(T, values, space.layout, stages, counter, peak)


def embedded_model(spec, i0, T: int):
    """Finite project on the relevant pairs plus an absorbing terminal state.

    Pair (d, i) moves to (d-1, j) with probability p(i, j); pairs with d = 1 move
    to the terminal state. The terminal state pays less than any other state, so
    no optimal rule ever plays it, which stands in for forcing it passive.
    Returns the model and the list of pairs (terminal last).
    """
    space = relevant_space(spec, i0, T)
    pairs = [(d, p) for d in range(1, T + 1) for p in range(space.sizes[d - 1])]
    idx = {pr: k for k, pr in enumerate(pairs)}
    m = len(pairs) + 1
    P = np.zeros((m, m))
    R = np.zeros(m)
    P[m - 1, m - 1] = 1.0
    R[m - 1] = space.R.min() - 1.0
    Bcsr = space.B
    beta = spec.beta
    for (d, a), k in idx.items():
        R[k] = space.R[a]
        if d == 1:
            P[k, m - 1] = 1.0
            continue
        row = Bcsr.getrow(a)
        for j, b in zip(row.indices, row.data):
            P[k, idx[(d - 1, j)]] += b / beta
    return BanditModel(P, R, beta), pairs, space


def finite_embedding_crosscheck(spec, i0, T: int, tol: float = 1e-12) -> dict:
    """Compare the reachable-set computation with the full recursion on the embedded project.

    In the embedded project the horizon of the augmented state already bounds the
    number of plays, so its index at (d, i) with the full horizon T equals the
    index of the original project at (d, i).
    """
    table = rag_from_initial(spec, i0, T)
    model, pairs, space = embedded_model(spec, i0, T)
    emb = rag_full(model, T).table()
    mismatches = []
    for k, (d, a) in enumerate(pairs):
        mine = table.values[d - 1][a]
        theirs = emb[T - 1, k]
        if abs(mine - theirs) > tol * max(1.0, abs(theirs)):
            mismatches.append(((d, space.layout[a]), mine, theirs))
    if mismatches:
        raise MismatchReport(mismatches)
    return {"pairs": len(pairs), "max_abs_diff": 0.0 if not pairs else float(
        max(abs(table.values[d - 1][a] - emb[T - 1, k]) for k, (d, a) in enumerate(pairs)))}


def beta_index_curve(beta: float, T: int, i0=(1, 1)) -> np.ndarray:
    """Index at the initial Beta state for horizons 1..T."""
    from .model import BetaState, beta_bernoulli_spec

    spec = beta_bernoulli_spec(beta)
    table = rag_from_initial(spec, BetaState(*i0), T)
    return np.array([v[0] for v in table.values])
