"""Bandit project models: finite dense/sparse projects and rule-based countable ones."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

ROW_TOL = 1e-12
PRNG_NAME = "numpy.PCG64"


class ModelError(ValueError):
    """Base class for invalid model input. ``violations`` lists every problem found."""

    def __init__(self, message: str, violations: Sequence[str] = ()):
        super().__init__(message)
        self.violations = list(violations) or [message]


class NonStochasticRow(ModelError):
    pass


class NegativeProbability(ModelError):
    pass


class BadDiscount(ModelError):
    pass


class BadFanout(ModelError):
    pass


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BanditModel:
    """Finite-state project with dense transition matrix ``P`` and active rewards ``R``."""

    P: np.ndarray
    R: np.ndarray
    beta: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen(self.P))
        object.__setattr__(self, "R", _frozen(self.R).reshape(-1))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def n(self) -> int:
        return self.R.shape[0]

    @property
    def B(self) -> np.ndarray:
        return self.beta * self.P

    def shifted(self, charge: float) -> "BanditModel":
        """Same project with an activity charge subtracted from every reward."""
        return BanditModel(self.P, self.R - charge, self.beta, dict(self.meta))

    def to_sparse(self) -> "SparseBanditModel":
        rows = tuple(
            tuple((int(j), float(self.P[i, j])) for j in np.flatnonzero(self.P[i]))
            for i in range(self.n)
        )
        return SparseBanditModel(rows, self.R, self.beta, meta=dict(self.meta))


@dataclass(frozen=True, eq=False)
class SparseBanditModel:
    """Finite-state project storing each row of P as ``(successor, probability)`` pairs."""

    rows: tuple
    R: np.ndarray
    beta: float
    fanout: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = tuple(tuple((int(j), float(p)) for j, p in row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "R", _frozen(self.R).reshape(-1))
        object.__setattr__(self, "beta", float(self.beta))
        if self.fanout is None:
            object.__setattr__(self, "fanout", max((len(r) for r in rows), default=0))

    @property
    def n(self) -> int:
        return self.R.shape[0]

    def csr(self, scale: float = 1.0) -> sp.csr_matrix:
        ii, jj, pp = [], [], []
        for i, row in enumerate(self.rows):
            for j, p in row:
                ii.append(i)
                jj.append(j)
                pp.append(scale * p)
        return sp.csr_matrix((pp, (ii, jj)), shape=(self.n, self.n))

    @property
    def B(self) -> sp.csr_matrix:
        return self.csr(self.beta)

    def to_dense(self) -> BanditModel:
        return BanditModel(self.csr().toarray(), self.R, self.beta, dict(self.meta))

    def successors(self, i: int):
        return [(j, p) for j, p in self.rows[i] if p > 0]


class BetaState(NamedTuple):
    """Beta(i, j) posterior of a Bernoulli success probability."""

    i: int
    j: int

    def key(self) -> str:
        return f"{self.i}:{self.j}"


@dataclass(frozen=True, eq=False)
class CountableModelSpec:
    """Project on a countable state space given by successor and reward rules."""

    successors: Callable[[Any], list]
    reward: Callable[[Any], float]
    beta: float
    fanout: int
    name: str = "custom"
    key: Callable[[Any], str] = str


@dataclass(frozen=True)
class ReachableSets:
    """Nested sets of states reachable from ``i0`` within s = 0..T steps.

    ``order`` is the breadth-first discovery order, so ``order[:sizes[s]]`` is
    exactly the s-step reachable set. ``sets[s]`` is the same set sorted by key.
    """

    i0: Hashable
    T: int
    order: tuple
    sizes: tuple
    sets: tuple

    def n_d(self, d: int) -> int:
        """Number of states for which the d-period index is relevant."""
        return self.sizes[self.T - d]


def validate_model(model):
    """Return ``model`` unchanged if it is well formed, otherwise raise a ModelError."""
    problems: list[tuple[type, str]] = []
    beta = model.beta
    if not (np.isfinite(beta) and 0.0 < beta <= 1.0):
        problems.append((BadDiscount, f"discount factor {beta} outside (0, 1]"))
    R = np.asarray(model.R, dtype=float)
    if R.ndim != 1 or R.size < 1:
        problems.append((ModelError, "rewards must be a nonempty vector"))
    elif not np.all(np.isfinite(R)):
        problems.append((ModelError, "rewards must be finite"))
    n = R.size

    if isinstance(model, SparseBanditModel):
        if len(model.rows) != n:
            problems.append((ModelError, f"{len(model.rows)} rows for {n} rewards"))
        for i, row in enumerate(model.rows):
            if len(row) > model.fanout:
                problems.append((BadFanout, f"row {i} has {len(row)} successors > {model.fanout}"))
            total = 0.0
            for j, p in row:
                if not 0 <= j < n:
                    problems.append((ModelError, f"row {i}: successor {j} out of range"))
                if p < 0:
                    problems.append((NegativeProbability, f"p({i},{j}) = {p} < 0"))
                total += p
            if abs(total - 1.0) > ROW_TOL:
                problems.append((NonStochasticRow, f"row {i} sums to {total!r}"))
    else:
        P = np.asarray(model.P, dtype=float)
        if P.shape != (n, n):
            problems.append((ModelError, f"P has shape {P.shape}, expected {(n, n)}"))
        else:
            for i, j in zip(*np.nonzero(P < 0)):
                problems.append((NegativeProbability, f"p({i},{j}) = {P[i, j]} < 0"))
            sums = P.sum(axis=1)
            for i in np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL):
                problems.append((NonStochasticRow, f"row {i} sums to {sums[i]!r}"))

    if problems:
        msgs = [m for _, m in problems]
        raise problems[0][0]("; ".join(msgs), msgs)
    return model


def _streams(seed: int, k: int):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(k)]


def random_dense_instance(n: int, seed: int, beta: float = 1.0) -> BanditModel:
    """Random project: uniform matrix normalized by row sums, uniform rewards.

    Transitions and rewards come from independent child streams of ``seed``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gP, gR = _streams(seed, 2)
    M = gP.random((n, n))
    P = M / M.sum(axis=1, keepdims=True)
    R = gR.random(n)
    meta = {"generator": "random_dense", "prng": PRNG_NAME, "seed": seed, "streams": ["P", "R"]}
    return BanditModel(P, R, beta, meta)


def birth_death_instance(n: int, seed: int, beta: float = 1.0) -> SparseBanditModel:
    """Random birth-death chain: each state moves down, stays, or moves up (fanout 3)."""
    gP, gR = _streams(seed, 2)
    rows = []
    for i in range(n):
        nbrs = sorted({max(i - 1, 0), i, min(i + 1, n - 1)})
        w = gP.random(len(nbrs))
        w /= w.sum()
        rows.append(tuple(zip(nbrs, w)))
    R = gR.random(n)
    meta = {"generator": "birth_death", "prng": PRNG_NAME, "seed": seed, "streams": ["P", "R"]}
    return SparseBanditModel(tuple(rows), R, beta, fanout=3, meta=meta)


def _beta_successors(s):
    i, j = s
    tot = i + j
    return [(BetaState(i + 1, j), i / tot), (BetaState(i, j + 1), j / tot)]


def _beta_reward(s):
    return s[0] / (s[0] + s[1])


def beta_bernoulli_spec(beta: float) -> CountableModelSpec:
    """Bernoulli bandit with Beta(i, j) posterior state; mean reward i/(i+j)."""
    if not 0.0 < beta <= 1.0:
        raise BadDiscount(f"discount factor {beta} outside (0, 1]")
    return CountableModelSpec(
        successors=_beta_successors,
        reward=_beta_reward,
        beta=float(beta),
        fanout=2,
        name="beta_bernoulli",
        key=lambda s: f"{s[0]}:{s[1]}",
    )


def successor_function(spec) -> Callable[[Any], list]:
    if isinstance(spec, CountableModelSpec):
        return spec.successors
    if isinstance(spec, SparseBanditModel):
        return spec.successors
    if isinstance(spec, BanditModel):
        return lambda i: [(int(j), float(spec.P[i, j])) for j in np.flatnonzero(spec.P[i] > 0)]
    raise TypeError(f"cannot enumerate successors of {type(spec).__name__}")


def reachable_sets(spec, i0, T: int) -> ReachableSets:
    """Breadth-first closure from ``i0`` under positive-probability moves, T levels deep."""
    if T < 0:
        raise ValueError("T must be >= 0")
    succ = successor_function(spec)
    seen = {i0}
    order = [i0]
    sizes = [1]
    frontier = deque([i0])
    for _ in range(T):
        nxt = deque()
        while frontier:
            u = frontier.popleft()
            for v, p in sorted(succ(u)):
                if p > 0 and v not in seen:
                    seen.add(v)
                    order.append(v)
                    nxt.append(v)
        sizes.append(len(order))
        frontier = nxt
    sets = tuple(tuple(sorted(order[:k])) for k in sizes)
    return ReachableSets(i0, T, tuple(order), tuple(sizes), sets)
