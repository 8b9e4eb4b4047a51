"""Index values as decision rules for multi-project scheduling.

Toy-scale only: everything is computed exactly over the joint state space of
all projects.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .calibration import ACTIVE, INDIFFERENT, PASSIVE, solve_one_armed
from .model import BanditModel
from .oracle import BudgetExceeded
from .rag import rag_full

JOINT_BUDGET = 10**6


class MissingIndexValue(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class FhmabInstance:
    """Projects sharing a discount factor, played over ``T`` periods.

    Without ``idle`` exactly ``K`` projects are engaged each period. With
    ``idle`` any number from 0 to ``K`` may be engaged and idling earns nothing.
    """

    projects: tuple
    T: int
    initial: tuple
    K: int = 1
    idle: bool = False

    def __post_init__(self):
        object.__setattr__(self, "projects", tuple(self.projects))
        object.__setattr__(self, "initial", tuple(int(x) for x in self.initial))
        betas = {p.beta for p in self.projects}
        if len(betas) != 1:
            raise ValueError(f"projects must share one discount factor, got {sorted(betas)}")
        if not 1 <= self.K <= len(self.projects):
            raise ValueError("need 1 <= K <= M")
        if len(self.initial) != len(self.projects):
            raise ValueError("one initial state per project")

    @property
    def beta(self) -> float:
        return self.projects[0].beta

    @property
    def dims(self) -> tuple:
        return tuple(p.n for p in self.projects)

    def shifted(self, charge: float) -> "FhmabInstance":
        return FhmabInstance(tuple(p.shifted(charge) for p in self.projects),
                             self.T, self.initial, self.K, self.idle)


@dataclass
class PolicyReport:
    policy: str
    value: float
    per_period: list = field(default_factory=list)  # expected discounted reward earned at each t
    stderr: float | None = None


def one_known_arm_instance(model: BanditModel, lam: float, T: int, i0: int = 0) -> FhmabInstance:
    """The project against a single-state standard arm paying ``lam``."""
    known = BanditModel([[1.0]], [lam], model.beta)
    return FhmabInstance((model, known), T, (i0, 0))


def _apply(arr: np.ndarray, P: np.ndarray, axis: int, forward: bool) -> np.ndarray:
    """Move along one project's axis: expectation (backward) or distribution push (forward)."""
    if forward:
        return np.moveaxis(np.tensordot(arr, P, axes=([axis], [0])), -1, axis)
    return np.moveaxis(np.tensordot(P, arr, axes=([1], [axis])), 0, axis)


def _reward_grid(inst: FhmabInstance, m: int) -> np.ndarray:
    shape = [1] * len(inst.projects)
    shape[m] = inst.projects[m].n
    return inst.projects[m].R.reshape(shape)


def _action_sets(inst: FhmabInstance):
    M = len(inst.projects)
    if inst.idle:
        return [S for k in range(inst.K + 1) for S in itertools.combinations(range(M), k)]
    return list(itertools.combinations(range(M), inst.K))


def _check_budget(inst):
    size = int(np.prod(inst.dims)) * inst.T
    if size > JOINT_BUDGET:
        raise BudgetExceeded(f"{size} joint (state, period) pairs exceeds {JOINT_BUDGET}")


def fhmab_optimal_value(inst: FhmabInstance) -> float:
    """Optimal expected total discounted reward by backward induction on joint states."""
    _check_budget(inst)
    beta = inst.beta
    V = np.zeros(inst.dims)
    sets = _action_sets(inst)
    rewards = [_reward_grid(inst, m) for m in range(len(inst.projects))]
    for _ in range(inst.T):
        best = None
        for S in sets:
            q = np.zeros(inst.dims)
            nxt = V
            for m in S:
                q = q + rewards[m]
                nxt = _apply(nxt, inst.projects[m].P, m, forward=False)
            q = q + beta * nxt
            best = q if best is None else np.maximum(best, q)
        V = best
    return float(V[inst.initial])


def _priorities(inst, rule, tables, d):
    out = []
    for m, p in enumerate(inst.projects):
        if rule == "myopic":
            vals = p.R
        else:
            vals = np.asarray(tables[m])[d - 1]
        shape = [1] * len(inst.projects)
        shape[m] = p.n
        out.append(np.broadcast_to(np.asarray(vals, dtype=float).reshape(shape), inst.dims))
    return np.stack(out)


def _engaged(inst, prio):
    """Boolean (M, *dims) mask of engaged projects; ties go to the lower project number."""
    M = prio.shape[0]
    # stable sort on -priority keeps lower project ids first among equals
    order = np.argsort(-prio, axis=0, kind="stable")
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(M).reshape((M,) + (1,) * (prio.ndim - 1)), axis=0)
    engage = rank < inst.K
    if inst.idle:
        engage &= prio > 0
    return engage


def evaluate_heuristic(inst: FhmabInstance, rule: str = "index", tables=None) -> PolicyReport:
    """Exact value of a priority rule, propagating the joint state distribution forward.

    ``rule`` is ``"index"`` (priority = index with the remaining periods) or
    ``"myopic"`` (priority = immediate expected reward). ``tables[m]`` is a (T, n_m)
    index array for project m; NaN marks values that were not computed.
    """
    if rule not in ("index", "myopic"):
        raise ValueError(f"unknown rule {rule!r}")
    _check_budget(inst)
    if rule == "index" and tables is None:
        tables = [rag_full(p, inst.T).table() for p in inst.projects]
    M = len(inst.projects)
    beta = inst.beta
    prob = np.zeros(inst.dims)
    prob[inst.initial] = 1.0
    rewards = [_reward_grid(inst, m) for m in range(M)]
    total = 0.0
    per_period = []
    weights = (1 << np.arange(M)).reshape((M,) + (1,) * M)
    for t in range(inst.T):
        d = inst.T - t
        prio = _priorities(inst, rule, tables, d)
        live = prob > 0
        if np.isnan(prio[:, live]).any():
            raise MissingIndexValue(f"index needed at d={d} for a reachable state")
        engage = _engaged(inst, np.where(np.isnan(prio), -np.inf, prio))
        earned = sum(float((prob * engage[m] * rewards[m]).sum()) for m in range(M))
        per_period.append(beta**t * earned)
        total += beta**t * earned
        code = (engage * weights).sum(axis=0)
        new = np.zeros(inst.dims)
        for c in np.unique(code[live]):
            part = np.where(code == c, prob, 0.0)
            for m in range(M):
                if c >> m & 1:
                    part = _apply(part, inst.projects[m].P, m, forward=True)
            new += part
        prob = new
    return PolicyReport(rule, total, per_period)


def simulate_heuristic(inst: FhmabInstance, rule: str, tables=None, runs: int = 10000,
                       seed: int = 0) -> PolicyReport:
    """Monte Carlo estimate of a priority rule's value with its standard error."""
    if rule == "index" and tables is None:
        tables = [rag_full(p, inst.T).table() for p in inst.projects]
    rng = np.random.default_rng(seed)
    M = len(inst.projects)
    cum = [np.cumsum(p.P, axis=1) for p in inst.projects]
    totals = np.empty(runs)
    for k in range(runs):
        x = list(inst.initial)
        acc = 0.0
        for t in range(inst.T):
            d = inst.T - t
            if rule == "myopic":
                prio = np.array([inst.projects[m].R[x[m]] for m in range(M)])
            else:
                prio = np.array([tables[m][d - 1][x[m]] for m in range(M)])
            order = np.argsort(-prio, kind="stable")[: inst.K]
            if inst.idle:
                order = [m for m in order if prio[m] > 0]
            for m in order:
                acc += inst.beta**t * inst.projects[m].R[x[m]]
                u = rng.random()
                x[m] = int(min(np.searchsorted(cum[m][x[m]], u, side="right"), inst.projects[m].n - 1))
        totals[k] = acc
    return PolicyReport(rule, float(totals.mean()), stderr=float(totals.std(ddof=1) / np.sqrt(runs)))


def compare_policies(inst: FhmabInstance, tables=None) -> list:
    """Rows ``(policy, value, gap)`` for the optimum, the index rule and the myopic rule."""
    opt = fhmab_optimal_value(inst)
    rows = [("optimal", opt, 0.0)]
    for rule in ("index", "myopic"):
        rep = evaluate_heuristic(inst, rule, tables)
        rows.append((rule, rep.value, opt - rep.value))
    return rows


def verify_one_armed_optimality(model: BanditModel, T: int, lam: float, tol: float = 1e-9,
                                table: np.ndarray | None = None) -> dict:
    """Check that playing is optimal exactly when the index is at least the standard reward.

    A pair is flagged when the dynamic program and the index disagree by more
    than ``tol``: e.g. passive is strictly optimal but the index exceeds
    ``lam + tol``.
    """
    if table is None:
        table = rag_full(model, T).table()
    sol = solve_one_armed(model, lam, T)
    violations = []
    for d in range(1, T + 1):
        for i in range(model.n):
            a = sol.actions[d - 1, i]
            idx = table[d - 1, i]
            active_ok = a in (ACTIVE, INDIFFERENT)
            passive_ok = a in (PASSIVE, INDIFFERENT)
            if (active_ok and idx < lam - tol) or (not active_ok and idx > lam + tol):
                violations.append({"d": d, "i": i, "index": float(idx), "action": int(a), "kind": "active"})
            elif (passive_ok and idx > lam + tol) or (not passive_ok and idx < lam - tol):
                violations.append({"d": d, "i": i, "index": float(idx), "action": int(a), "kind": "passive"})
    return {"lam": float(lam), "checked": T * model.n, "violations": violations}
