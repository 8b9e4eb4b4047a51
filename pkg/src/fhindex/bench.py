"""Scaling sweeps: operation counts, memory slots, timings and polynomial fits."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import Polynomial

from .calibration import LambdaGrid, calibrate_index, calibrate_index_scalar
from .counting import OpCounter
from .countable import rag_from_initial, relevant_count
from .model import BetaState, beta_bernoulli_spec, birth_death_instance, random_dense_instance
from .rag import block_rag_full, rag_full, rag_full_sparse

ALGOS = ("rag", "block_rag", "rag_sparse", "calibration", "calibration_scalar", "rag_i0")
CSV_FIELDS = ("algo", "n", "T", "L", "seed", "ops", "slots", "wall_ms")


class RankDeficient(ValueError):
    pass


@dataclass
class ScalingRecord:
    algo: str
    n: int
    T: int
    L: int
    seed: int
    ops: int
    slots: int
    wall_ms: float
    formula_slots: int = 0
    values: np.ndarray | None = field(default=None, repr=False)

    def csv_row(self) -> list:
        return [self.algo, self.n, self.T, self.L, self.seed, self.ops, self.slots, f"{self.wall_ms:.3f}"]


@dataclass
class PolyFit:
    order: int
    coeffs: list  # ascending powers, in the original x units
    rmse: float

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def report(self, algo: str, axis: str) -> dict:
        return {"algo": algo, "axis": axis, "order": self.order, "coeffs": list(self.coeffs), "rmse": self.rmse}


@dataclass
class SweepConfig:
    algos: tuple = ("rag",)
    sizes: tuple = (50, 100)  # n, or the horizon for rag_i0
    horizon: int = 20
    seeds: tuple = (1,)
    beta: float = 1.0
    digits: int = 3
    keep_values: bool = False
    workers: int = 1


def ls_polyfit(xs, ys, order: int) -> PolyFit:
    """Least-squares polynomial fit; x is mapped to [-1, 1] internally for conditioning."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) <= order:
        raise RankDeficient(f"{len(xs)} points cannot determine an order-{order} fit")
    poly, (_, rank, _, _) = Polynomial.fit(xs, ys, order, full=True)
    if rank < order + 1:
        raise RankDeficient(f"design matrix rank {rank} < {order + 1}")
    coef = poly.convert().coef
    coef = np.pad(coef, (0, order + 1 - len(coef)))
    rmse = float(np.sqrt(np.mean((poly(xs) - ys) ** 2)))
    return PolyFit(order, [float(c) for c in coef], rmse)


def select_order(xs, ys, orders=(2, 3, 4), rel_tol: float = 5e-3):
    """Pick the fit order the data supports.

    In-sample RMSE never increases with the order, so the smallest RMSE alone
    always favours the largest order. Instead take the lowest order whose
    leading coefficient is positive and whose RMSE is at most ``rel_tol`` times
    the range of ``ys``; if none qualifies, the qualifying-sign fit with the
    lowest RMSE. Returns ``(best_order, fits)``.
    """
    fits = {o: ls_polyfit(xs, ys, o) for o in orders}
    span = float(np.ptp(np.asarray(ys, dtype=float))) or 1.0
    ok = [o for o in orders if fits[o].leading > 0]
    for o in ok:
        if fits[o].rmse <= rel_tol * span:
            return o, fits
    pool = ok or list(orders)
    return min(pool, key=lambda o: fits[o].rmse), fits


def memory_slots(algorithm: str, n: int = 0, T: int = 0, L: int = 0) -> int:
    """Floating-point slots used by the reference implementations the formulas describe."""
    if algorithm in ("rag", "block_rag", "rag_sparse"):
        return (4 * T + 1) * n * n + 5 * n
    if algorithm in ("calibration", "calibration_scalar"):
        return 2 * L * n + L
    if algorithm == "rag_i0":
        T = Fraction(T)
        val = T**5 / 3 + 2 * T**4 + Fraction(13, 3) * T**3 + Fraction(15, 2) * T**2 + Fraction(65, 6) * T + 6
        assert val.denominator == 1
        return int(val)
    if algorithm == "calibration_i0":
        return L * (T + 1) * (T + 2) + L
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _cell(algo: str, size: int, T: int, seed: int, beta: float, digits: int, keep: bool) -> ScalingRecord:
    L = 0
    values = None
    t0 = time.perf_counter()
    if algo in ("rag", "block_rag"):
        model = random_dense_instance(size, seed, beta)
        tab = (rag_full if algo == "rag" else block_rag_full)(model, T)
        ops, slots, values, n = tab.ops.total, tab.peak_slots, tab.table(), size
    elif algo == "rag_sparse":
        model = birth_death_instance(size, seed, beta)
        tab = rag_full_sparse(model, T)
        ops, slots, values, n = tab.ops.total, tab.peak_slots, tab.table(), size
    elif algo in ("calibration", "calibration_scalar"):
        model = random_dense_instance(size, seed, beta)
        grid = LambdaGrid.digits(model, digits)
        L = grid.L
        counter = OpCounter()
        fn = calibrate_index if algo == "calibration" else calibrate_index_scalar
        values = fn(model, grid, T, counter=counter)
        ops, slots, n = counter.total, 2 * L * size + L, size
    elif algo == "rag_i0":
        T = size
        tab = rag_from_initial(beta_bernoulli_spec(beta), BetaState(1, 1), T, block=True)
        ops, slots, n = tab.ops.total, tab.peak_slots, relevant_count(beta_bernoulli_spec(beta), BetaState(1, 1), T)
        values = np.concatenate(tab.values)
    else:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    wall = 1000.0 * (time.perf_counter() - t0)
    formula = memory_slots(algo, n=n if algo != "rag_i0" else 0, T=T, L=L)
    return ScalingRecord(algo, n, T, L, seed, int(ops), int(slots), wall, formula, values if keep else None)


def run_scaling_sweep(config: SweepConfig) -> list:
    """One record per (algorithm, size, seed) cell, in that nesting order.

    With ``workers > 1`` cells run in separate processes; each cell is
    deterministic and results are collected in cell order either way.
    """
    cells = [(algo, int(size), config.horizon, int(seed), config.beta, config.digits, config.keep_values)
             for algo in config.algos for size in config.sizes for seed in config.seeds]
    for algo in config.algos:
        if algo not in ALGOS:
            raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    if config.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_cell, *zip(*cells)))
    return [_cell(*c) for c in cells]


def fit_records(records, algo: str, axis: str = "n", orders=(2, 3, 4), rel_tol: float = 5e-3):
    """Fit mean op counts of one algorithm against n (or T); returns (best_order, reports)."""
    rows = [r for r in records if r.algo == algo]
    xs = sorted({getattr(r, axis) for r in rows})
    ys = [np.mean([r.ops for r in rows if getattr(r, axis) == x]) for x in xs]
    orders = tuple(o for o in orders if o < len(xs))
    best, fits = select_order(xs, ys, orders, rel_tol)
    return best, [fits[o].report(algo, axis) for o in orders]


def records_as_dicts(records) -> list:
    out = []
    for r in records:
        d = asdict(r)
        d.pop("values")
        out.append(d)
    return out
