import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fhindex.bench import (CSV_FIELDS, RankDeficient, SweepConfig, fit_records, ls_polyfit, memory_slots,
                           run_scaling_sweep, select_order)
from fhindex.calibration import predicted_calibration_ops


def test_exact_cubic():
    xs = np.arange(1, 9, dtype=float)
    fit = ls_polyfit(xs, xs**3, 3)
    assert abs(fit.leading - 1) <= 1e-9 and fit.rmse <= 1e-9


def test_underfit_has_error():
    assert ls_polyfit([1, 2, 3], [1, 4, 9], 1).rmse > 0


def test_too_few_points():
    with pytest.raises(RankDeficient):
        ls_polyfit([1, 2, 3], [1, 2, 3], 3)
    with pytest.raises(RankDeficient):
        ls_polyfit([2, 2, 2, 2, 2], [1, 2, 3, 4, 5], 2)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.integers(0, 100))
def test_fit_recovers_quadratic(coef, seed):
    xs = np.linspace(50, 200, 7)
    ys = np.polynomial.polynomial.polyval(xs, coef)
    fit = ls_polyfit(xs, ys, 2)
    assert np.allclose(fit(xs), ys, rtol=1e-9, atol=1e-6 * (1 + np.abs(ys).max()))
    assert fit.rmse >= 0


def test_selection_prefers_lowest_adequate_order():
    xs = np.linspace(50, 200, 7)
    ys = 3 * xs**3 + 5 * xs**2
    assert select_order(xs, ys)[0] == 3
    assert select_order(xs, 2 * xs**2 + 1)[0] == 2


def test_memory_formulas():
    assert memory_slots("calibration", n=100, L=1001) == 201201
    assert memory_slots("rag", n=100, T=50) == 2010500
    # the closed-form polynomial at T = 10
    assert memory_slots("rag_i0", T=10) == 58531
    assert memory_slots("calibration_i0", T=10, L=11) == 11 * 11 * 12 + 11
    with pytest.raises(ValueError):
        memory_slots("nope")


def test_rag_i0_polynomial_is_integral():
    for T in range(1, 60):
        memory_slots("rag_i0", T=T)


def test_sweep_records():
    recs = run_scaling_sweep(SweepConfig(algos=("rag",), sizes=(10, 20, 40), horizon=6, seeds=(1,)))
    assert len(recs) == 3
    ops = [r.ops for r in recs]
    assert ops[0] < ops[1] < ops[2]
    assert len(recs[0].csv_row()) == len(CSV_FIELDS)


def test_sweep_calibration_scalar_matches_formula():
    recs = run_scaling_sweep(SweepConfig(algos=("calibration_scalar", "calibration"), sizes=(5, 8),
                                         horizon=4, digits=1))
    for r in recs:
        assert r.ops == predicted_calibration_ops(r.n, r.T, r.L)


def test_block_and_plain_tables_agree_in_every_cell():
    cfg = SweepConfig(algos=("rag", "block_rag"), sizes=(15, 30), horizon=5, seeds=(1, 2), keep_values=True)
    recs = run_scaling_sweep(cfg)
    half = len(recs) // 2
    for a, b in zip(recs[:half], recs[half:]):
        assert (a.n, a.seed) == (b.n, b.seed)
        assert np.max(np.abs(a.values - b.values)) <= 1e-12


def test_sweep_is_deterministic_and_parallel_matches():
    cfg = SweepConfig(algos=("rag_sparse", "rag_i0"), sizes=(6, 12), horizon=5)
    a = [r.csv_row()[:-1] for r in run_scaling_sweep(cfg)]
    cfg.workers = 2
    b = [r.csv_row()[:-1] for r in run_scaling_sweep(cfg)]
    assert a == b


def test_op_count_ratios():
    rag = run_scaling_sweep(SweepConfig(algos=("rag",), sizes=(50, 100), horizon=20))
    assert 6 <= rag[1].ops / rag[0].ops <= 10
    sparse = run_scaling_sweep(SweepConfig(algos=("rag_sparse",), sizes=(50, 100), horizon=20))
    assert 3.5 <= sparse[1].ops / sparse[0].ops <= 4.5


def test_rag_i0_counts():
    recs = run_scaling_sweep(SweepConfig(algos=("rag_i0",), sizes=(3, 7), horizon=0))
    assert [r.n for r in recs] == [10, 84]


def test_fit_records_small():
    recs = run_scaling_sweep(SweepConfig(algos=("rag_sparse",), sizes=(20, 30, 40, 50, 60), horizon=6))
    best, reps = fit_records(recs, "rag_sparse")
    assert best in (2, 3, 4)
    assert {r["order"] for r in reps} == {2, 3, 4}
    assert set(reps[0]) == {"algo", "axis", "order", "coeffs", "rmse"}
