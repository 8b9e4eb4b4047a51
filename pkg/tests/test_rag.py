import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fhindex.model import BanditModel, birth_death_instance, random_dense_instance
from fhindex.oracle import oracle_table_enumerate
from fhindex.rag import (ag_reference, block_rag_full, measure_rank1_update, measure_refresh, rag_full,
                         rag_full_sparse)

from conftest import small_models

ALGOS = [ag_reference, rag_full, rag_full_sparse, block_rag_full]


def check_invariants(model, tab, atol=1e-12):
    T, n = tab.T, model.n
    table = tab.table()
    assert np.array_equal(table[0], model.R)
    assert np.all(np.diff(table, axis=0) >= -atol)
    assert np.all(table >= model.R.min() - atol) and np.all(table <= model.R.max() + atol)
    seq = [lam for _, _, lam in tab.order()]
    assert len(seq) == T * n
    assert np.all(np.diff(seq) <= atol)
    assert sorted((s, i) for s, i, _ in tab.order()) == [(s, i) for s in range(1, T + 1) for i in range(n)]


def test_swap_table(swap):
    for algo in ALGOS:
        tab = algo(swap, 2)
        assert tab.table().tolist() == [[1.0, 0.0], [1.0, 0.5]]


def test_single_state():
    m = BanditModel([[1.0]], [0.3], 0.9)
    tab = rag_full(m, 4)
    assert np.all(tab.table() == 0.3)
    # ties between horizons go to the longer one
    assert [(s, i) for s, i, _ in tab.order()] == [(4, 0), (3, 0), (2, 0), (1, 0)]


def test_absorbing_states_keep_their_reward():
    m = BanditModel(np.eye(4), [0.2, -1.0, 3.0, 0.7], 0.8)
    for algo in ALGOS:
        assert np.allclose(algo(m, 5).table(), np.tile(m.R, (5, 1)), atol=1e-14)


@given(small_models(), st.integers(1, 5))
def test_all_algorithms_match_enumeration(model, T):
    ref = oracle_table_enumerate(model, T)
    for algo in ALGOS:
        tab = algo(model, T)
        assert np.max(np.abs(tab.table() - ref)) <= 1e-9, algo.__name__
        check_invariants(model, tab)


@given(small_models(), st.integers(2, 5))
def test_stage_structure(model, T):
    tab = rag_full(model, T)
    n = model.n
    for d, st_ in enumerate(tab.stages, start=1):
        assert np.sum(st_.s == d) == n
        if d == 1:
            assert st_.length == n
        else:
            assert st_.length < d * n
            prev = tab.stages[d - 2]
            replay = st_.s < d
            # replayed steps are the previous stage's sequence, in order
            assert np.array_equal(st_.s[replay], prev.s[: st_.consumed])
            assert np.array_equal(st_.i[replay], prev.i[: st_.consumed])


@given(small_models(), st.integers(1, 5), st.floats(-2, 2))
def test_activity_charge_shift(model, T, charge):
    a = rag_full(model, T).table()
    b = rag_full(model.shifted(charge), T).table()
    assert np.max(np.abs(b - (a - charge))) <= 1e-12 * max(1.0, abs(charge))


def test_refresh_with_empty_set_and_swap_example(swap):
    w, r = measure_refresh(swap.B, swap.R, np.zeros(2), np.ones(2), swap.R)
    assert np.array_equal(w, [1, 1]) and np.array_equal(r, swap.R)
    # horizon 2 with state 0 continuing at horizon 1
    w, r = measure_refresh(swap.B, swap.R, np.array([1.0, 0.0]), np.ones(2), swap.R)
    assert r[1] == 1.0 and w[1] == 2.0


def test_rank1_examples(swap):
    w, r = measure_rank1_update(swap.B, np.ones(2), swap.R.copy(), 0, 1.0, 1.0)
    assert w[1] == 2.0 and r[1] == 1.0
    m = BanditModel(np.eye(3), [1, 2, 3], 1.0)
    w, r = measure_rank1_update(m.B, np.ones(3), m.R.copy(), 1, 2.0, 5.0)
    assert w.tolist() == [1, 3, 1] and r.tolist() == [1, 7, 3]
    z = BanditModel([[0.0, 1.0], [0.0, 1.0]], [0, 1], 1.0)
    w, r = measure_rank1_update(z.B, np.ones(2), z.R.copy(), 0, 4.0, 4.0)
    assert w.tolist() == [1, 1]


@given(small_models(), st.data())
def test_rank1_equals_refresh(model, data):
    n = model.n
    inset = np.array(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)), dtype=float)
    j = data.draw(st.integers(0, n - 1))
    if inset[j]:
        return
    wp = np.array(data.draw(st.lists(st.floats(1, 5), min_size=n, max_size=n)))
    rp = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=n, max_size=n)))
    w0, r0 = measure_refresh(model.B, model.R, inset, wp, rp)
    w1, r1 = measure_rank1_update(model.B, w0, r0, j, wp[j], rp[j])
    inset[j] = 1.0
    w2, r2 = measure_refresh(model.B, model.R, inset, wp, rp)
    assert np.allclose(w1, w2, atol=1e-12) and np.allclose(r1, r2, atol=1e-12)


def test_dense_to_sparse_identical():
    m = random_dense_instance(8, 5, 0.9)
    # same arithmetic up to summation order inside the products
    assert np.max(np.abs(rag_full(m, 6).table() - rag_full_sparse(m.to_sparse(), 6).table())) <= 1e-14


def test_birth_death_sparse_vs_dense():
    m = birth_death_instance(50, 3)
    a = rag_full_sparse(m, 10).table()
    b = rag_full(m.to_dense(), 10).table()
    assert np.max(np.abs(a - b)) <= 1e-12


def test_sparse_refresh_ops_quadratic():
    c1 = rag_full_sparse(birth_death_instance(100, 1), 10).ops.refresh_ops
    c2 = rag_full_sparse(birth_death_instance(200, 1), 10).ops.refresh_ops
    assert c2 / c1 <= 4.5


def test_block_variant_large_instance():
    m = random_dense_instance(200, 4)
    a = rag_full(m, 20)
    b = block_rag_full(m, 20)
    assert np.max(np.abs(a.table() - b.table())) <= 1e-12
    # one archive-wide product after each of stages 1..T-1; the last stage leaves no archive
    assert b.ops.block_products == 19
    assert a.ops.block_products == 0


def test_block_with_all_ties():
    m = BanditModel(random_dense_instance(6, 2).P, [0.5] * 6, 1.0)
    for algo in ALGOS:
        assert np.all(algo(m, 5).table() == 0.5)


def test_block_when_horizon_d_picks_lead():
    # a state that is best at every horizon is picked first in each stage
    P = np.full((4, 4), 0.25)
    m = BanditModel(P, [1.0, 0.1, 0.1, 0.0], 1.0)
    a, b = rag_full(m, 5).table(), block_rag_full(m, 5).table()
    assert np.max(np.abs(a - b)) <= 1e-12
    assert np.max(np.abs(a - oracle_table_enumerate(m, 5))) <= 1e-12


def test_value_lookup(swap):
    tab = rag_full(swap, 2)
    assert tab.value(2, 1) == 0.5
    assert tab.stage_lengths[0] == 2
