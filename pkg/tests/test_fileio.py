import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fhindex.fileio import (InputError, RunManifest, fmt, load_instance, load_model, model_from_dict,
                            model_to_dict, read_csv, write_csv)
from fhindex.model import BanditModel, BetaState, SparseBanditModel, random_dense_instance


def dump(tmp_path, obj, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_dense_and_sparse_files(tmp_path):
    dense = {"n": 2, "beta": 1.0, "rewards": [1, 0], "dense": [[0, 1], [1, 0]]}
    m = load_model(dump(tmp_path, dense))
    assert isinstance(m, BanditModel) and m.P[0, 1] == 1
    sparse = {"n": 2, "beta": 0.9, "rewards": [1, 0],
              "sparse": [{"row": 0, "col": 1, "p": 1.0}, {"row": 1, "col": 0, "p": 1.0}]}
    s = load_model(dump(tmp_path, sparse))
    assert isinstance(s, SparseBanditModel) and np.array_equal(s.to_dense().P, m.P)


def test_family(tmp_path):
    spec, i0 = load_model(dump(tmp_path, {"family": "beta_bernoulli", "i0": 2, "j0": 3, "beta": 0.9}))
    assert i0 == BetaState(2, 3) and spec.beta == 0.9


@pytest.mark.parametrize("obj", [
    {"family": "gaussian"},
    {"n": 2, "beta": 1.0, "rewards": [1, 0]},
    {"n": 2, "beta": 1.0, "rewards": [1], "dense": [[1, 0], [0, 1]]},
    {"n": 2, "beta": 1.0, "rewards": [1, 0], "dense": [[0.5, 0.6], [0, 1]]},
    {"n": 2, "beta": 0.0, "rewards": [1, 0], "dense": [[1, 0], [0, 1]]},
    {"n": 2, "beta": 1.0, "rewards": [1, 0], "sparse": [{"row": 0, "col": 5, "p": 1.0}]},
    {"n": 2, "beta": 1.0, "rewards": [1, 0], "dense": [[1, 0], [0, 1]], "sparse": []},
    {"family": "beta_bernoulli", "i0": 0, "j0": 1},
])
def test_rejections(tmp_path, obj):
    with pytest.raises(InputError):
        load_model(dump(tmp_path, obj))


def test_missing_and_broken_files(tmp_path):
    with pytest.raises(InputError):
        load_model(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        load_model(bad)


@given(st.integers(1, 6), st.integers(0, 1000))
def test_round_trip(n, seed):
    m = random_dense_instance(n, seed, 0.9)
    back = model_from_dict(json.loads(json.dumps(model_to_dict(m))))
    assert np.array_equal(back.P, m.P) and np.array_equal(back.R, m.R)
    sp = model_from_dict(json.loads(json.dumps(model_to_dict(m.to_sparse()))))
    assert np.array_equal(sp.to_dense().P, m.P)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_text_round_trips(x):
    assert float(fmt(x)) == x


def test_csv_round_trip(tmp_path):
    p = write_csv(tmp_path / "t.csv", ["d", "i", "lambda"], [(1, 0, 0.1), (2, 1, 1 / 3)])
    rows = read_csv(p)
    assert float(rows[1]["lambda"]) == 1 / 3


def test_instance_file(tmp_path):
    proj = {"n": 2, "beta": 0.9, "rewards": [1, 0], "dense": [[0.5, 0.5], [0.5, 0.5]]}
    p = dump(tmp_path, {"T": 3, "initial": [0, 1], "projects": [proj, proj], "K": 1})
    inst = load_instance(p)
    assert inst.T == 3 and inst.dims == (2, 2)
    with pytest.raises(InputError):
        load_instance(dump(tmp_path, {"T": 3, "initial": [0, 5], "projects": [proj, proj]}, "x.json"))


def test_manifest(tmp_path):
    src = dump(tmp_path, {"a": 1})
    man = RunManifest("index", {"horizon": 2}, 7, "0.1.0")
    man.add_input(src)
    out = man.write(tmp_path, "index")
    data = json.loads(out.read_text())
    assert data["subcommand"] == "index" and len(data["inputs"][str(src)]) == 64
