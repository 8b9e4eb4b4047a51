"""Model and instance files, CSV tables and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .model import (BanditModel, BetaState, CountableModelSpec, ModelError, SparseBanditModel,
                    beta_bernoulli_spec, validate_model)
from .policy import FhmabInstance

FAMILIES = ("beta_bernoulli",)


class InputError(ValueError):
    """Unreadable or malformed input file."""


def _load_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(obj, dict):
        raise InputError(f"{path}: expected one JSON object")
    return obj


def model_from_dict(obj: dict):
    """Build a validated model from the parsed JSON object.

    Returns a BanditModel (``dense``), a SparseBanditModel (``sparse`` triplets) or,
    for ``family``, a pair ``(CountableModelSpec, initial_state)``.
    """
    if "family" in obj:
        fam = obj["family"]
        if fam not in FAMILIES:
            raise InputError(f"unknown model family {fam!r}; known: {', '.join(FAMILIES)}")
        try:
            i0, j0 = int(obj.get("i0", 1)), int(obj.get("j0", 1))
            beta = float(obj.get("beta", 1.0))
        except (TypeError, ValueError) as e:
            raise InputError(f"bad family parameters: {e}") from None
        if i0 < 1 or j0 < 1:
            raise InputError("Beta states need i0 >= 1 and j0 >= 1")
        if not 0.0 < beta <= 1.0:
            raise InputError(f"discount factor {beta} outside (0, 1]")
        return beta_bernoulli_spec(beta), BetaState(i0, j0)

    missing = [k for k in ("n", "beta", "rewards") if k not in obj]
    if missing:
        raise InputError(f"missing fields: {', '.join(missing)}")
    n = obj["n"]
    if not isinstance(n, int) or n < 1:
        raise InputError(f"n must be a positive integer, got {n!r}")
    rewards = obj["rewards"]
    if not isinstance(rewards, list) or len(rewards) != n:
        raise InputError(f"rewards must be a list of {n} numbers")
    if ("dense" in obj) == ("sparse" in obj):
        raise InputError("give exactly one of 'dense' or 'sparse'")
    try:
        if "dense" in obj:
            P = np.array(obj["dense"], dtype=float)
            if P.shape != (n, n):
                raise InputError(f"dense matrix has shape {P.shape}, expected {(n, n)}")
            model = BanditModel(P, rewards, obj["beta"])
        else:
            rows = [[] for _ in range(n)]
            for t in obj["sparse"]:
                r, c, p = int(t["row"]), int(t["col"]), float(t["p"])
                if not (0 <= r < n and 0 <= c < n):
                    raise InputError(f"triplet {t} out of range for n={n}")
                rows[r].append((c, p))
            model = SparseBanditModel(rows, rewards, obj["beta"], fanout=obj.get("fanout"))
    except (TypeError, KeyError, ValueError) as e:
        if isinstance(e, InputError):
            raise
        raise InputError(f"malformed model: {e}") from None
    try:
        return validate_model(model)
    except ModelError as e:
        raise InputError(f"invalid model: {e}") from None


def load_model(path):
    return model_from_dict(_load_json(path))


def model_to_dict(model) -> dict:
    if isinstance(model, SparseBanditModel):
        trip = [{"row": i, "col": j, "p": p} for i, row in enumerate(model.rows) for j, p in row]
        return {"n": model.n, "beta": model.beta, "rewards": model.R.tolist(), "sparse": trip}
    return {"n": model.n, "beta": model.beta, "rewards": model.R.tolist(), "dense": model.P.tolist()}


def load_instance(path) -> FhmabInstance:
    """Scheduling instance: ``projects`` (model objects), ``T``, ``initial``, optional ``K``, ``idle``."""
    obj = _load_json(path)
    for k in ("projects", "T", "initial"):
        if k not in obj:
            raise InputError(f"instance missing field {k!r}")
    projects = []
    for p in obj["projects"]:
        m = model_from_dict(p)
        if isinstance(m, tuple):
            raise InputError("scheduling instances need finite projects")
        projects.append(m.to_dense() if isinstance(m, SparseBanditModel) else m)
    try:
        inst = FhmabInstance(tuple(projects), int(obj["T"]), tuple(obj["initial"]),
                             int(obj.get("K", 1)), bool(obj.get("idle", False)))
    except (TypeError, ValueError) as e:
        raise InputError(f"invalid instance: {e}") from None
    if inst.T < 1:
        raise InputError("T must be >= 1")
    for m, (p, x) in enumerate(zip(inst.projects, inst.initial)):
        if not 0 <= x < p.n:
            raise InputError(f"initial state {x} out of range for project {m}")
    return inst


def fmt(x) -> str:
    """Shortest round-tripping text for floats; ints and strings pass through."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    args: dict
    seed: int | None
    version: str
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: list = field(default_factory=list)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))
    extra: dict = field(default_factory=dict)

    def add_input(self, path):
        self.inputs[os.fspath(path)] = file_digest(path)

    def write(self, out_dir, stem: str) -> Path:
        """Writes ``<stem>.manifest.json``; every output listed carries this name."""
        return write_json(Path(out_dir) / f"{stem}.manifest.json", asdict(self))
