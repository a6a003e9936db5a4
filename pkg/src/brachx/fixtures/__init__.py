"""Pinned su(4) fixtures shipped as JSON: decompositions, reference states, targets.

Each file stores the decomposition frame itself (not just its seed), so loading
does not depend on the random number generator of the installed numpy/scipy.
``make_fixtures`` regenerates them; ``fixture_digest`` is the content hash
recorded in run manifests.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..decomposition import ABDecomposition
from ..dynamics import PhaseState
from ..io import digest_bytes, matrix_from_json
from ..policy import InvalidArgument

HERE = Path(__file__).resolve().parent
NAMES = ("chaotic_su4", "type1_su4", "type2_su4")


@dataclass(frozen=True, eq=False)
class Fixture:
    name: str
    dec: ABDecomposition
    states: dict
    targets: dict
    params: dict
    digest: str

    def state(self, key: str = "x0") -> PhaseState:
        return PhaseState.from_x(self.dec, self.states[key])

    def target(self, key: str) -> np.ndarray:
        return self.targets[key]


def fixture_path(name: str) -> Path:
    if name not in NAMES:
        raise InvalidArgument(f"unknown fixture {name!r}; have {', '.join(NAMES)}")
    return HERE / f"{name}.json"


def fixture_digest(name: str) -> str:
    return digest_bytes(fixture_path(name).read_bytes())


@lru_cache(maxsize=None)
def load_fixture(name: str) -> Fixture:
    raw = fixture_path(name).read_bytes()
    data = json.loads(raw)
    dec = ABDecomposition.from_json(data["decomposition"])
    states = {k: np.asarray(v, dtype=float) for k, v in data["states"].items()}
    targets = {k: matrix_from_json(v) for k, v in data["targets"].items()}
    return Fixture(name, dec, states, targets, data.get("params", {}), digest_bytes(raw))
