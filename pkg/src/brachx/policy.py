"""Numeric tolerances and the exception hierarchy shared by every module."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace

ENV_VAR = "BRACHX_NUM_POLICY"


class BrachxError(Exception):
    """Base class for all library errors."""


class InvalidArgument(BrachxError, ValueError):
    pass


class BranchCutError(BrachxError):
    """An eigenphase sits on the branch cut of the principal logarithm."""

    def __init__(self, message: str, phases=None):
        super().__init__(message)
        self.phases = phases


class IntegrationError(BrachxError):
    """Adaptive integration could not proceed (step-size underflow or step budget)."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (reached t={t_reached:.6g})")
        self.t_reached = t_reached


class ConsistencyError(BrachxError):
    """An internal algebraic check failed. Indicates a bug, not bad input."""


@dataclass(frozen=True)
class NumericPolicy:
    algebraic: float = 1e-12
    unitary: float = 1e-10
    hermitian_input: float = 1e-10
    branch_cut: float = 1e-9
    eigen_cluster: float = 1e-9
    closure: float = 1e-10
    span: float = 1e-10
    pinv_threshold: float = 1e-10
    unitary_refine: float = 1e-9
    texp_refine: float = 1e-9

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NumericPolicy":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgument(f"unknown numeric-policy keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def load_policy(path: str | None = None) -> NumericPolicy:
    """Read a policy JSON file, falling back to ``$BRACHX_NUM_POLICY`` and then defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return NumericPolicy()
    with open(path) as fh:
        return NumericPolicy.from_dict(json.load(fh))


DEFAULT_POLICY = NumericPolicy()


def with_overrides(policy: NumericPolicy, **kw) -> NumericPolicy:
    return replace(policy, **kw)
