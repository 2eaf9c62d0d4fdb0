"""Exact inference on the binary collider network C1 -> E <- C2.

States are indexed lexicographically over ``(c1, c2, e)``, i.e. ``index =
4*c1 + 2*c2 + e``, so ``STATES[0] == (0, 0, 0)`` and ``STATES[7] == (1, 1, 1)``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .exceptions import ParameterOutOfRange, ZeroEvidenceMass

VARIABLES = ("C1", "C2", "E")
STRENGTH_BOUNDS = (-3.0, 3.0)
PROBABILITY_BOUNDS = (0.0, 1.0)

# shift of each variable's bit inside a state index
_BIT = {"C1": 2, "C2": 1, "E": 0}


class StateAssignment(NamedTuple):
    c1: int
    c2: int
    e: int

    @property
    def index(self) -> int:
        return 4 * self.c1 + 2 * self.c2 + self.e

    def value(self, var: str) -> int:
        return (self.index >> _BIT[var]) & 1

    def flip(self, var: str) -> "StateAssignment":
        return STATES[self.index ^ (1 << _BIT[var])]


STATES = tuple(StateAssignment(*bits) for bits in itertools.product((0, 1), repeat=3))


class GeneratingFunction(str, enum.Enum):
    LOGISTIC = "logistic"
    NOISY_OR = "noisyor"


class Tying(str, enum.Enum):
    """Which parameters are shared between the two causes."""

    SHARED_PRIOR_SHARED_STRENGTH = "3p"
    SHARED_PRIOR_FREE_STRENGTH = "4p"
    FREE_PRIOR_SHARED_STRENGTH = "freeprior"
    FREE_PRIOR_FREE_STRENGTH = "5p"

    @property
    def free_prior(self) -> bool:
        return self in (Tying.FREE_PRIOR_SHARED_STRENGTH, Tying.FREE_PRIOR_FREE_STRENGTH)

    @property
    def free_strength(self) -> bool:
        return self in (Tying.SHARED_PRIOR_FREE_STRENGTH, Tying.FREE_PRIOR_FREE_STRENGTH)

    @property
    def n_params(self) -> int:
        return 3 + self.free_prior + self.free_strength

    @property
    def vector_names(self) -> tuple[str, ...]:
        names = ["prior_c1", "prior_c2"] if self.free_prior else ["prior"]
        names += ["strength_c1", "strength_c2"] if self.free_strength else ["strength"]
        return tuple(names + ["bias_e"])


@dataclass(frozen=True)
class ColliderParameters:
    """Free parameters of the collider network.

    Under ``NOISY_OR`` the strengths and ``bias_e`` are causal powers in [0, 1];
    under ``LOGISTIC`` they are log-odds weights in [-3, 3].
    """

    prior_c1: float
    prior_c2: float
    strength_c1: float
    strength_c2: float
    bias_e: float
    generating_function: GeneratingFunction = GeneratingFunction.LOGISTIC
    tying: Tying = Tying.FREE_PRIOR_FREE_STRENGTH

    def __post_init__(self):
        object.__setattr__(self, "generating_function", GeneratingFunction(self.generating_function))
        object.__setattr__(self, "tying", Tying(self.tying))
        for name in ("prior_c1", "prior_c2", "strength_c1", "strength_c2", "bias_e"):
            object.__setattr__(self, name, float(getattr(self, name)))
        self.validate()

    @classmethod
    def shared(cls, prior, strength, bias, generating_function=GeneratingFunction.LOGISTIC):
        """Three-parameter network: one prior and one strength for both causes."""
        return cls(prior, prior, strength, strength, bias, generating_function,
                   Tying.SHARED_PRIOR_SHARED_STRENGTH)

    @property
    def weight_bounds(self) -> tuple[float, float]:
        if self.generating_function is GeneratingFunction.NOISY_OR:
            return PROBABILITY_BOUNDS
        return STRENGTH_BOUNDS

    def validate(self):
        for name in ("prior_c1", "prior_c2"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParameterOutOfRange(f"{name}={value} outside [0, 1]")
        lo, hi = self.weight_bounds
        for name in ("strength_c1", "strength_c2", "bias_e"):
            value = getattr(self, name)
            if not lo <= value <= hi:
                raise ParameterOutOfRange(
                    f"{name}={value} outside [{lo}, {hi}] for {self.generating_function.value}")
        if not self.tying.free_prior and self.prior_c1 != self.prior_c2:
            raise ParameterOutOfRange(f"tying {self.tying.value} requires prior_c1 == prior_c2")
        if not self.tying.free_strength and self.strength_c1 != self.strength_c2:
            raise ParameterOutOfRange(f"tying {self.tying.value} requires strength_c1 == strength_c2")

    def to_vector(self, tying=None) -> np.ndarray:
        """Free parameters in the order given by ``tying.vector_names``.

        ``tying`` defaults to the parameters' own; a more constrained tying is
        accepted only when the values it would merge are already equal.
        """
        tying = self.tying if tying is None else Tying(tying)
        if not tying.free_prior and self.prior_c1 != self.prior_c2:
            raise ParameterOutOfRange(f"tying {tying.value} needs equal priors")
        if not tying.free_strength and self.strength_c1 != self.strength_c2:
            raise ParameterOutOfRange(f"tying {tying.value} needs equal strengths")
        vec = [self.prior_c1, self.prior_c2] if tying.free_prior else [self.prior_c1]
        vec += [self.strength_c1, self.strength_c2] if tying.free_strength else [self.strength_c1]
        vec.append(self.bias_e)
        return np.array(vec, dtype=float)

    @classmethod
    def from_vector(cls, vector, tying, generating_function=GeneratingFunction.LOGISTIC):
        tying = Tying(tying)
        v = [float(x) for x in vector]
        if len(v) != tying.n_params:
            raise ValueError(f"tying {tying.value} expects {tying.n_params} values, got {len(v)}")
        if tying.free_prior:
            p1, p2, *v = v
        else:
            p1, *v = v
            p2 = p1
        if tying.free_strength:
            s1, s2, b = v
        else:
            s1, b = v
            s2 = s1
        return cls(p1, p2, s1, s2, b, generating_function, tying)

    def swapped(self) -> "ColliderParameters":
        """The same network with the roles of C1 and C2 exchanged."""
        return ColliderParameters(self.prior_c2, self.prior_c1, self.strength_c2, self.strength_c1,
                                  self.bias_e, self.generating_function, self.tying)


def vector_bounds(tying, generating_function=GeneratingFunction.LOGISTIC):
    """Box bounds for the free-parameter vector of a tying variant."""
    tying = Tying(tying)
    weight = STRENGTH_BOUNDS
    if GeneratingFunction(generating_function) is GeneratingFunction.NOISY_OR:
        weight = PROBABILITY_BOUNDS
    return [PROBABILITY_BOUNDS if name.startswith("prior") else weight for name in tying.vector_names]


@dataclass(frozen=True)
class JointTable:
    """Probability of each of the 8 states, in ``STATES`` order."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != 8:
            raise ValueError("a collider joint has exactly 8 states")

    @property
    def probs(self) -> dict[StateAssignment, float]:
        return dict(zip(STATES, self.values))

    def __getitem__(self, state) -> float:
        return self.values[StateAssignment(*state).index]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


@dataclass(frozen=True)
class EvidenceQuery:
    """``p(query_var = query_value | evidence)`` with evidence as (var, value) pairs."""

    query_var: str
    query_value: int = 1
    evidence: tuple[tuple[str, int], ...] = field(default=())

    def __post_init__(self):
        if isinstance(self.evidence, Mapping):
            object.__setattr__(self, "evidence", tuple(self.evidence.items()))
        ev = tuple(sorted(((str(k), int(v)) for k, v in self.evidence),
                          key=lambda kv: VARIABLES.index(kv[0])))
        object.__setattr__(self, "evidence", ev)
        if self.query_var not in VARIABLES:
            raise ValueError(f"unknown variable {self.query_var!r}")
        if self.query_value not in (0, 1):
            raise ValueError("query_value must be 0 or 1")
        seen = [var for var, _ in ev]
        if len(set(seen)) != len(seen):
            raise ValueError("duplicate evidence variable")
        for var, value in ev:
            if var not in VARIABLES or value not in (0, 1):
                raise ValueError(f"bad evidence entry {var}={value}")
        if self.query_var in seen:
            raise ValueError("query variable cannot also be evidence")

    @property
    def evidence_dict(self) -> dict[str, int]:
        return dict(self.evidence)

    def matches_evidence(self, state: StateAssignment) -> bool:
        return all(state.value(var) == value for var, value in self.evidence)

    def matches(self, state: StateAssignment) -> bool:
        return self.matches_evidence(state) and state.value(self.query_var) == self.query_value

    def masks(self) -> tuple[np.ndarray, np.ndarray]:
        """Boolean masks over STATES: (evidence holds, evidence and query hold)."""
        evidence = np.array([self.matches_evidence(s) for s in STATES])
        joint = np.array([self.matches(s) for s in STATES])
        return evidence, joint

    def swapped(self) -> "EvidenceQuery":
        swap = {"C1": "C2", "C2": "C1", "E": "E"}
        return EvidenceQuery(swap[self.query_var], self.query_value,
                             tuple((swap[var], value) for var, value in self.evidence))

    def notation(self) -> str:
        given = ", ".join(f"{var}={value}" for var, value in self.evidence)
        return f"p({self.query_var}={self.query_value} | {given})" if given else \
            f"p({self.query_var}={self.query_value})"


def logistic_effect_prob(params: ColliderParameters, c1: int, c2: int) -> float:
    """p(E=1 | c1, c2) with causes coded +1 (present) / -1 (absent)."""
    logit = (2 * c1 - 1) * params.strength_c1 + (2 * c2 - 1) * params.strength_c2 + params.bias_e
    return float(expit(logit))


def noisy_or_effect_prob(params: ColliderParameters, c1: int, c2: int) -> float:
    for name in ("strength_c1", "strength_c2", "bias_e"):
        value = getattr(params, name)
        if not 0.0 <= value <= 1.0:
            raise ParameterOutOfRange(f"noisy-OR {name}={value} outside [0, 1]")
    return 1.0 - (1.0 - params.bias_e) * (1.0 - params.strength_c1) ** c1 * (1.0 - params.strength_c2) ** c2


def joint_arrays(prior_c1, prior_c2, strength_c1, strength_c2, bias_e,
                 generating_function=GeneratingFunction.LOGISTIC) -> np.ndarray:
    """Vectorised joint: broadcasts parameter arrays, returns shape ``(..., 8)``."""
    p1, p2, w1, w2, b = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in
                                              (prior_c1, prior_c2, strength_c1, strength_c2, bias_e)))
    out = np.empty(p1.shape + (8,))
    noisy = GeneratingFunction(generating_function) is GeneratingFunction.NOISY_OR
    for c1 in (0, 1):
        for c2 in (0, 1):
            if noisy:
                p_e = 1.0 - (1.0 - b) * (1.0 - w1) ** c1 * (1.0 - w2) ** c2
            else:
                p_e = expit((2 * c1 - 1) * w1 + (2 * c2 - 1) * w2 + b)
            p_causes = (p1 if c1 else 1.0 - p1) * (p2 if c2 else 1.0 - p2)
            base = 4 * c1 + 2 * c2
            out[..., base] = (1.0 - p_e) * p_causes
            out[..., base + 1] = p_e * p_causes
    return out


def build_joint(params: ColliderParameters) -> JointTable:
    params.validate()
    values = joint_arrays(params.prior_c1, params.prior_c2, params.strength_c1,
                          params.strength_c2, params.bias_e, params.generating_function)
    return JointTable(tuple(float(v) for v in values))


def conditional_prob(joint: JointTable, query: EvidenceQuery) -> float:
    evidence, both = query.masks()
    probs = joint.as_array()
    denom = probs[evidence].sum()
    if denom <= 0.0:
        raise ZeroEvidenceMass(f"evidence of {query.notation()} has zero probability")
    return float(probs[both].sum() / denom)


def query_masks(queries: Sequence[EvidenceQuery]) -> tuple[np.ndarray, np.ndarray]:
    """Stacked evidence / evidence-and-query masks, each of shape ``(len(queries), 8)``."""
    pairs = [q.masks() for q in queries]
    return (np.array([p[0] for p in pairs], dtype=float),
            np.array([p[1] for p in pairs], dtype=float))


def predict_task_battery(params: ColliderParameters, catalog) -> list[float]:
    """Exact conditional probability for each task, in catalog order."""
    if not catalog:
        raise ValueError("empty task catalog")
    joint = build_joint(params)
    out = []
    for task in catalog:
        try:
            out.append(conditional_prob(joint, task.query))
        except ZeroEvidenceMass as exc:
            raise ZeroEvidenceMass(f"task {task.id}: {exc}", task_id=task.id) from None
    return out
