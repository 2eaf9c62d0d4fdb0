"""Mutation sampler: short Metropolis walks over the 8 collider states.

A chain starts at a prototype (all variables present or all absent), proposes
flipping one uniformly chosen variable per step and accepts with the
Metropolis ratio. Conditional probabilities are estimated from the states the
chain visited, so short chains inherit the prototypes' associative bias.

Two routes compute the expected estimate of a battery of tasks:

* ``expected_predictions`` - Monte Carlo over ``chain_count`` chains.
* ``exact_expected_predictions`` - forward recursion over the joint
  distribution of (current state, evidence count, evidence-and-query count),
  i.e. the ``chain_count -> inf`` limit without sampling noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DegenerateJoint
from .model import STATES, ColliderParameters, EvidenceQuery, JointTable, StateAssignment, build_joint

ALL_PRESENT = STATES[7]
ALL_ABSENT = STATES[0]
# xor masks flipping C1, C2, E in a state index
_FLIPS = np.array([4, 2, 1])
_BATCH_SIZE = 16384
_BLOCK_STEPS = 128


@dataclass(frozen=True)
class SamplerConfig:
    chain_length: float
    chain_count: int = 1000
    seed: int = 0
    prototype_weights: tuple[float, float] = (0.5, 0.5)
    empty_evidence_fallback: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "prototype_weights", tuple(float(w) for w in self.prototype_weights))
        if not self.chain_length >= 1:
            raise ValueError(f"chain_length must be >= 1, got {self.chain_length}")
        if int(self.chain_count) != self.chain_count or self.chain_count < 1:
            raise ValueError(f"chain_count must be a positive integer, got {self.chain_count}")
        w = self.prototype_weights
        if len(w) != 2 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-12:
            raise ValueError(f"prototype_weights must be two probabilities summing to 1, got {w}")
        if not 0.0 <= self.empty_evidence_fallback <= 1.0:
            raise ValueError("empty_evidence_fallback must lie in [0, 1]")

    @property
    def lengths(self) -> tuple[int, ...]:
        """Integer chain lengths whose predictions are interpolated."""
        lo, hi = math.floor(self.chain_length), math.ceil(self.chain_length)
        return (lo,) if lo == hi else (lo, hi)


@dataclass(frozen=True)
class ChainRecord:
    states: tuple[StateAssignment, ...]


def _probs(joint) -> np.ndarray:
    return joint.as_array() if isinstance(joint, JointTable) else np.asarray(joint, dtype=float)


def acceptance_probability(joint, current: StateAssignment, proposal: StateAssignment) -> float:
    pi = _probs(joint)
    here = pi[current.index]
    if here <= 0.0:
        raise DegenerateJoint(f"state {tuple(current)} has zero probability")
    return min(1.0, pi[proposal.index] / here)


def transition_step(joint, current: StateAssignment, rng: np.random.Generator) -> StateAssignment:
    """One Metropolis step with a uniform single-variable flip proposal."""
    var = ("C1", "C2", "E")[int(rng.integers(3))]
    proposal = current.flip(var)
    if rng.random() < acceptance_probability(joint, current, proposal):
        return proposal
    return current


def transition_matrix(joint) -> np.ndarray:
    """8x8 kernel ``K[s, s']`` of ``transition_step``; rows of zero-mass states stay put."""
    pi = _probs(joint)
    K = np.zeros((8, 8))
    for state in STATES:
        if pi[state.index] <= 0.0:
            K[state.index, state.index] = 1.0
            continue
        for var in ("C1", "C2", "E"):
            proposal = state.flip(var)
            K[state.index, proposal.index] = acceptance_probability(pi, state, proposal) / 3.0
        K[state.index, state.index] = 1.0 - K[state.index].sum()
    return K


def _start_state(config: SamplerConfig, rng) -> StateAssignment:
    return ALL_PRESENT if rng.random() < config.prototype_weights[0] else ALL_ABSENT


def run_chain(joint, config: SamplerConfig, rng: np.random.Generator) -> ChainRecord:
    state = _start_state(config, rng)
    if _probs(joint)[state.index] <= 0.0:
        raise DegenerateJoint(f"prototype {tuple(state)} has zero probability")
    states = [state]
    for _ in range(math.ceil(config.chain_length) - 1):
        state = transition_step(joint, state, rng)
        states.append(state)
    return ChainRecord(tuple(states))


def chain_estimate(chain: ChainRecord, query: EvidenceQuery, fallback: float = 0.5) -> float:
    matching = [s for s in chain.states if query.matches_evidence(s)]
    if not matching:
        return fallback
    return sum(s.value(query.query_var) == query.query_value for s in matching) / len(matching)


def _masks(queries):
    ev = np.array([q.masks()[0] for q in queries], dtype=bool)
    both = np.array([q.masks()[1] for q in queries], dtype=bool)
    return ev, both


def _queries(catalog) -> list[EvidenceQuery]:
    if not catalog:
        raise ValueError("empty task catalog")
    return [getattr(task, "query", task) for task in catalog]


def _ratio_table(pi: np.ndarray) -> np.ndarray:
    """``table[s, v]`` = Metropolis acceptance for flipping variable v in state s."""
    table = np.zeros((8, 3))
    for s in range(8):
        if pi[s] > 0:
            table[s] = np.minimum(1.0, pi[s ^ _FLIPS] / pi[s])
    return table


def _batch_sizes(chain_count):
    full, rest = divmod(chain_count, _BATCH_SIZE)
    return [_BATCH_SIZE] * full + ([rest] if rest else [])


def _step_stream(rng, size):
    # fixed block shape keeps the random stream independent of the chain length
    while True:
        variables = rng.integers(0, 3, size=(_BLOCK_STEPS, size))
        uniforms = rng.random((_BLOCK_STEPS, size))
        yield from zip(variables, uniforms)


def _check_prototypes(pi, weights):
    for proto, weight in ((7, weights[0]), (0, weights[1])):
        if weight > 0 and pi[proto] <= 0:
            raise DegenerateJoint(f"prototype {tuple(STATES[proto])} has zero probability")


def monte_carlo_by_length(joint, queries: Sequence[EvidenceQuery], config: SamplerConfig,
                          lengths: Sequence[int]) -> dict[int, np.ndarray]:
    """Mean chain estimate of each query for several integer chain lengths.

    Each length reads a prefix of the same simulated chains, so the value for
    one length does not depend on which other lengths were requested.
    """
    pi = _probs(joint)
    _check_prototypes(pi, config.prototype_weights)
    ratio = _ratio_table(pi)
    ev_mask, both_mask = (m.T.astype(float) for m in _masks(queries))
    wanted = sorted(set(int(n) for n in lengths))
    if wanted[0] < 1:
        raise ValueError("chain lengths must be >= 1")
    fallback = config.empty_evidence_fallback
    totals = {n: np.zeros(len(queries)) for n in wanted}

    batches = _batch_sizes(int(config.chain_count))
    streams = np.random.SeedSequence(config.seed).spawn(len(batches))
    for size, stream in zip(batches, streams):
        rng = np.random.default_rng(stream)
        rows = np.arange(size)
        state = np.where(rng.random(size) < config.prototype_weights[0], 7, 0)
        counts = np.zeros((size, 8))
        counts[rows, state] += 1
        steps = _step_stream(rng, size)
        for n in range(1, wanted[-1] + 1):
            if n > 1:
                var, u = next(steps)
                accept = u < ratio[state, var]
                state = np.where(accept, state ^ _FLIPS[var], state)
                counts[rows, state] += 1
            if n in totals:
                n_ev = counts @ ev_mask
                n_both = counts @ both_mask
                est = np.where(n_ev > 0, n_both / np.maximum(n_ev, 1.0), fallback)
                totals[n] += est.sum(axis=0)
    return {n: totals[n] / config.chain_count for n in wanted}


def exact_by_length(joint, queries: Sequence[EvidenceQuery], max_length: int,
                    prototype_weights=(0.5, 0.5), fallback: float = 0.5) -> np.ndarray:
    """Expected chain estimate for every length 1..max_length, shape ``(max_length, T)``.

    With ``b`` the number of visited states matching a task's evidence and
    ``a`` those also matching its query, the expected estimate is
    ``sum_k E[a; b=k] / k + fallback * P(b=0)``. Both ``P[s, t, k]`` and the
    first moment ``M[s, t, k] = E[a; state=s, b=k]`` evolve linearly under
    the kernel, so no joint table over ``(a, b)`` is needed.
    """
    pi = _probs(joint)
    _check_prototypes(pi, prototype_weights)
    K = transition_matrix(pi)
    ev_mask, both_mask = _masks(queries)
    n_tasks = len(queries)
    size = max_length + 1
    enter_ev = ev_mask.T[:, :, None]          # (8, T, 1)
    enter_both = both_mask.T[:, :, None].astype(float)
    inv_k = np.zeros(size)
    inv_k[1:] = 1.0 / np.arange(1, size)

    P = np.zeros((8, n_tasks, size))
    for proto, weight in ((7, prototype_weights[0]), (0, prototype_weights[1])):
        P[proto, np.arange(n_tasks), ev_mask[:, proto].astype(int)] += weight
    M = enter_both * P

    def estimate(P, M):
        return (M * inv_k).sum(axis=(0, 2)) + fallback * P[:, :, 0].sum(axis=0)

    out = np.empty((max_length, n_tasks))
    out[0] = estimate(P, M)
    for n in range(2, max_length + 1):
        P = _enter(np.tensordot(K.T, P, axes=1), enter_ev)
        M = _enter(np.tensordot(K.T, M, axes=1), enter_ev) + enter_both * P
        out[n - 1] = estimate(P, M)
    return out


def _enter(moved, enter_ev):
    shifted = np.zeros_like(moved)
    shifted[..., 1:] = moved[..., :-1]
    return np.where(enter_ev, shifted, moved)


def _interpolate(chain_length, by_length):
    lo, hi = math.floor(chain_length), math.ceil(chain_length)
    if lo == hi:
        return np.asarray(by_length(lo), dtype=float)
    frac = chain_length - lo
    return (1.0 - frac) * np.asarray(by_length(lo)) + frac * np.asarray(by_length(hi))


def expected_predictions(params: ColliderParameters, config: SamplerConfig, catalog) -> list[float]:
    """Monte Carlo mean of the chain estimate for each task (deterministic given the seed).

    Non-integer chain lengths interpolate linearly between the neighbouring
    integer lengths, both read from the same chains.
    """
    queries = _queries(catalog)
    joint = build_joint(params)
    results = monte_carlo_by_length(joint, queries, config, config.lengths)
    return [float(x) for x in _interpolate(config.chain_length, results.__getitem__)]


def exact_expected_predictions(params: ColliderParameters, chain_length: float, catalog,
                               prototype_weights=(0.5, 0.5), fallback: float = 0.5) -> list[float]:
    """The ``chain_count -> inf`` limit of ``expected_predictions``."""
    if not chain_length >= 1:
        raise ValueError(f"chain_length must be >= 1, got {chain_length}")
    queries = _queries(catalog)
    table = exact_by_length(build_joint(params), queries, math.ceil(chain_length),
                            prototype_weights, fallback)
    return [float(x) for x in _interpolate(chain_length, lambda n: table[n - 1])]
