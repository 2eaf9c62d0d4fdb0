"""Least-squares fitting of collider networks and the mutation sampler.

Fits seed a bounded Nelder-Mead search with the best points of a coarse grid.
Judgments live on the 0-100 scale; model predictions are probabilities and
are multiplied by 100 before comparison.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .exceptions import LengthMismatch, NonFiniteObjective, ZeroEvidenceMass
from .model import (ColliderParameters, GeneratingFunction, Tying, joint_arrays, query_masks,
                    vector_bounds)
from .sampler import SamplerConfig, exact_by_length, monte_carlo_by_length

logger = logging.getLogger(__name__)

DEFAULT_PRIOR_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
DEFAULT_WEIGHT_GRID = (-2.0, -1.0, 0.0, 1.0, 2.0)
DEFAULT_LAMBDA_GRID = tuple(range(1, 13)) + (16, 24, 32, 48, 64)
SSE_FLOOR = 1e-9


class ModelFamily(str, enum.Enum):
    CBN = "cbn"
    MUTATION_SAMPLER = "sampler"


class SamplerMethod(str, enum.Enum):
    EXACT = "exact"
    MONTE_CARLO = "montecarlo"


@dataclass(frozen=True)
class SamplerParameters:
    network: ColliderParameters
    chain_length: float


@dataclass(frozen=True)
class FitSpec:
    model_family: ModelFamily = ModelFamily.CBN
    tying: Tying = Tying.SHARED_PRIOR_SHARED_STRENGTH
    generating_function: GeneratingFunction = GeneratingFunction.LOGISTIC
    lambda_bounds: tuple[float, float] = (1.0, 100.0)
    grid_resolution: int | tuple[int, ...] | None = None
    top_k: int = 5
    refine_tolerance: float = 1e-10
    max_refine_iterations: int = 2000
    seed: int = 0
    sampler_method: SamplerMethod = SamplerMethod.EXACT
    chain_count: int = 2000
    prototype_weights: tuple[float, float] = (0.5, 0.5)
    empty_evidence_fallback: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "model_family", ModelFamily(self.model_family))
        object.__setattr__(self, "tying", Tying(self.tying))
        object.__setattr__(self, "generating_function", GeneratingFunction(self.generating_function))
        object.__setattr__(self, "sampler_method", SamplerMethod(self.sampler_method))
        if self.is_sampler and self.generating_function is not GeneratingFunction.LOGISTIC:
            raise ValueError("the mutation sampler needs a strictly positive (logistic) joint")
        if not self.refine_tolerance > 0:
            raise ValueError("refine_tolerance must be positive")
        if self.top_k < 1 or self.max_refine_iterations < 1:
            raise ValueError("top_k and max_refine_iterations must be >= 1")
        lo, hi = self.lambda_bounds
        if not 1 <= lo < hi:
            raise ValueError(f"bad lambda_bounds {self.lambda_bounds}")
        res = self.grid_resolution
        if res is not None:
            sizes = (res,) * self.n_network_params if isinstance(res, int) else tuple(res)
            if len(sizes) != self.n_network_params or min(sizes) < 2:
                raise ValueError(f"grid_resolution needs {self.n_network_params} entries >= 2")

    @property
    def is_sampler(self) -> bool:
        return self.model_family is ModelFamily.MUTATION_SAMPLER

    @property
    def n_network_params(self) -> int:
        return self.tying.n_params

    @property
    def n_params(self) -> int:
        return self.n_network_params + self.is_sampler

    @property
    def parameter_names(self) -> tuple[str, ...]:
        names = self.tying.vector_names
        return names + ("chain_length",) if self.is_sampler else names

    @property
    def bounds(self) -> list[tuple[float, float]]:
        box = vector_bounds(self.tying, self.generating_function)
        if self.is_sampler:
            box.append(tuple(float(x) for x in self.lambda_bounds))
        return box

    def grid_axes(self) -> list[np.ndarray]:
        noisy = self.generating_function is GeneratingFunction.NOISY_OR
        res = self.grid_resolution
        sizes = None if res is None else ((res,) * self.n_network_params if isinstance(res, int) else res)
        axes = []
        for i, name in enumerate(self.tying.vector_names):
            is_prob = name.startswith("prior") or noisy
            if sizes is None:
                axis = DEFAULT_PRIOR_GRID if is_prob else DEFAULT_WEIGHT_GRID
            else:
                lo, hi = (0.1, 0.9) if is_prob else (-2.0, 2.0)
                axis = np.linspace(lo, hi, sizes[i])
            axes.append(np.asarray(axis, dtype=float))
        if self.is_sampler:
            lo, hi = self.lambda_bounds
            axes.append(np.array([x for x in DEFAULT_LAMBDA_GRID if lo <= x <= hi], dtype=float))
        return axes

    def decode(self, vector):
        """Free-parameter vector to ColliderParameters (or SamplerParameters)."""
        vector = np.asarray(vector, dtype=float)
        network = ColliderParameters.from_vector(vector[:self.n_network_params], self.tying,
                                                 self.generating_function)
        if self.is_sampler:
            return SamplerParameters(network, float(vector[-1]))
        return network

    def encode(self, params) -> np.ndarray:
        if isinstance(params, SamplerParameters):
            return np.append(params.network.to_vector(self.tying), params.chain_length)
        return params.to_vector(self.tying)

    def sampler_config(self, chain_length) -> SamplerConfig:
        return SamplerConfig(chain_length, self.chain_count, self.seed, self.prototype_weights,
                             self.empty_evidence_fallback)


@dataclass(frozen=True)
class FitResult:
    parameters: ColliderParameters | SamplerParameters
    n_params: int
    sse: float
    r_fit: float | None
    aic: float
    mae_loss: float
    n_observations: int
    converged: bool
    predictions: tuple[float, ...] = ()
    objective_trace: tuple[float, ...] = field(default=(), repr=False)

    @property
    def r_defined(self) -> bool:
        return self.r_fit is not None

    @property
    def network(self) -> ColliderParameters:
        p = self.parameters
        return p.network if isinstance(p, SamplerParameters) else p

    @property
    def chain_length(self) -> float | None:
        p = self.parameters
        return p.chain_length if isinstance(p, SamplerParameters) else None


def _split_judgments(judgments):
    if not judgments:
        raise ValueError("at least one judgment is required")
    tasks = [task for task, _ in judgments]
    values = np.array([float(value) for _, value in judgments])
    return tasks, values


class _Predictor:
    """Predictions of one model family for a fixed list of observed tasks."""

    def __init__(self, spec: FitSpec, tasks):
        self.spec = spec
        self.tasks = list(tasks)
        unique = list(dict.fromkeys(t.query for t in self.tasks))
        self.queries = unique
        self.index = np.array([unique.index(t.query) for t in self.tasks])
        self.ev_mask, self.both_mask = query_masks(unique)

    def _conditionals(self, joints):
        denom = joints @ self.ev_mask.T
        if np.any(denom <= 0):
            bad = int(np.argwhere(denom <= 0)[0][-1])
            task = next(t for t in self.tasks if t.query == self.queries[bad])
            raise ZeroEvidenceMass(f"task {task.id}: evidence of {task.query.notation()} has zero probability",
                                   task_id=task.id)
        return (joints @ self.both_mask.T) / denom

    def network_batch(self, networks) -> np.ndarray:
        """Exact CBN predictions for a matrix of network vectors, shape (N, n_obs)."""
        networks = np.atleast_2d(np.asarray(networks, dtype=float))
        cols = _expand_columns(networks, self.spec.tying)
        joints = joint_arrays(*cols, self.spec.generating_function)
        return self._conditionals(joints)[:, self.index]

    def sampler_by_length(self, network_vector, lengths) -> dict[int, np.ndarray]:
        spec = self.spec
        cols = _expand_columns(np.atleast_2d(network_vector), spec.tying)
        joint = joint_arrays(*cols)[0]
        if spec.sampler_method is SamplerMethod.EXACT:
            table = exact_by_length(joint, self.queries, max(lengths), spec.prototype_weights,
                                    spec.empty_evidence_fallback)
            return {n: table[n - 1][self.index] for n in lengths}
        config = spec.sampler_config(max(lengths))
        found = monte_carlo_by_length(joint, self.queries, config, lengths)
        return {n: found[n][self.index] for n in lengths}

    def predict(self, vector) -> np.ndarray:
        vector = np.asarray(vector, dtype=float)
        if not self.spec.is_sampler:
            return self.network_batch(vector)[0]
        lam = float(vector[-1])
        lo, hi = math.floor(lam), math.ceil(lam)
        found = self.sampler_by_length(vector[:-1], sorted({lo, hi}))
        if lo == hi:
            return found[lo]
        frac = lam - lo
        return (1.0 - frac) * found[lo] + frac * found[hi]


def _expand_columns(networks, tying):
    """Network vectors (N, k) to the five joint_arrays columns."""
    cols = list(networks.T)
    p1 = cols.pop(0)
    p2 = cols.pop(0) if tying.free_prior else p1
    s1 = cols.pop(0)
    s2 = cols.pop(0) if tying.free_strength else s1
    return p1, p2, s1, s2, cols.pop(0)


def model_predictions(params, spec: FitSpec, tasks) -> np.ndarray:
    """Model probabilities (0-1) for each task under ``spec.model_family``."""
    return _Predictor(spec, tasks).predict(spec.encode(params))


def sse_objective(params, spec: FitSpec, judgments) -> float:
    tasks, values = _split_judgments(judgments)
    pred = model_predictions(params, spec, tasks)
    return float(np.sum((values - 100.0 * pred) ** 2))


def aic(sse: float, n: int, k: int) -> float:
    """Least-squares AIC ``n*ln(SSE/n) + 2k`` with additive constants dropped."""
    if n <= 0:
        raise ValueError("n must be positive")
    if sse < 0:
        raise ValueError("sse must be non-negative")
    return n * math.log(max(sse, SSE_FLOOR) / n) + 2 * k


def mae_loss(judgments, predictions) -> float:
    """Mean absolute error between 0-100 judgments and 100 * predictions."""
    y = np.asarray(judgments, dtype=float)
    p = np.asarray(predictions, dtype=float)
    if y.shape != p.shape:
        raise LengthMismatch(f"{y.size} judgments vs {p.size} predictions")
    if y.size == 0:
        raise ValueError("mae_loss needs at least one value")
    return float(np.mean(np.abs(y - 100.0 * p)))


def pearson_r(x, y) -> float | None:
    """Pearson correlation, or None when either vector is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"{x.size} vs {y.size} values")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = math.sqrt(float(dx @ dx)), math.sqrt(float(dy @ dy))
    if x.size < 2 or sx <= 1e-12 * max(1.0, float(np.abs(x).max())) or \
            sy <= 1e-12 * max(1.0, float(np.abs(y).max())):
        return None
    return float(np.clip(dx @ dy / (sx * sy), -1.0, 1.0))


def grid_seed(spec: FitSpec, judgments, k: int | None = None) -> list[tuple[object, float]]:
    """Evaluate the SSE on every grid point; return the ``k`` best as (params, sse)."""
    tasks, values = _split_judgments(judgments)
    k = spec.top_k if k is None else k
    predictor = _Predictor(spec, tasks)
    axes = spec.grid_axes()
    network_axes = axes[:spec.n_network_params]
    points = np.array(list(itertools.product(*network_axes)))
    if not spec.is_sampler:
        pred = predictor.network_batch(points)
        sse = np.sum((values - 100.0 * pred) ** 2, axis=1)
        candidates = points
    else:
        lambdas = [int(x) for x in axes[-1]]
        rows, scores = [], []
        for point in points:
            by_length = predictor.sampler_by_length(point, lambdas)
            for lam in lambdas:
                rows.append(np.append(point, lam))
                scores.append(np.sum((values - 100.0 * by_length[lam]) ** 2))
        candidates, sse = np.array(rows), np.array(scores)
    order = np.argsort(sse, kind="stable")[:k]
    return [(spec.decode(candidates[i]), float(sse[i])) for i in order]


def _initial_simplex(x0, bounds, scale=0.1):
    simplex = [np.array(x0, dtype=float)]
    for i, (lo, hi) in enumerate(bounds):
        step = scale * (hi - lo)
        vertex = np.array(x0, dtype=float)
        vertex[i] = vertex[i] + step if vertex[i] + step <= hi else vertex[i] - step
        simplex.append(vertex)
    return np.array(simplex)


def _summarise(spec, params, values, pred, converged, trace=()):
    n = int(values.size)
    sse = float(np.sum((values - 100.0 * pred) ** 2))
    return FitResult(
        parameters=params,
        n_params=spec.n_params,
        sse=sse,
        r_fit=pearson_r(values, 100.0 * pred),
        aic=aic(sse, n, spec.n_params),
        mae_loss=mae_loss(values, pred),
        n_observations=n,
        converged=bool(converged),
        predictions=tuple(float(x) for x in 100.0 * pred),
        objective_trace=tuple(trace),
    )


def refine(seed_params, spec: FitSpec, judgments) -> FitResult:
    """Bounded Nelder-Mead from ``seed_params``; stops when the simplex's
    objective spread drops below ``spec.refine_tolerance``."""
    tasks, values = _split_judgments(judgments)
    predictor = _Predictor(spec, tasks)
    bounds = spec.bounds
    x0 = spec.encode(seed_params)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError(f"seed {x0} outside bounds {bounds}")

    def objective(x):
        x = np.clip(x, lo, hi)
        try:
            pred = predictor.predict(x)
        except ZeroEvidenceMass:
            # only reachable on the boundary of the prior box; treat as infeasible
            return math.inf
        value = float(np.sum((values - 100.0 * pred) ** 2))
        if math.isnan(value):
            raise NonFiniteObjective(f"objective is NaN at {dict(zip(spec.parameter_names, x))}")
        return value

    start = objective(x0)
    if not math.isfinite(start):
        raise NonFiniteObjective(f"objective is not finite at the seed {x0}")
    trace = [start]

    def record(intermediate_result):
        trace.append(float(intermediate_result.fun))

    result = minimize(objective, x0, method="Nelder-Mead", bounds=bounds, callback=record,
                      options={"initial_simplex": _initial_simplex(x0, bounds),
                               "fatol": spec.refine_tolerance, "xatol": np.inf,
                               "maxiter": spec.max_refine_iterations,
                               "maxfev": 4 * spec.max_refine_iterations})
    best = np.clip(result.x, lo, hi)
    if result.fun > start:
        best = x0
    params = spec.decode(best)
    pred = predictor.predict(best)
    return _summarise(spec, params, values, pred, result.success, trace)


def fit_model(spec: FitSpec, judgments) -> FitResult:
    """Grid search, then refine from each of the ``top_k`` seeds; keep the lowest SSE."""
    seeds = grid_seed(spec, judgments)
    best = None
    for params, seed_sse in seeds:
        result = refine(params, spec, judgments)
        logger.debug("seed sse %.6g -> %.6g", seed_sse, result.sse)
        if best is None or result.sse < best.sse:
            best = result
    return best


def evaluate(params, spec: FitSpec, judgments) -> FitResult:
    """Fit metrics for fixed parameters, without optimisation."""
    tasks, values = _split_judgments(judgments)
    pred = model_predictions(params, spec, tasks)
    return _summarise(spec, params, values, pred, True)


def synthetic_judgments(params, spec: FitSpec, tasks: Sequence, noise_sd: float = 0.0,
                        rng: np.random.Generator | None = None) -> list:
    """Judgments generated from a model, optionally with Gaussian noise clipped to [0, 100]."""
    pred = 100.0 * model_predictions(params, spec, tasks)
    if noise_sd > 0:
        rng = np.random.default_rng() if rng is None else rng
        pred = np.clip(pred + rng.normal(0.0, noise_sd, size=pred.shape), 0.0, 100.0)
    return list(zip(tasks, (float(x) for x in pred)))
