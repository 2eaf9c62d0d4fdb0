"""scikit-learn compatible wrappers around the fitting routines.

``X`` is a column of task ids (``"I"`` .. ``"XI"``) and ``y`` the 0-100
judgments, so the models drop into ``cross_val_score``, ``GridSearchCV`` and
``clone`` like any regressor::

    >>> model = CBNRegressor(tying="3p").fit(["I", "II", "III", "IV"], [20, 55, 85, 50])
    >>> model.predict(["VII"])  # doctest: +SKIP
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .fitting import FitSpec, ModelFamily, evaluate, fit_model, model_predictions
from .validation import check_judgments, check_tasks


class _ColliderRegressor(RegressorMixin, BaseEstimator):
    _family = ModelFamily.CBN

    def _spec(self) -> FitSpec:
        raise NotImplementedError

    def fit(self, X, y):
        tasks = check_tasks(X)
        values = check_judgments(y, len(tasks))
        spec = self._spec()
        result = fit_model(spec, list(zip(tasks, values)))
        self.spec_ = spec
        self.result_ = result
        self.params_ = result.parameters
        self.n_params_ = result.n_params
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        """Predicted judgments on the 0-100 scale."""
        check_is_fitted(self, "result_")
        tasks = check_tasks(X)
        return 100.0 * model_predictions(self.params_, self.spec_, tasks)

    def predict_proba(self, X):
        """Predicted probability that the query variable is present."""
        return self.predict(X) / 100.0

    def evaluate(self, X, y):
        """FitResult metrics (SSE, R, AIC, loss) of the fitted parameters on new data."""
        check_is_fitted(self, "result_")
        tasks = check_tasks(X)
        values = check_judgments(y, len(tasks))
        return evaluate(self.params_, self.spec_, list(zip(tasks, values)))

    @property
    def aic_(self):
        check_is_fitted(self, "result_")
        return self.result_.aic


class CBNRegressor(_ColliderRegressor):
    """Collider causal Bayes net fitted by least squares."""

    def __init__(self, tying="3p", generating_function="logistic", grid_resolution=None,
                 top_k=5, refine_tolerance=1e-10, max_refine_iterations=2000, seed=0):
        self.tying = tying
        self.generating_function = generating_function
        self.grid_resolution = grid_resolution
        self.top_k = top_k
        self.refine_tolerance = refine_tolerance
        self.max_refine_iterations = max_refine_iterations
        self.seed = seed

    def _spec(self):
        return FitSpec(ModelFamily.CBN, self.tying, self.generating_function,
                       grid_resolution=self.grid_resolution, top_k=self.top_k,
                       refine_tolerance=self.refine_tolerance,
                       max_refine_iterations=self.max_refine_iterations, seed=self.seed)


class MutationSamplerRegressor(_ColliderRegressor):
    """Mutation sampler with a free chain length, fitted by least squares.

    ``method="exact"`` uses the infinite-chain-count expectation;
    ``"montecarlo"`` averages ``chain_count`` simulated chains at ``seed``.
    """

    def __init__(self, tying="3p", lambda_bounds=(1.0, 100.0), method="exact", chain_count=2000,
                 prototype_weights=(0.5, 0.5), empty_evidence_fallback=0.5, grid_resolution=None,
                 top_k=5, refine_tolerance=1e-10, max_refine_iterations=2000, seed=0):
        self.tying = tying
        self.lambda_bounds = lambda_bounds
        self.method = method
        self.chain_count = chain_count
        self.prototype_weights = prototype_weights
        self.empty_evidence_fallback = empty_evidence_fallback
        self.grid_resolution = grid_resolution
        self.top_k = top_k
        self.refine_tolerance = refine_tolerance
        self.max_refine_iterations = max_refine_iterations
        self.seed = seed

    def _spec(self):
        return FitSpec(ModelFamily.MUTATION_SAMPLER, self.tying, "logistic",
                       lambda_bounds=tuple(self.lambda_bounds), grid_resolution=self.grid_resolution,
                       top_k=self.top_k, refine_tolerance=self.refine_tolerance,
                       max_refine_iterations=self.max_refine_iterations, seed=self.seed,
                       sampler_method=self.method, chain_count=self.chain_count,
                       prototype_weights=tuple(self.prototype_weights),
                       empty_evidence_fallback=self.empty_evidence_fallback)

    @property
    def chain_length_(self):
        check_is_fitted(self, "result_")
        return self.result_.chain_length
