"""Causal reasoning on a collider network: normative and sampling models, prompts and analysis."""

__version__ = "0.1.0"

from .estimators import CBNRegressor, MutationSamplerRegressor
from .fitting import FitResult, FitSpec, ModelFamily, SamplerMethod, SamplerParameters, fit_model
from .model import (ColliderParameters, EvidenceQuery, GeneratingFunction, JointTable, Tying, build_joint,
                    conditional_prob, predict_task_battery)
from .prompts import CounterbalanceCode, DomainVocabulary, PromptBundle, load_vocabulary, render_prompt
from .sampler import SamplerConfig, exact_expected_predictions, expected_predictions
from .stats import JudgmentRecord, aggregate, bootstrap_ci, correlation_table, spearman
from .tasks import TaskGroup, TaskSpec, catalog, get_task, symmetric_counterpart

__all__ = [
    "CBNRegressor", "ColliderParameters", "CounterbalanceCode", "DomainVocabulary", "EvidenceQuery",
    "FitResult", "FitSpec", "GeneratingFunction", "JointTable", "JudgmentRecord", "ModelFamily",
    "MutationSamplerRegressor", "PromptBundle", "SamplerConfig", "SamplerMethod", "SamplerParameters",
    "TaskGroup", "TaskSpec", "Tying", "aggregate", "bootstrap_ci", "build_joint", "catalog",
    "conditional_prob", "correlation_table", "exact_expected_predictions", "expected_predictions",
    "fit_model", "get_task", "load_vocabulary", "predict_task_battery", "render_prompt", "spearman",
    "symmetric_counterpart",
]
