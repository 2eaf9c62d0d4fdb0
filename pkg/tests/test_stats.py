import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colliderlab.exceptions import ConstantVector, EmptyInput, LengthMismatch
from colliderlab.stats import (AgentType, JudgmentRecord, aggregate, bootstrap_ci, correlation_table,
                               spearman)
from colliderlab.tasks import TASK_IDS, TaskGroup

vectors = st.lists(st.integers(0, 8), min_size=3, max_size=25)


def record(agent="h1", task="I", response=50.0, domain="sociology", cb=1, kind="human", model=""):
    return JudgmentRecord(agent, kind, model, domain, cb, task, response)


class TestSpearman:
    def test_examples(self):
        assert spearman([1, 2, 3, 4], [1, 2, 3, 4]) == 1.0
        assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == -1.0
        assert spearman([1, 2, 3], [1, 3, 2]) == 0.5

    def test_errors(self):
        with pytest.raises(ConstantVector):
            spearman([1, 1, 1], [1, 2, 3])
        with pytest.raises(LengthMismatch):
            spearman([1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            spearman([1], [2])

    def test_matches_scipy_with_ties(self):
        from scipy.stats import spearmanr
        rng = np.random.default_rng(0)
        for _ in range(50):
            x, y = rng.integers(0, 5, 20), rng.integers(0, 5, 20)
            assert spearman(x, y) == pytest.approx(spearmanr(x, y).statistic, abs=1e-12)

    @given(vectors, vectors)
    def test_symmetric_and_monotone_invariant(self, x, y):
        n = min(len(x), len(y))
        x, y = x[:n], y[:n]
        if len(set(x)) < 2 or len(set(y)) < 2:
            return
        rho = spearman(x, y)
        assert rho == spearman(y, x)
        assert rho == spearman([v ** 3 + 7 for v in x], [np.exp(v) for v in y])
        assert -1.0 <= rho <= 1.0


class TestBootstrap:
    def test_constant_data(self):
        assert bootstrap_ci([7.0] * 10) == (7.0, 7.0)

    def test_two_point_data(self):
        low, high = bootstrap_ci([0.0, 100.0], replicates=10_000, seed=0)
        assert low == 0.0 and high == 100.0

    def test_percentiles(self):
        values = np.arange(20.0)
        rng = np.random.default_rng(3)
        means = values[rng.integers(0, 20, size=(500, 20))].mean(axis=1)
        assert bootstrap_ci(values, 500, 0.9, seed=3) == tuple(np.percentile(means, [5, 95]))

    def test_validation(self):
        with pytest.raises(EmptyInput):
            bootstrap_ci([])
        with pytest.raises(ValueError):
            bootstrap_ci([1.0], replicates=10)
        with pytest.raises(ValueError):
            bootstrap_ci([1.0], level=1.0)

    def test_contains_mean(self):
        rng = np.random.default_rng(1)
        hits = 0
        for i in range(200):
            values = rng.normal(50, 15, size=int(rng.integers(5, 40)))
            low, high = bootstrap_ci(values, 1000, seed=i)
            hits += low <= values.mean() <= high
        assert hits >= 198


class TestAggregate:
    def test_single_record(self):
        (row,) = aggregate([record(response=33.0)])
        assert row.mean == row.ci_low == row.ci_high == 33.0 and row.n == 1
        assert row.group is TaskGroup.PREDICTIVE

    def test_cardinality_and_order(self):
        recs = [record("h1", t, 40.0) for t in TASK_IDS]
        recs += [record("m", t, 60.0, kind="llm", model="gpt") for t in TASK_IDS]
        rows = aggregate(recs)
        assert len(rows) == 22
        assert [r.task_id for r in rows[::2]] == list(TASK_IDS)
        assert rows[0].get("agent_type") == "human" and rows[1].get("model_name") == "gpt"

    def test_permutation_invariant(self):
        rng = np.random.default_rng(4)
        recs = [record(f"h{i}", t, float(rng.uniform(0, 100))) for i in range(6) for t in TASK_IDS]
        shuffled = recs[:]
        random.Random(0).shuffle(shuffled)
        assert aggregate(recs, replicates=200) == aggregate(shuffled, replicates=200)

    def test_bad_inputs(self):
        with pytest.raises(EmptyInput):
            aggregate([])
        with pytest.raises(ValueError):
            aggregate([record()], group_by=("colour",))

    def test_record_validation(self):
        with pytest.raises(ValueError):
            record(response=101)
        with pytest.raises(ValueError):
            record(cb=5)
        with pytest.raises(ValueError):
            record(domain="physics")
        assert record(kind="LLM", model="x").agent_type is AgentType.LLM
        assert record(kind="LLM", model="x").agent == "x" and record().agent == "Human"


class TestCorrelationTable:
    def test_layout(self):
        rng = np.random.default_rng(5)
        recs = []
        for domain in ("economy", "sociology", "weather"):
            for cb in (1, 2):
                for t in TASK_IDS:
                    value = float(rng.uniform(0, 100))
                    recs.append(record("h", t, value, domain, cb))
                    recs.append(record("m", t, value, domain, cb, "llm", "copycat"))
                    recs.append(record("f", t, 50.0, domain, cb, "llm", "flat"))
        rows = {row.model: row for row in correlation_table(recs)}
        assert set(rows) == {"copycat", "flat"}
        assert rows["copycat"].pooled == 1.0
        assert all(v == 1.0 for v in rows["copycat"].by_domain.values())
        assert rows["flat"].pooled is None

    def test_pooled_equals_spearman_of_cell_means(self):
        rng = np.random.default_rng(6)
        recs, ref, other = [], {}, {}
        for domain in ("economy", "weather"):
            for t in TASK_IDS:
                a, b = rng.uniform(0, 100, 2)
                recs += [record("h1", t, a, domain), record("h2", t, b, domain)]
                c = float(rng.uniform(0, 100))
                recs.append(record("m", t, c, domain, kind="llm", model="llm"))
                ref[(domain, t)], other[(domain, t)] = (a + b) / 2, c
        (row,) = correlation_table(recs)
        keys = sorted(ref)
        assert row.pooled == pytest.approx(spearman([ref[k] for k in keys], [other[k] for k in keys]), abs=1e-15)
        assert row.by_domain["sociology"] is None

    def test_missing_reference(self):
        with pytest.raises(ValueError):
            correlation_table([record(kind="llm", model="x")])
