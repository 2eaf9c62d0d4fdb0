import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colliderlab.exceptions import DegenerateJoint
from colliderlab.model import STATES, ColliderParameters, EvidenceQuery, build_joint, conditional_prob
from colliderlab.sampler import (ChainRecord, SamplerConfig, acceptance_probability, chain_estimate,
                                 exact_by_length, exact_expected_predictions, expected_predictions,
                                 monte_carlo_by_length, run_chain, transition_matrix, transition_step)
from colliderlab.tasks import catalog, get_task

BASELINE = ColliderParameters.shared(0.5, 1.0, 0.0)
TASKS = catalog()
VII = get_task("VII").query


def state(*bits):
    return STATES[4 * bits[0] + 2 * bits[1] + bits[2]]


def enumerate_expected(pi, query, length, weights=(0.5, 0.5), fallback=0.5):
    """Expected chain estimate by summing over every proposal/accept path (small lengths only)."""
    pi = np.asarray(pi)
    total = 0.0
    for start, w in ((7, weights[0]), (0, weights[1])):
        paths = [((start,), w)]
        for _ in range(length - 1):
            grown = []
            for path, prob in paths:
                s = path[-1]
                for flip in (4, 2, 1):
                    t = s ^ flip
                    a = min(1.0, pi[t] / pi[s])
                    if a > 0:
                        grown.append((path + (t,), prob * a / 3))
                    if a < 1:
                        grown.append((path + (s,), prob * (1 - a) / 3))
            paths = grown
        for path, prob in paths:
            total += prob * chain_estimate(ChainRecord(tuple(STATES[i] for i in path)), query, fallback)
    return total


class TestKernel:
    def test_example_acceptance(self):
        joint = build_joint(BASELINE)
        ratio = acceptance_probability(joint, state(1, 1, 1), state(0, 1, 1))
        # pi(0,1,1) / pi(1,1,1) = (1/8) / (sigma(2) / 4)
        assert ratio == pytest.approx(0.5 * (1 + np.exp(-2.0)), abs=1e-15)
        assert ratio == pytest.approx(0.567665, abs=5e-6)
        assert acceptance_probability(joint, state(0, 1, 1), state(1, 1, 1)) == 1.0

    def test_uniform_joint_accepts_everything(self):
        uniform = np.full(8, 1 / 8)
        K = transition_matrix(uniform)
        assert np.allclose(np.diag(K), 0.0)
        assert np.allclose(K[K > 0], 1 / 3)

    def test_zero_mass_current_state(self):
        pi = np.full(8, 1 / 7)
        pi[3] = 0.0
        with pytest.raises(DegenerateJoint):
            acceptance_probability(pi, STATES[3], STATES[7])

    @settings(max_examples=50)
    @given(st.lists(st.floats(0.01, 1.0), min_size=8, max_size=8))
    def test_stationary_and_reversible(self, raw):
        pi = np.array(raw) / sum(raw)
        K = transition_matrix(pi)
        assert np.allclose(K.sum(axis=1), 1.0, atol=1e-12)
        assert np.allclose(pi @ K, pi, atol=1e-12)
        flux = pi[:, None] * K
        assert np.allclose(flux, flux.T, atol=1e-14)

    def test_step_frequencies_match_kernel(self):
        joint = build_joint(BASELINE)
        rng = np.random.default_rng(0)
        start = state(1, 1, 1)
        counts = np.zeros(8)
        for _ in range(20_000):
            counts[transition_step(joint, start, rng).index] += 1
        assert np.allclose(counts / counts.sum(), transition_matrix(joint)[7], atol=0.01)


class TestChains:
    def test_length_and_adjacency(self):
        joint = build_joint(BASELINE)
        rng = np.random.default_rng(1)
        assert len(run_chain(joint, SamplerConfig(1), rng).states) == 1
        chain = run_chain(joint, SamplerConfig(9.3), rng).states
        assert len(chain) == 10 and chain[0] in (state(1, 1, 1), state(0, 0, 0))
        for a, b in zip(chain, chain[1:]):
            assert sum(x != y for x, y in zip(a, b)) <= 1

    def test_deterministic_given_seed(self):
        joint = build_joint(BASELINE)
        a = run_chain(joint, SamplerConfig(50), np.random.default_rng(7))
        b = run_chain(joint, SamplerConfig(50), np.random.default_rng(7))
        assert a == b

    def test_chain_estimate_examples(self):
        assert chain_estimate(ChainRecord((state(1, 1, 1),)), VII) == 1.0
        assert chain_estimate(ChainRecord((state(0, 0, 0),)), VII, 0.5) == 0.5
        chain = ChainRecord((state(1, 1, 1), state(0, 1, 1), state(0, 1, 1)))
        assert chain_estimate(chain, VII) == pytest.approx(1 / 3)

    def test_config_validation(self):
        for bad in (dict(chain_length=0.5), dict(chain_length=3, chain_count=0),
                    dict(chain_length=3, prototype_weights=(0.6, 0.6)),
                    dict(chain_length=3, empty_evidence_fallback=1.5)):
            with pytest.raises(ValueError):
                SamplerConfig(**bad)


class TestExpectedPredictions:
    def test_single_state_chain(self):
        pred = exact_expected_predictions(BASELINE, 1, [get_task("VII")])
        assert pred == [0.75]

    @pytest.mark.parametrize("length", [1, 2, 3, 4, 5])
    def test_exact_recursion_matches_path_enumeration(self, length):
        pi = build_joint(BASELINE).as_array()
        table = exact_by_length(pi, [t.query for t in TASKS], length)
        want = [enumerate_expected(pi, t.query, length) for t in TASKS]
        assert table[-1] == pytest.approx(want, abs=1e-12)

    def test_exact_recursion_matches_enumeration_with_skewed_prototypes(self):
        params = ColliderParameters(0.3, 0.7, 1.5, -0.5, 0.4)
        pi = build_joint(params).as_array()
        table = exact_by_length(pi, [t.query for t in TASKS], 4, (0.8, 0.2), 0.3)
        want = [enumerate_expected(pi, t.query, 4, (0.8, 0.2), 0.3) for t in TASKS]
        assert table[-1] == pytest.approx(want, abs=1e-12)

    def test_monte_carlo_agrees_with_exact(self):
        mc = expected_predictions(BASELINE, SamplerConfig(5, chain_count=100_000, seed=3), TASKS)
        exact = exact_expected_predictions(BASELINE, 5, TASKS)
        assert mc == pytest.approx(exact, abs=0.006)

    def test_interpolation_between_lengths(self):
        lo = exact_expected_predictions(BASELINE, 3, TASKS)
        hi = exact_expected_predictions(BASELINE, 4, TASKS)
        mid = exact_expected_predictions(BASELINE, 3.25, TASKS)
        assert mid == pytest.approx([0.75 * a + 0.25 * b for a, b in zip(lo, hi)], abs=1e-15)
        mc = expected_predictions(BASELINE, SamplerConfig(3.25, chain_count=500, seed=1), TASKS)
        mc_lo = expected_predictions(BASELINE, SamplerConfig(3, chain_count=500, seed=1), TASKS)
        mc_hi = expected_predictions(BASELINE, SamplerConfig(4, chain_count=500, seed=1), TASKS)
        assert mc == pytest.approx([0.75 * a + 0.25 * b for a, b in zip(mc_lo, mc_hi)], abs=1e-15)

    def test_lengths_read_prefixes_of_the_same_chains(self):
        joint = build_joint(BASELINE)
        queries = [t.query for t in TASKS]
        config = SamplerConfig(10, chain_count=3000, seed=11)
        together = monte_carlo_by_length(joint, queries, config, [3, 10, 200])
        alone = monte_carlo_by_length(joint, queries, config, [10])
        assert np.array_equal(together[10], alone[10])

    def test_deterministic(self):
        config = SamplerConfig(7, chain_count=2000, seed=42)
        assert expected_predictions(BASELINE, config, TASKS) == expected_predictions(BASELINE, config, TASKS)

    def test_long_chains_converge(self):
        joint = build_joint(BASELINE)
        exact = [conditional_prob(joint, t.query) for t in TASKS]
        assert exact_expected_predictions(BASELINE, 3000, TASKS) == pytest.approx(exact, abs=0.01)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.35, 0.65), st.floats(0.6, 3.0), st.floats(-3.0, 3.0), st.integers(2, 10))
    def test_associative_bias(self, prior, strength, bias, length):
        params = ColliderParameters.shared(prior, strength, bias)
        v = dict(zip((t.id for t in TASKS), exact_expected_predictions(params, length, TASKS)))
        assert v["V"] > v["IV"]

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.4, 0.5), st.floats(0.6, 3.0), st.floats(-1.0, 1.0), st.integers(2, 10))
    def test_weak_explaining_away(self, prior, strength, bias, length):
        # outside this regime (prior above 0.5 with negative bias, lengths near 10) the
        # sampler's gap can exceed the normative one
        params = ColliderParameters.shared(prior, strength, bias)
        v = dict(zip((t.id for t in TASKS), exact_expected_predictions(params, length, TASKS)))
        joint = build_joint(params)
        cbn_gap = conditional_prob(joint, get_task("VII").query) - conditional_prob(joint, get_task("VI").query)
        assert v["VII"] - v["VI"] < cbn_gap

    def test_explaining_away_can_exceed_normative_outside_that_regime(self):
        params = ColliderParameters.shared(0.625, 1.0, 0.0)
        v = dict(zip((t.id for t in TASKS), exact_expected_predictions(params, 7, TASKS)))
        joint = build_joint(params)
        cbn_gap = conditional_prob(joint, get_task("VII").query) - conditional_prob(joint, get_task("VI").query)
        assert v["VII"] - v["VI"] > cbn_gap

    def test_degenerate_prototype(self):
        params = ColliderParameters(1.0, 0.5, 1.0, 1.0, 0.0)
        with pytest.raises(DegenerateJoint):
            exact_expected_predictions(params, 3, TASKS)
