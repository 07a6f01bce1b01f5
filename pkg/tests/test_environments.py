"""Preference-derived scores, RBF/GMM generators, and the fixture registry."""

import numpy as np
import pytest

from modelmarket.errors import ConfigError, InvalidInstanceError
from modelmarket.fixtures import builtin_instance, fixture_names, verify_all, verify_fixture
from modelmarket.preferences import PreferenceTable, scores_from_preferences
from modelmarket.synthetic import (
    GmmComponent,
    GmmPopulationSpec,
    RbfKernel,
    RbfModelSpec,
    gmm_population,
    rbf_scores,
)


class TestScoresFromPreferences:
    @pytest.fixture
    def llm_prefs(self):
        return PreferenceTable(
            criteria=["heval", "multilang", "overall", "math", "ifeval"],
            type_labels=["A", "E"],
            weights=[[0.6, 0.0, 0.2, 0.0, 0.2], [0.0, 0.0, 0.0, 1.0, 0.0]],
        )

    @pytest.fixture
    def m3_row(self):
        return [[0.8320, 0.6059, 0.3989, 0.4955, 0.7265]]

    def test_single_criterion_type(self, llm_prefs, m3_row):
        scores = scores_from_preferences(m3_row, llm_prefs)
        assert scores.scores[0, 1] == pytest.approx(0.4955, abs=1e-12)

    def test_weighted_mix(self, llm_prefs, m3_row):
        scores = scores_from_preferences(m3_row, llm_prefs)
        assert scores.scores[0, 0] == pytest.approx(0.72428, abs=1e-12)

    def test_all_zero_preferences_give_zero_scores(self):
        prefs = PreferenceTable(["c1", "c2"], ["z"], [[0.0, 0.0]])
        scores = scores_from_preferences([[0.4, 0.9], [0.1, 0.2]], prefs, normalize=False)
        assert np.all(scores.scores == 0.0)

    def test_normalize_rescales_weights(self):
        prefs = PreferenceTable(["c1", "c2"], ["t"], [[2.0, 2.0]])
        scores = scores_from_preferences([[0.4, 0.8]], prefs, normalize=True)
        assert scores.scores[0, 0] == pytest.approx(0.6, abs=1e-12)

    def test_normalize_rejects_zero_vector(self):
        prefs = PreferenceTable(["c1"], ["t"], [[0.0]])
        with pytest.raises(InvalidInstanceError):
            scores_from_preferences([[0.4]], prefs, normalize=True)

    def test_linearity_in_preferences(self):
        rng = np.random.default_rng(40)
        perf = rng.uniform(size=(3, 4))
        a, b = rng.uniform(size=2)
        t1, t2 = rng.uniform(size=(2, 4))
        combo = PreferenceTable(list("wxyz"), ["t"], [a * t1 + b * t2])
        p1 = PreferenceTable(list("wxyz"), ["t"], [t1])
        p2 = PreferenceTable(list("wxyz"), ["t"], [t2])
        lhs = scores_from_preferences(perf, combo).scores
        rhs = (a * scores_from_preferences(perf, p1).scores
               + b * scores_from_preferences(perf, p2).scores)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_dimension_mismatch(self):
        prefs = PreferenceTable(["c1", "c2"], ["t"], [[0.5, 0.5]])
        with pytest.raises(InvalidInstanceError):
            scores_from_preferences([[0.4, 0.8, 0.1]], prefs)


class TestRbfScores:
    def test_at_kernel_center(self):
        model = RbfModelSpec(0.1, [RbfKernel((0.0, 0.0), 0.5, 0.3)])
        scores = rbf_scores([model], [(0.0, 0.0)])
        assert scores.scores[0, 0] == pytest.approx(0.6, abs=1e-12)

    def test_far_from_all_kernels(self):
        model = RbfModelSpec(0.07, [RbfKernel((0.0, 0.0), 0.5, 0.3)])
        scores = rbf_scores([model], [(100.0, 100.0)])
        assert scores.scores[0, 0] == pytest.approx(0.07, abs=1e-12)

    def test_clamp_applies_after_summation(self):
        # bias 0.05 + amplitude 1.30 at the center clamps to 1.0
        model = RbfModelSpec(0.05, [RbfKernel((0.0, 0.0), 1.30, 0.35)])
        scores = rbf_scores([model], [(0.0, 0.0)])
        assert scores.scores[0, 0] == 1.0

    def test_output_always_within_unit_interval(self):
        rng = np.random.default_rng(41)
        models = [
            RbfModelSpec(rng.uniform(-0.5, 0.5), [
                RbfKernel(tuple(rng.uniform(-2, 2, 2)), rng.uniform(-1, 2), rng.uniform(0.1, 1))
                for _ in range(rng.integers(1, 4))
            ])
            for _ in range(4)
        ]
        pts = rng.uniform(-3, 3, size=(20, 2))
        s = rbf_scores(models, pts).scores
        assert np.all((s >= 0.0) & (s <= 1.0))

    def test_positive_width_required(self):
        with pytest.raises(Exception):
            RbfKernel((0.0,), 1.0, 0.0)


class TestGmmPopulation:
    def test_single_component_single_type(self):
        spec = GmmPopulationSpec([GmmComponent(1.0, (0.0,), [[1.0]])], k_types=1, seed=3)
        population, anchors = gmm_population(spec)
        assert population.weights[0] == 1.0
        assert anchors.shape == (1, 1)

    def test_well_separated_components_recover_mixture_weights(self):
        cov = [[0.05, 0.0], [0.0, 0.05]]
        spec = GmmPopulationSpec(
            [GmmComponent(0.6, (0.0, 0.0), cov), GmmComponent(0.4, (10.0, 0.0), cov)],
            k_types=2, seed=11,
        )
        population, anchors = gmm_population(spec)
        weights = sorted(population.weights, reverse=True)
        assert abs(weights[0] - 0.6) < 0.02 and abs(weights[1] - 0.4) < 0.02

    def test_shift_moves_anchors_exactly(self):
        cov = [[0.25, 0.0], [0.0, 0.25]]
        base = GmmPopulationSpec(
            [GmmComponent(0.6, (0.0, 0.0), cov), GmmComponent(0.4, (3.0, 0.0), cov)],
            k_types=5, seed=9,
        )
        shifted = GmmPopulationSpec(base.components, k_types=5, dx=0.7, seed=9)
        pop_a, anchors_a = gmm_population(base)
        pop_b, anchors_b = gmm_population(shifted)
        assert np.array_equal(pop_a.weights, pop_b.weights)
        assert np.array_equal(anchors_a + np.array([0.7, 0.0]), anchors_b)

    def test_bitwise_reproducible_for_fixed_seed(self):
        cov = [[0.25, 0.0], [0.0, 0.25]]
        spec = GmmPopulationSpec([GmmComponent(1.0, (0.0, 0.0), cov)], k_types=4, seed=13)
        pop_a, anchors_a = gmm_population(spec)
        pop_b, anchors_b = gmm_population(spec)
        assert np.array_equal(pop_a.weights, pop_b.weights)
        assert np.array_equal(anchors_a, anchors_b)

    def test_degenerate_covariance_rejected(self):
        with pytest.raises(InvalidInstanceError):
            GmmComponent(1.0, (0.0, 0.0), [[1.0, 1.0], [1.0, 1.0]])

    def test_component_weights_must_sum_to_one(self):
        with pytest.raises(InvalidInstanceError):
            GmmPopulationSpec([GmmComponent(0.5, (0.0,), [[1.0]])], k_types=1)


class TestFixtureRegistry:
    def test_all_names_registered(self):
        assert fixture_names() == [
            "c1_rps", "fig2_a", "fig2_b", "fig3_b", "c7_welfare_gap",
            "c8_players_2", "c8_players_3", "c9_softmax",
            "llm_pool1", "llm_pool2", "llm_pool3", "simu_appendix_d",
        ]

    def test_unknown_name_rejected(self):
        with pytest.raises(ConfigError, match="unknown fixture"):
            builtin_instance("nope")

    def test_counterexample_scores(self):
        spec = builtin_instance("c1_rps").spec
        assert spec.n_models == 3 and spec.population.n_types == 3
        assert np.array_equal(spec.scores.scores[:, 0], [0.2, 0.1, 0.0])
        assert np.allclose(spec.population.weights, 1 / 3)

    def test_six_model_instance_weights(self):
        spec = builtin_instance("c8_players_3").spec
        assert spec.n_models == 6
        assert np.array_equal(spec.population.weights,
                              [0.18, 0.17, 0.16, 0.16, 0.17, 0.16])

    def test_softmax_fixture_parameters(self):
        spec = builtin_instance("c9_softmax").spec
        assert spec.choice.kind == "softmax" and spec.choice.tau == 0.1
        assert np.array_equal(spec.scores.scores[:, 0], [0.734, 0.148, 0.934])

    @pytest.mark.parametrize("name", [
        "c1_rps", "fig2_a", "fig2_b", "fig3_b", "c7_welfare_gap",
        "c8_players_2", "c8_players_3", "c9_softmax",
        "llm_pool1", "llm_pool2", "llm_pool3", "simu_appendix_d",
    ])
    def test_expectation_record_rederives(self, name):
        checks = verify_fixture(name)
        failed = [c for c in checks if not c.passed]
        assert not failed, failed

    def test_verify_all_is_green(self):
        assert all(c.passed for c in verify_all())

    def test_expectation_records_are_serialized_json(self):
        import json
        from modelmarket.fixtures import DATA_DIR
        for name in fixture_names():
            path = DATA_DIR / f"{name}.json"
            assert path.exists()
            record = json.loads(path.read_text())
            assert "expected" in record and "scores" in record
            assert record["scores"]["kind"] in ("explicit", "preferences", "rbf_gmm")

    def test_enumeration_matches_per_profile_verification_on_every_fixture(self):
        import itertools
        from modelmarket.equilibrium import enumerate_pne, verify_pne
        for name in fixture_names():
            spec = builtin_instance(name).spec
            found = {p.choices for p, _ in enumerate_pne(spec)}
            brute = {
                prof
                for prof in itertools.product(range(spec.n_models), repeat=spec.n_platforms)
                if verify_pne(spec, prof).is_pne
            }
            assert found == brute, name
