import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from banditab import (
    Dataset,
    DegenerateVarianceError,
    LambdaConfig,
    LearnerSpec,
    PermutationPlan,
    ValidationError,
    arm1_increments,
    cauchy_antisymmetry_gap,
    cauchy_combine,
    dr_pseudo_outcomes,
    cross_fit,
    generate,
    DgpConfig,
    optimal_finals,
    pwtab_test,
    select_lambda_bootstrap,
    statistic_p_value,
)
from banditab.rng import int_seed_for, rng_for

LINEAR = LearnerSpec(kind="linear")


class TestCauchyCombine:
    def test_single_value_identity(self):
        c, p = cauchy_combine([0.05])
        assert p == pytest.approx(0.05, abs=1e-12)
        assert c == pytest.approx(math.tan(0.45 * math.pi), rel=1e-12)

    @given(st.floats(1e-6, 1 - 1e-6))
    @settings(max_examples=200, deadline=None)
    def test_identity_property(self, p):
        _, combined = cauchy_combine([p])
        assert combined == pytest.approx(p, abs=1e-12)

    def test_symmetric_half(self):
        c, p = cauchy_combine([0.5, 0.5, 0.5])
        assert c == 0.0
        assert p == 0.5

    def test_frozen_two_value_example(self):
        c, p = cauchy_combine([0.01, 0.5])
        assert c == pytest.approx(15.910257976886927, rel=1e-12)
        assert p == pytest.approx(0.019980299664053736, abs=1e-12)
        assert p == pytest.approx(0.0200, abs=5e-4)

    def test_boundary_values_are_clipped(self):
        c, p = cauchy_combine([0.0, 1.0])
        assert math.isfinite(c)
        assert 0.0 < p < 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            cauchy_combine([])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            cauchy_combine([0.5, 1.2])

    def test_relabeling_invariance(self):
        p_values = [0.03, 0.4, 0.11, 0.77, 0.5]
        _, p_a = cauchy_combine(p_values)
        _, p_b = cauchy_combine(p_values[::-1])
        assert p_a == pytest.approx(p_b, abs=1e-12)


class TestAntisymmetry:
    def test_examples(self):
        assert cauchy_antisymmetry_gap([0.2, 0.3]) < 1e-12
        assert cauchy_antisymmetry_gap([0.5]) == 0.0

    @given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=20))
    @settings(max_examples=200, deadline=None)
    def test_property(self, p_values):
        assert cauchy_antisymmetry_gap(p_values) < 1e-12


class TestPermutationPlan:
    def test_reproducible(self):
        a = PermutationPlan.build(100, 8, seed=5)
        b = PermutationPlan.build(100, 8, seed=5)
        assert np.array_equal(a.permutations, b.permutations)
        c = PermutationPlan.build(100, 8, seed=6)
        assert not np.array_equal(a.permutations, c.permutations)

    def test_rows_are_bijections(self):
        plan = PermutationPlan.build(50, 10, seed=1)
        for row in plan.permutations:
            assert np.array_equal(np.sort(row), np.arange(50))

    def test_first_row_not_forced_identity(self):
        plan = PermutationPlan.build(200, 1, seed=2)
        assert not np.array_equal(plan.permutations[0], np.arange(200))

    def test_bad_rows_rejected(self):
        with pytest.raises(ValidationError):
            PermutationPlan(b=1, seed=0, permutations=np.array([[0, 0, 2]]))


class TestPwtabTest:
    def test_single_identity_permutation_matches_single_run(self):
        data = generate(DgpConfig(f_kind="I", g_kind="I", sigma_eps=0.5, n=400, seed=3))
        plan = PermutationPlan(b=1, seed=0, permutations=np.arange(400)[None, :])
        seed = 11
        report = pwtab_test(data, LINEAR, k=2, b=1, seed=seed,
                            known_propensity=0.5, plan=plan)
        assert report.p_aggregated == pytest.approx(report.per_perm_p[0], abs=1e-12)
        fits = cross_fit(data, LINEAR, k=2, known_propensity=0.5,
                         seed=int_seed_for(seed, "crossfit"))
        pseudo = dr_pseudo_outcomes(data, fits)
        coin = int(rng_for(seed, "first-arm", 0).integers(0, 2))
        t = float(optimal_finals(arm1_increments(pseudo, report.lambda_used), [coin])[0])
        assert report.per_perm_stats[0] == pytest.approx(t, abs=1e-12)
        assert report.per_perm_p[0] == pytest.approx(statistic_p_value(t), abs=1e-15)

    def test_reproducible_bit_for_bit(self):
        data = generate(DgpConfig(f_kind="II", g_kind="II", sigma_eps=0.5, n=300, seed=9))
        a = pwtab_test(data, LINEAR, k=2, b=10, seed=21, known_propensity=0.5)
        b = pwtab_test(data, LINEAR, k=2, b=10, seed=21, known_propensity=0.5)
        assert a.per_perm_stats == b.per_perm_stats
        assert a.per_perm_p == b.per_perm_p
        assert a.p_aggregated == b.p_aggregated
        assert a.lambda_used == b.lambda_used
        assert a.sigma_hat == b.sigma_hat
        assert a.decision_at == b.decision_at

    def test_per_permutation_p_values_vary(self):
        data = generate(DgpConfig(f_kind="I", g_kind="III", sigma_eps=0.5, n=600, seed=4))
        report = pwtab_test(data, LINEAR, k=2, b=12, seed=2, known_propensity=0.5)
        assert len(set(report.per_perm_p)) > 1

    def test_constant_pseudo_outcomes_degenerate(self):
        # constant outcome per arm with constant covariates: fits and residuals
        # are exact, so every pseudo-outcome is identical and the spread is 0
        a = np.array([0, 1] * 30)
        data = Dataset(X=np.zeros((60, 2)), Y=a.astype(float), A=a)
        with pytest.raises(DegenerateVarianceError):
            pwtab_test(data, LINEAR, k=2, b=5, seed=1, known_propensity=0.5)

    def test_fixed_lambda_mode(self):
        data = generate(DgpConfig(n=200, seed=6))
        report = pwtab_test(data, LINEAR, k=2, b=4, seed=3, known_propensity=0.5,
                            lambda_config=LambdaConfig(mode="fixed", lam=0.25))
        assert report.lambda_used == 0.25

    def test_bootstrap_lambda_mode(self):
        data = generate(DgpConfig(n=240, seed=15))
        config = LambdaConfig(mode="bootstrap", grid=(0.2, 0.5), b_boot=10)
        report = pwtab_test(data, LINEAR, k=2, b=4, seed=6, known_propensity=0.5,
                            lambda_config=config)
        assert report.lambda_used in (0.2, 0.5)

    def test_report_dict_round_trip(self):
        data = generate(DgpConfig(n=200, seed=7))
        report = pwtab_test(data, LINEAR, k=2, b=3, seed=5, known_propensity=0.5)
        payload = report.to_dict()
        assert len(payload["per_perm_p"]) == 3
        assert set(payload["decision_at"]) == {"0.01", "0.05", "0.1"}
        assert payload["b"] == 3


class TestLambdaBootstrap:
    def test_returns_grid_value_controlling_size(self):
        data = generate(DgpConfig(f_kind="I", g_kind="I", sigma_eps=0.5, n=300, seed=12))
        lam = select_lambda_bootstrap(data, [0.2, 0.5], b_boot=40, alpha=0.05,
                                      seed=8, learner_spec=LINEAR, k=2,
                                      known_propensity=0.5)
        assert lam in (0.2, 0.5)
        # rerun property: the chosen weight keeps the resampled null calibrated
        rng = rng_for(8, "recheck")
        control = np.flatnonzero(data.A == 0)
        rejections = 0
        b_check = 60
        for _ in range(b_check):
            rows = control[rng.integers(0, control.size, size=data.n)]
            relabeled = Dataset(X=data.X[rows], Y=data.Y[rows],
                                A=(np.arange(data.n) >= control.size).astype(int))
            fits = cross_fit(relabeled, LINEAR, k=2, known_propensity=0.5,
                             seed=int(rng.integers(0, 2**63)))
            pseudo = dr_pseudo_outcomes(relabeled, fits)
            coin = int(rng.integers(0, 2))
            t = float(optimal_finals(arm1_increments(pseudo, lam), [coin])[0])
            rejections += statistic_p_value(t) <= 0.05
        se = math.sqrt(0.05 * 0.95 / b_check)
        assert rejections / b_check <= 0.05 + 3 * se

    def test_constant_outcome_propagates_degenerate_error(self):
        data = Dataset(X=np.zeros((80, 2)), Y=np.full(80, 2.0),
                       A=np.array([0, 1] * 40))
        with pytest.raises(DegenerateVarianceError):
            select_lambda_bootstrap(data, [0.1], b_boot=5, alpha=0.05, seed=0,
                                    learner_spec=LINEAR, known_propensity=0.5)

    def test_all_failing_grid_returns_minimum(self, monkeypatch):
        import banditab.policy as policy_module

        class AlwaysReject:
            pvalue = 0.001

        monkeypatch.setattr(policy_module, "kstest", lambda *a, **k: AlwaysReject())
        data = generate(DgpConfig(n=200, seed=14))
        lam = select_lambda_bootstrap(data, [0.3, 0.6], b_boot=5, alpha=0.05,
                                      seed=2, learner_spec=LINEAR,
                                      known_propensity=0.5)
        assert lam == 0.3

    def test_empty_control_rejected(self):
        data = Dataset(X=np.zeros((10, 1)), Y=np.arange(10.0),
                       A=np.ones(10, dtype=int))
        with pytest.raises(ValidationError):
            select_lambda_bootstrap(data, [0.5], b_boot=5, alpha=0.05, seed=0)

    def test_bad_grid_rejected(self):
        data = generate(DgpConfig(n=100, seed=1))
        for grid in ([], [0.5, 0.2], [0.0, 0.5], [0.5, 1.0]):
            with pytest.raises(ValidationError):
                select_lambda_bootstrap(data, grid, b_boot=5, alpha=0.05, seed=0)
