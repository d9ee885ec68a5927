"""Generator and experiment-driver tests.

The moment checks compare sampled frequencies against generating
probabilities within three binomial standard errors; closed-form rate
oracles are worked out in comments where used.
"""

import numpy as np
import pytest

from cfaudit.data import enumerate_groups, group_codes
from cfaudit.errors import ConfigError, DomainError
from cfaudit.simulation import (DEFAULT_DEMO_SHARES, DEMO_GROUPS,
                                SPREAD_DEMO_SHARES, DemoConfig, DemoGroup,
                                GeneratedData, ScenarioConfig, compute_truth,
                                coverage_study, demo_config, demo_sweep,
                                generate_demo_data, generate_scenario_data,
                                replicate, scenario_config, train_risk_model,
                                true_demo_cfnr, true_demo_cfpr)

pytestmark = pytest.mark.filterwarnings(
    "ignore:(reference distribution|only).*:UserWarning")


def _three_se(p, count):
    return 3.0 * np.sqrt(p * (1.0 - p) / count) + 1e-12


# -- demo generator ----------------------------------------------------------

class TestDemoGenerator:
    def test_group_shares_match_config(self):
        cfg = demo_config()
        data = generate_demo_data(cfg, 50000, seed=0)
        codes = group_codes(data.dataset)
        # group order by flat code: (0,0)=0, (0,1)=1, (1,0)=2, (1,1)=3
        share_of = {0: 0.56, 1: 0.14, 2: 0.24, 3: 0.06}
        for code, share in share_of.items():
            freq = np.mean(codes == code)
            assert abs(freq - share) < _three_se(share, 50000)

    def test_need_and_opportunity_rates(self):
        cfg = demo_config()
        data = generate_demo_data(cfg, 50000, seed=1)
        ds = data.dataset
        minority = (ds.a[:, 0] == 1) & (ds.a[:, 1] == 1)
        majority = (ds.a[:, 0] == 0) & (ds.a[:, 1] == 0)
        # need rates
        for mask, need in ((minority, 0.4), (majority, 0.2)):
            rate = data.y0[mask].mean()
            assert abs(rate - need) < _three_se(need, mask.sum())
        # opportunity given need, minority: 0.6
        mask = minority & (data.y0 == 1)
        rate = ds.d[mask].mean()
        assert abs(rate - 0.6) < _three_se(0.6, mask.sum())
        # opportunity given no need, majority: 0.2
        mask = majority & (data.y0 == 0)
        rate = ds.d[mask].mean()
        assert abs(rate - 0.2) < _three_se(0.2, mask.sum())

    def test_observational_errors_pinned_regardless_of_strength(self):
        # the design holds observed score errors at 0.1/0.2 per group even
        # when intervention strength varies wildly across groups
        cfg = demo_config(z_minority=0.9, z_m1=0.0, z_m2=0.5)
        data = generate_demo_data(cfg, 50000, seed=2)
        ds = data.dataset
        codes = group_codes(ds)
        for g in range(4):
            mask0 = (codes == g) & (ds.y == 0)
            mask1 = (codes == g) & (ds.y == 1)
            fpr = ds.s[mask0].mean()
            fnr = 1.0 - ds.s[mask1].mean()
            assert abs(fpr - 0.1) < _three_se(0.1, mask0.sum())
            assert abs(fnr - 0.2) < _three_se(0.2, mask1.sum())

    def test_consistency_identity_exact(self):
        data = generate_demo_data(demo_config(), 20000, seed=3)
        ds = data.dataset
        assert np.array_equal(ds.y, (1 - ds.d) * data.y0 + ds.d * data.y1)

    def test_structural_zero(self):
        data = generate_demo_data(demo_config(z_minority=0.7), 20000, seed=4)
        assert not np.any(data.y1[data.y0 == 0])

    def test_zero_strength_means_no_effect(self):
        cfg = demo_config(z_minority=0.0, z_m1=0.0, z_m2=0.0, z_majority=0.0)
        data = generate_demo_data(cfg, 20000, seed=5)
        assert np.array_equal(data.dataset.y, data.y0)

    def test_determinism_and_seed_sensitivity(self):
        cfg = demo_config()
        a = generate_demo_data(cfg, 2000, seed=6)
        b = generate_demo_data(cfg, 2000, seed=6)
        c = generate_demo_data(cfg, 2000, seed=7)
        assert np.array_equal(a.dataset.s, b.dataset.s)
        assert np.array_equal(a.y1, b.y1)
        assert not np.array_equal(a.dataset.s, c.dataset.s)

    def test_true_propensity_is_packaged(self):
        data = generate_demo_data(demo_config(), 500, seed=8)
        p = data.true_propensity()
        assert p.method == "true-dgp"
        assert np.all((p.pi >= 0.005) & (p.pi <= 0.995))

    def test_tampered_outcomes_rejected(self):
        data = generate_demo_data(demo_config(), 200, seed=9)
        y_bad = np.array(data.dataset.y)
        y_bad[0] = 1 - y_bad[0]
        import dataclasses
        ds_bad = dataclasses.replace(data.dataset, y=y_bad)
        with pytest.raises(DomainError):
            GeneratedData(dataset=ds_bad, y0=data.y0, y1=data.y1,
                          pi_true=data.pi_true, role="validation")

    def test_creation_effect_rejected(self):
        data = generate_demo_data(demo_config(), 200, seed=10)
        y1_bad = np.array(data.y1)
        idx = int(np.flatnonzero(data.y0 == 0)[0])
        y1_bad[idx] = 1
        with pytest.raises(DomainError):
            GeneratedData(dataset=data.dataset, y0=data.y0, y1=y1_bad,
                          pi_true=data.pi_true, role="validation")

    def test_bad_role_rejected(self):
        data = generate_demo_data(demo_config(), 100, seed=11)
        with pytest.raises(ConfigError):
            GeneratedData(dataset=data.dataset, y0=data.y0, y1=data.y1,
                          pi_true=data.pi_true, role="holdout")


class TestDemoClosedForm:
    def test_oracle_values(self):
        cfg = demo_config()  # minority q=0.6, z=0.2, fpr=0.1, fnr=0.2
        # no intervention: counterfactual equals observational
        assert true_demo_cfnr(demo_config(z_minority=0.0), "minority") \
            == pytest.approx(0.2)
        # 0.2 + 0.6*0.2*(0.9 - 0.2) = 0.284
        assert true_demo_cfnr(cfg, "minority") == pytest.approx(0.284)
        # saturated: q=z=1 gives 0.2 + 0.7 = 0.9
        sat = DemoGroup(need=0.4, opportunity_need=1.0,
                        opportunity_no_need=0.3, strength=1.0, share=0.06)
        cfg_sat = DemoConfig(majority=cfg.majority, m1=cfg.m1, m2=cfg.m2,
                             minority=sat)
        assert true_demo_cfnr(cfg_sat, "minority") == pytest.approx(0.9)

    def test_group_lookup_by_code_or_name(self):
        cfg = demo_config(z_minority=0.5)
        assert true_demo_cfnr(cfg, (1, 1)) == true_demo_cfnr(cfg, "minority")
        assert true_demo_cfnr(cfg, (0, 0)) == true_demo_cfnr(cfg, "majority")
        with pytest.raises(ConfigError):
            true_demo_cfnr(cfg, "other")

    def test_cfpr_is_pinned(self):
        cfg = demo_config(z_minority=0.9)
        for name in DEMO_GROUPS:
            assert true_demo_cfpr(cfg, name) == pytest.approx(0.1)

    def test_monotone_in_strength(self):
        values = [true_demo_cfnr(demo_config(z_minority=z), "minority")
                  for z in np.linspace(0.0, 1.0, 11)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_counted_truth_matches_closed_form(self):
        cfg = demo_config(z_minority=0.6)
        data = generate_demo_data(cfg, 200000, seed=12)
        truth = compute_truth(data)
        codes = {"majority": (0, 0), "m1": (1, 0), "m2": (0, 1),
                 "minority": (1, 1)}
        for name, code in codes.items():
            expected = true_demo_cfnr(cfg, name)
            counted = truth.rate(code, "fnr")
            need = cfg.group(name).need
            n_y0 = 200000 * DEFAULT_DEMO_SHARES[name] * need
            assert counted == pytest.approx(expected,
                                            abs=_three_se(expected, n_y0))
            n_not = 200000 * DEFAULT_DEMO_SHARES[name] * (1 - need)
            assert truth.rate(code, "fpr") == pytest.approx(
                0.1, abs=_three_se(0.1, n_not))


class TestDemoConfigValidation:
    def test_share_keys_checked(self):
        with pytest.raises(ConfigError, match="unknown"):
            demo_config(shares={"majority": 0.5, "m1": 0.2, "m2": 0.2,
                                "minority": 0.05, "extra": 0.05})
        with pytest.raises(ConfigError, match="missing"):
            demo_config(shares={"majority": 0.5, "m1": 0.3, "m2": 0.2})

    def test_shares_must_sum_to_one(self):
        with pytest.raises(ConfigError, match="sum"):
            demo_config(shares={"majority": 0.5, "m1": 0.2, "m2": 0.2,
                                "minority": 0.2})

    def test_probabilities_bounded(self):
        with pytest.raises(ConfigError):
            demo_config(z_minority=1.5)
        with pytest.raises(ConfigError):
            DemoGroup(need=-0.1, opportunity_need=0.5,
                      opportunity_no_need=0.5, strength=0.5, share=0.25)

    def test_spread_shares_are_valid(self):
        cfg = demo_config(shares=SPREAD_DEMO_SHARES)
        assert cfg.minority.share == pytest.approx(0.04)


# -- demo sweep ---------------------------------------------------------------

class TestDemoSweep:
    def test_observational_flat_while_true_grows(self):
        pts = demo_sweep([0.2, 0.8], n=20000, seed=13)
        obs = [p.truth.suite("negative").obs for p in pts]
        avg = [p.truth.suite("negative").avg for p in pts]
        assert abs(obs[1] - obs[0]) < 0.03
        assert avg[1] > avg[0] + 0.05

    def test_mid_variant_pins_minority(self):
        pts = demo_sweep([0.2], n=8000, seed=14, vary="mid")
        # minority strength pinned at 0.8 -> its true cfnr is high
        assert pts[0].truth.rate((1, 1), "fnr") > 0.4

    def test_vary_validated(self):
        with pytest.raises(ConfigError):
            demo_sweep([0.2], n=100, vary="everything")

    def test_deterministic(self):
        a = demo_sweep([0.3], n=3000, seed=15)
        b = demo_sweep([0.3], n=3000, seed=15)
        assert a[0].truth.suite("negative").avg \
            == b[0].truth.suite("negative").avg


# -- scenario generator -------------------------------------------------------

class TestScenarioGenerator:
    def test_group_probabilities(self):
        cfg = scenario_config(1)
        data = generate_scenario_data(cfg, "validation", 50000, seed=16)
        codes = group_codes(data.dataset)
        # flat-code order: (0,0)=0, (0,1)=1, (1,0)=2, (1,1)=3
        for code, p in ((0, 0.58), (1, 0.13), (2, 0.23), (3, 0.06)):
            freq = np.mean(codes == code)
            assert abs(freq - p) < _three_se(p, 50000)

    def test_covariate_moments(self):
        cfg = scenario_config(1)
        data = generate_scenario_data(cfg, "validation", 50000, seed=17)
        x = data.dataset.x
        means = np.array([1.0, -1.0, 2.0, -2.0])
        assert np.all(np.abs(x.mean(axis=0) - means) < 3 * 0.3 / np.sqrt(50000))
        assert np.all(np.abs(x.std(axis=0) - 0.3) < 0.01)

    def test_propensities_clipped(self):
        cfg = scenario_config(3)
        data = generate_scenario_data(cfg, "validation", 30000, seed=18)
        assert np.all((data.pi_true >= 0.005) & (data.pi_true <= 0.995))
        assert data.pi_true.min() < 0.2 and data.pi_true.max() > 0.8

    def test_consistency_and_structural_zero(self):
        cfg = scenario_config(2)
        data = generate_scenario_data(cfg, "validation", 20000, seed=19)
        ds = data.dataset
        assert np.array_equal(ds.y, (1 - ds.d) * data.y0 + ds.d * data.y1)
        assert not np.any(data.y1[data.y0 == 0])

    def test_majority_survival_rate(self):
        # majority keeps the event under treatment with probability 0.8
        cfg = scenario_config(1)
        data = generate_scenario_data(cfg, "validation", 50000, seed=20)
        mask = (group_codes(data.dataset) == 0) & (data.y0 == 1)
        rate = data.y1[mask].mean()
        assert abs(rate - 0.8) < _three_se(0.8, mask.sum())

    def test_minority_strength_enters_y1(self):
        # scenario 1 minority: survive = 1 - 0.6 = 0.4
        cfg = scenario_config(1)
        data = generate_scenario_data(cfg, "validation", 50000, seed=21)
        mask = (group_codes(data.dataset) == 3) & (data.y0 == 1)
        rate = data.y1[mask].mean()
        assert abs(rate - 0.4) < _three_se(0.4, mask.sum())

    def test_pre_model_roles_have_zero_scores(self):
        cfg = scenario_config(1)
        for role in ("train", "validation"):
            data = generate_scenario_data(cfg, role, 500, seed=22)
            assert not np.any(data.dataset.s)
            assert data.role == role

    def test_estimation_requires_model(self):
        cfg = scenario_config(1)
        with pytest.raises(ConfigError, match="risk model"):
            generate_scenario_data(cfg, "estimation", 500, seed=23)

    def test_score_shifts_treatment(self):
        # the estimation-role treatment model includes logit(0.1) times the
        # score, so flagged records should be treated far less often
        cfg = scenario_config(1)
        train = generate_scenario_data(cfg, "train", 1000, seed=24)
        model = train_risk_model(train, cfg, seed=24)
        data = generate_scenario_data(cfg, "estimation", 30000, seed=25,
                                      risk_model=model)
        ds = data.dataset
        assert 0.05 < ds.s.mean() < 0.95
        assert ds.d[ds.s == 1].mean() < ds.d[ds.s == 0].mean() - 0.2

    def test_role_and_n_validated(self):
        cfg = scenario_config(1)
        with pytest.raises(ConfigError):
            generate_scenario_data(cfg, "audit", 100)
        with pytest.raises(ConfigError):
            generate_scenario_data(cfg, "train", 0)


class TestScenarioConfigs:
    def test_ids(self):
        assert scenario_config(1).predictors == "x-only"
        assert scenario_config(2).predictors == "protected-and-x"
        assert scenario_config(3).need_majority == pytest.approx(0.8)
        with pytest.raises(ConfigError):
            scenario_config(4)

    def test_protected_coefficients_reproduce_rates(self):
        # at the covariate means the linear predictor reduces to
        # logit(rate): sum of x-means is 0 and x1+x2 contributes 0
        from cfaudit.numerics import expit, logit
        cfg = scenario_config(2)
        beta = cfg.beta_need()
        base = logit(cfg.need_majority)
        assert expit(base) == pytest.approx(0.6)
        assert expit(base + beta[0]) == pytest.approx(0.5)
        assert expit(base + beta[1]) == pytest.approx(0.5)
        assert expit(base + beta.sum()) == pytest.approx(0.4)
        gamma = cfg.beta_opportunity()
        base_d = logit(cfg.opportunity_majority)
        assert expit(base_d) == pytest.approx(0.2)
        assert expit(base_d + gamma[0]) == pytest.approx(0.4)
        assert expit(base_d + gamma.sum()) == pytest.approx(0.6)

    def test_validation(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(scenario=9, need_majority=0.0, need_mid=0.5,
                           need_minority=0.4, opportunity_majority=0.2,
                           opportunity_mid=0.4, opportunity_minority=0.6,
                           z_m1=0.2, z_m2=0.2, z_minority=0.2,
                           predictors="x-only")
        with pytest.raises(ConfigError):
            ScenarioConfig(scenario=9, need_majority=0.6, need_mid=0.5,
                           need_minority=0.4, opportunity_majority=0.2,
                           opportunity_mid=0.4, opportunity_minority=0.6,
                           z_m1=0.2, z_m2=0.2, z_minority=0.2,
                           predictors="everything")
        with pytest.raises(ConfigError):
            ScenarioConfig(scenario=9, need_majority=0.6, need_mid=0.5,
                           need_minority=0.4, opportunity_majority=0.2,
                           opportunity_mid=0.4, opportunity_minority=0.6,
                           z_m1=0.2, z_m2=0.2, z_minority=0.2,
                           predictors="x-only",
                           group_probabilities=(0.5, 0.3, 0.3, 0.1))


# -- risk model ---------------------------------------------------------------

class TestRiskModel:
    def test_train_role_required(self):
        cfg = scenario_config(1)
        val = generate_scenario_data(cfg, "validation", 300, seed=26)
        with pytest.raises(ConfigError, match="train-role"):
            train_risk_model(val, cfg)

    def test_feature_widths(self):
        cfg1, cfg2 = scenario_config(1), scenario_config(2)
        train1 = generate_scenario_data(cfg1, "train", 400, seed=27)
        train2 = generate_scenario_data(cfg2, "train", 400, seed=27)
        m1 = train_risk_model(train1, cfg1, n_trees=10, seed=1)
        m2 = train_risk_model(train2, cfg2, n_trees=10, seed=1)
        assert m1.forest.n_features == 4
        assert m2.forest.n_features == 6
        with pytest.raises(DomainError):
            m1.probabilities(train2.dataset.a,
                             np.hstack([train2.dataset.x,
                                        train2.dataset.x]))

    def test_deterministic(self):
        cfg = scenario_config(1)
        train = generate_scenario_data(cfg, "train", 500, seed=28)
        val = generate_scenario_data(cfg, "validation", 500, seed=29)
        s1 = train_risk_model(train, cfg, seed=7).score_dataset(val.dataset)
        s2 = train_risk_model(train, cfg, seed=7).score_dataset(val.dataset)
        assert np.array_equal(s1, s2)

    def test_beats_majority_class(self):
        cfg = scenario_config(1)
        train = generate_scenario_data(cfg, "train", 1000, seed=30)
        model = train_risk_model(train, cfg, seed=30)
        val = generate_scenario_data(cfg, "validation", 5000, seed=31)
        scores = model.score_dataset(val.dataset)
        accuracy = np.mean(scores == val.dataset.y)
        base = max(val.dataset.y.mean(), 1 - val.dataset.y.mean())
        assert accuracy > base + 0.02


# -- ground truth -------------------------------------------------------------

class TestComputeTruth:
    def test_tables_and_suites_assembled(self):
        cfg = scenario_config(1)
        train = generate_scenario_data(cfg, "train", 600, seed=32)
        model = train_risk_model(train, cfg, n_trees=30, seed=32)
        val = generate_scenario_data(cfg, "validation", 4000, seed=33)
        truth = compute_truth(val, model)
        assert truth.table.kind == "counterfactual-truth"
        assert truth.table.method == "truth"
        assert len(truth.table.rows) == 4
        assert len(truth.marginals) == 2
        assert truth.observational.kind == "observational"
        assert set(truth.suites) == {"positive", "negative"}
        suite = truth.suite("negative")
        assert suite.method == "truth"
        assert np.isfinite(suite.avg)
        with pytest.raises(ConfigError):
            truth.suite("sideways")

    def test_truth_counts_against_potential_outcome(self):
        # recompute one cell by hand: cfnr = P(S=0 | Y0=1, group)
        cfg = scenario_config(1)
        train = generate_scenario_data(cfg, "train", 600, seed=34)
        model = train_risk_model(train, cfg, n_trees=30, seed=34)
        val = generate_scenario_data(cfg, "validation", 4000, seed=35)
        truth = compute_truth(val, model)
        scores = model.score_dataset(val.dataset)
        codes = group_codes(val.dataset)
        mask = (codes == 0) & (val.y0 == 1)
        by_hand = np.mean(scores[mask] == 0)
        assert truth.rate((0, 0), "fnr") == pytest.approx(by_hand, abs=1e-12)
        # and differs from counting against the realized outcome
        ds = val.dataset
        mask_obs = (codes == 0) & (ds.y == 1)
        assert mask.sum() != mask_obs.sum()

    def test_scenario_orderings(self):
        # scenario 2 spreads intervention strength: minority misses most;
        # scenario 3 concentrates need/opportunity on the majority, whose
        # false-positive rate then stands out
        results = {}
        for sc in (2, 3):
            cfg = scenario_config(sc)
            train = generate_scenario_data(cfg, "train", 1000,
                                           seed=[36, sc])
            model = train_risk_model(train, cfg, seed=[36, sc])
            val = generate_scenario_data(cfg, "validation", 20000,
                                         seed=[37, sc])
            results[sc] = compute_truth(val, model)
        t2 = results[2]
        fnr = {g: t2.rate(g, "fnr") for g in ((0, 0), (1, 0), (0, 1), (1, 1))}
        assert fnr[(1, 1)] == max(fnr.values())
        assert fnr[(0, 0)] == min(fnr.values())
        t3 = results[3]
        fpr = {g: t3.rate(g, "fpr") for g in ((0, 0), (1, 0), (0, 1), (1, 1))}
        others = [v for g, v in fpr.items() if g != (0, 0)]
        assert fpr[(0, 0)] > max(others) + 0.03

    def test_demo_truth_without_model_uses_stored_scores(self):
        data = generate_demo_data(demo_config(), 5000, seed=38)
        truth = compute_truth(data)
        assert len(truth.table.rows) == 4
        assert truth.suite("negative").obs >= 0


# -- replication grid ---------------------------------------------------------

class TestReplicate:
    def test_bookkeeping_and_determinism(self):
        grid = replicate([1], [400], ["observational", "weighted-true"], 3,
                         seed=40, n_train=400, n_validation=3000)
        assert len(grid.cells) == 3 * 2
        assert grid.scenarios == (1,)
        assert grid.sizes == (400,)
        assert set(c.method for c in grid.cells) \
            == {"observational", "weighted-true"}
        assert all(not c.redrawn for c in grid.cells)
        assert grid.flagged == ()
        rows = grid.summary_rows()
        assert len(rows) == 1 * 1 * 2 * 2 * 5
        again = replicate([1], [400], ["observational", "weighted-true"], 3,
                          seed=40, n_train=400, n_validation=3000)
        for r1, r2 in zip(rows, again.summary_rows()):
            assert r1 == r2

    def test_methods_share_estimation_data(self):
        grid = replicate([1], [500], ["observational", "regression"], 1,
                         seed=41, n_train=400, n_validation=3000)
        by_method = {c.method: c for c in grid.cells}
        obs = by_method["observational"]
        reg = by_method["regression"]
        # same cohort: group counts in the rate tables agree exactly
        assert [r.count for r in obs.rates.rows] \
            == [r.count for r in reg.rates.rows]

    def test_summary_tracks_truth(self):
        grid = replicate([1], [2000], ["weighted-true"], 3, seed=42,
                         n_train=600, n_validation=8000)
        rows = [r for r in grid.summary_rows()
                if r["kind"] == "negative" and r["metric"] == "avg"]
        assert len(rows) == 1
        # truth-weighted estimates on fresh cohorts should sit near the
        # validation-cohort truth value
        assert abs(rows[0]["mean"] - rows[0]["truth"]) < 0.1

    def test_rate_rows_shape(self):
        grid = replicate([1], [400], ["observational"], 2, seed=43,
                         n_train=400, n_validation=3000)
        rows = grid.rate_rows("observational", 400)
        assert len(rows) == 4 * 2
        assert {r["rate"] for r in rows} == {"fpr", "fnr"}
        assert all(np.isfinite(r["truth"]) for r in rows)

    def test_validation_of_arguments(self):
        with pytest.raises(ConfigError):
            replicate([1], [100], ["guesswork"], 1)
        with pytest.raises(ConfigError):
            replicate([1], [100], ["observational"], 0)
        with pytest.raises(ConfigError):
            replicate([1, 1], [100], ["observational"], 1)
        with pytest.raises(ConfigError):
            replicate([7], [100], ["observational"], 1)

    def test_accepts_config_instances(self):
        cfg = scenario_config(1)
        grid = replicate([cfg], [300], ["observational"], 1, seed=44,
                         n_train=300, n_validation=2000)
        assert grid.scenarios == (1,)

    def test_threaded_matches_serial(self):
        serial = replicate([1], [300], ["observational"], 4, seed=45,
                           n_train=300, n_validation=2000)
        threaded = replicate([1], [300], ["observational"], 4, seed=45,
                             n_train=300, n_validation=2000, threads=4)
        for r1, r2 in zip(serial.summary_rows(), threaded.summary_rows()):
            assert r1 == r2


# -- coverage -----------------------------------------------------------------

class TestCoverageStudy:
    def test_shape_and_determinism(self):
        study = coverage_study(1, [300], 2, resamples=40, seed=46,
                               n_train=300, n_validation=2000,
                               method="weighted-true", refit=False)
        assert study.truth == pytest.approx(
            study.truth)  # finite
        assert len(study.rows) == 2
        rows = study.summary_rows()
        assert len(rows) == 3
        assert {r["interval_method"] for r in rows} \
            == {"t", "normal", "percentile"}
        for r in rows:
            assert 0.0 <= r["coverage"] <= 1.0
            assert r["avg_length"] >= 0.0
            assert r["avg_length_truncated"] <= r["avg_length"] + 1e-12
        again = coverage_study(1, [300], 2, resamples=40, seed=46,
                               n_train=300, n_validation=2000,
                               method="weighted-true", refit=False)
        assert [r.estimate for r in study.rows] \
            == [r.estimate for r in again.rows]
        assert study.rows[0].intervals["t"].lo \
            == again.rows[0].intervals["t"].lo

    def test_intervals_well_formed(self):
        study = coverage_study(1, [400], 1, resamples=60, seed=47,
                               n_train=300, n_validation=2000,
                               method="weighted-true", refit=False)
        row = study.rows[0]
        assert row.se > 0
        for name in ("t", "normal", "percentile"):
            iv = row.intervals[name]
            assert iv.lo <= iv.hi
            assert iv.level == pytest.approx(0.9)
        # the normal interval is centered on the estimate by construction
        normal = row.intervals["normal"]
        assert normal.lo + normal.hi == pytest.approx(2 * row.estimate)
