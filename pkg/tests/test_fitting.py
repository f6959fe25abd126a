import numpy as np
import pytest

from cogres.fitting import (
    FREE_PARAMS,
    FitConfig,
    SplitError,
    SplitSpec,
    cmi_report,
    compute_trajectories,
    evaluate,
    fit,
    objective_value,
    read_fit_result,
    split_hash,
    split_train_test,
    write_cmi_report,
    write_eval_report,
    write_fit_result,
)
from cogres.ingest import Outcome, build_timelines
from cogres.kinetics import FITTED_ONE, FITTED_TWO, ModelKind
from cogres.metrics import build_expected_accuracy
from cogres.profiles import build_corpus_stats, build_profiles
from cogres.synth import DEPLETING_PARAMS, SynthConfig, generate_cohort
from conftest import make_timeline


def synth_timelines(n_users, questions, seed, prefix="synth", beta1=7.0):
    cfg = SynthConfig(
        n_users=n_users,
        questions_per_user=questions,
        params=DEPLETING_PARAMS,
        beta0=-2.2,
        beta1=beta1,
        seed=seed,
        user_prefix=prefix,
    )
    cohort = generate_cohort(cfg)
    timelines, _ = build_timelines(cohort.records)
    return timelines


def fixed_timeline(user, n, accuracy=1.0, rng=None):
    rows = []
    for i in range(n):
        ok = True if rng is None else rng.uniform() < accuracy
        rows.append((f"q{i % 7}", 20, 30, Outcome.CORRECT if ok else Outcome.INCORRECT))
    return make_timeline(rows, user=user)


SMALL_SPLIT = SplitSpec(
    min_train_attempts=40, max_train_users=4, min_test_attempts=25, min_train_users=2
)


class TestSplit:
    def test_first_qualifying_users_train(self):
        tls = [fixed_timeline(f"u{i}", 50 if i < 6 else 30) for i in range(9)]
        train, test = split_train_test(tls, SMALL_SPLIT)
        assert [t.user_id for t in train] == ["u0", "u1", "u2", "u3"]
        # u4, u5 qualify on attempts but the cap kicked them to test
        assert [t.user_id for t in test] == ["u4", "u5", "u6", "u7", "u8"]

    def test_order_is_by_user_id_not_input(self):
        tls = [fixed_timeline(u, 50) for u in ("b", "d", "a", "c")]
        train, _ = split_train_test(tls, SMALL_SPLIT)
        assert [t.user_id for t in train] == ["a", "b", "c", "d"]

    def test_low_accuracy_users_excluded_from_test(self):
        rng = np.random.default_rng(0)
        tls = [fixed_timeline(f"t{i}", 50) for i in range(2)]
        tls.append(fixed_timeline("weak", 30, accuracy=0.05, rng=rng))
        tls.append(fixed_timeline("fine", 30, accuracy=0.9, rng=rng))
        train, test = split_train_test(tls, SMALL_SPLIT)
        ids = [t.user_id for t in test]
        assert "fine" in ids
        assert "weak" not in ids

    def test_short_users_excluded_from_test(self):
        tls = [fixed_timeline(f"t{i}", 50) for i in range(2)]
        tls.append(fixed_timeline("tiny", 10))
        _, test = split_train_test(tls, SMALL_SPLIT)
        assert all(t.user_id != "tiny" for t in test)

    def test_too_few_train_users_raises(self):
        tls = [fixed_timeline("solo", 50)]
        with pytest.raises(SplitError):
            split_train_test(tls, SMALL_SPLIT)

    def test_hash_deterministic_and_sensitive(self):
        tls = [fixed_timeline(f"u{i}", 50) for i in range(4)]
        train, test = split_train_test(tls, SMALL_SPLIT)
        assert split_hash(train, test) == split_hash(train, test)
        assert split_hash(train, test) != split_hash(test, train)
        assert split_hash(train[:1], test) != split_hash(train, test)
        assert len(split_hash(train, test)) == 64


class TestFitConfig:
    def test_start_vector_is_published_fit(self):
        one = FitConfig(kind=ModelKind.ONE_RESOURCE)
        assert one.params_from_vector(one.start_vector()) == FITTED_ONE
        two = FitConfig(kind=ModelKind.TWO_RESOURCE)
        assert two.params_from_vector(two.start_vector()) == FITTED_TWO

    def test_vector_ordering_matches_free_params(self):
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE)
        vec = np.array([0.01, 0.02, 0.03, 0.4, 0.5])
        params = cfg.params_from_vector(vec)
        for name, val in zip(FREE_PARAMS[ModelKind.TWO_RESOURCE], vec):
            assert getattr(params, name) == val
        # fixed saturation constants come from the config, not the vector
        assert params.k_a == cfg.k_a
        assert params.k_b_sat == cfg.k_b_sat

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            FitConfig(kind=ModelKind.ONE_RESOURCE, lower=2.0, upper=1.0)
        with pytest.raises(ValueError):
            FitConfig(kind=ModelKind.ONE_RESOURCE, max_evals=0)


@pytest.fixture(scope="module")
def small_corpus():
    timelines = synth_timelines(8, 60, seed=31)
    corpus = build_corpus_stats(timelines)
    profs = build_profiles(timelines, corpus)
    table = build_expected_accuracy([a for tl in timelines for a in tl.attempts])
    spec = SplitSpec(
        min_train_attempts=50, max_train_users=4,
        min_test_attempts=25, min_train_users=2,
    )
    train, test = split_train_test(timelines, spec)
    return timelines, profs, table, spec, train, test


class TestObjectiveAndFit:
    def test_objective_finite_at_start(self, small_corpus):
        _, profs, _, spec, train, _ = small_corpus
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE, n_shuffles=4, seed=5)
        mi = objective_value(cfg.params_from_vector(cfg.start_vector()),
                             train, profs, cfg, spec)
        assert np.isfinite(mi)

    def test_single_eval_returns_start_point(self, small_corpus):
        _, profs, _, spec, train, test = small_corpus
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE, max_evals=1,
                        n_shuffles=4, seed=5)
        result = fit(cfg, train, profs, spec, split_digest=split_hash(train, test))
        assert result.n_evals == 1
        assert result.budget_exhausted
        assert result.params == FITTED_TWO
        assert len(result.trace) == 1
        assert result.trace[0][1] == pytest.approx(result.train_mi)

    def test_short_fit_improves_on_start(self, small_corpus):
        _, profs, _, spec, train, _ = small_corpus
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE, max_evals=12,
                        n_shuffles=4, seed=5)
        start_mi = objective_value(cfg.params_from_vector(cfg.start_vector()),
                                   train, profs, cfg, spec)
        result = fit(cfg, train, profs, spec)
        assert result.train_mi >= start_mi
        assert result.n_evals <= cfg.max_evals
        # trace records the running best: monotone nondecreasing
        best = [mi for _, mi in result.trace]
        assert best == sorted(best)

    def test_fit_respects_bounds(self, small_corpus):
        _, profs, _, spec, train, _ = small_corpus
        cfg = FitConfig(kind=ModelKind.ONE_RESOURCE, max_evals=15,
                        n_shuffles=4, seed=5)
        result = fit(cfg, train, profs, spec)
        for name in FREE_PARAMS[ModelKind.ONE_RESOURCE]:
            val = getattr(result.params, name)
            assert cfg.lower <= val <= cfg.upper

    def test_fit_deterministic(self, small_corpus):
        _, profs, _, spec, train, _ = small_corpus
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE, max_evals=6,
                        n_shuffles=4, seed=9)
        a = fit(cfg, train, profs, spec)
        b = fit(cfg, train, profs, spec)
        assert a.train_mi == b.train_mi
        assert a.params == b.params
        assert a.trace == b.trace


class TestTrajectoriesAndReports:
    def test_trajectories_cover_profiled_users(self, small_corpus):
        timelines, profs, _, _, _, _ = small_corpus
        trajs = compute_trajectories(timelines, FITTED_TWO, profs)
        assert set(trajs) == set(profs)
        for tl in timelines:
            if tl.user_id in trajs:
                assert len(trajs[tl.user_id].a_start) == len(tl.attempts)

    def test_evaluate_rows(self, small_corpus):
        _, profs, table, _, _, test = small_corpus
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE, n_shuffles=4, seed=5)
        rows = evaluate(FITTED_TWO, test, profs, table, cfg)
        names = [r.name for r in rows]
        assert names[0] == "outcome_vs_resources"
        assert "time_vs_initial_resources" in names
        assert "next_gap_vs_resources" in names
        for row in rows:
            assert row.n > 0
            assert np.isfinite(row.mi.value)
            assert np.isfinite(row.control.value)
            assert row.mi.dispersion >= 0.0
            assert row.entropy_bits > 0
            assert row.pct_of_entropy == pytest.approx(
                100.0 * row.mi.value / row.entropy_bits
            )

    def test_evaluate_deterministic(self, small_corpus):
        _, profs, table, _, _, test = small_corpus
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE, n_shuffles=4, seed=5)
        a = evaluate(FITTED_TWO, test, profs, table, cfg)
        b = evaluate(FITTED_TWO, test, profs, table, cfg)
        for ra, rb in zip(a, b):
            assert ra == rb

    def test_evaluate_reuses_precomputed_trajectories(self, small_corpus):
        _, profs, table, _, _, test = small_corpus
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE, n_shuffles=4, seed=5)
        trajs = compute_trajectories(test, FITTED_TWO, profs)
        a = evaluate(FITTED_TWO, test, profs, table, cfg, trajectories=trajs)
        b = evaluate(FITTED_TWO, test, profs, table, cfg)
        assert a == b

    def test_cmi_rows(self, small_corpus):
        _, profs, table, _, _, test = small_corpus
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE, n_shuffles=4, seed=5)
        rows = cmi_report(FITTED_TWO, test, profs, table, cfg)
        names = {r.name for r in rows}
        assert "outcome_given_time" in names
        assert "outcome_given_difficulty" in names
        for row in rows:
            assert np.isfinite(row.value.value)
            assert row.value.dispersion >= 0.0
            assert row.n > 0


class TestResultIo:
    def test_fit_result_round_trip(self, small_corpus, tmp_path):
        _, profs, _, spec, train, test = small_corpus
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE, max_evals=1,
                        n_shuffles=4, seed=5)
        result = fit(cfg, train, profs, spec, split_digest=split_hash(train, test))
        path = tmp_path / "fit.txt"
        write_fit_result(result, path)
        params, meta = read_fit_result(path)
        assert params == result.params
        assert meta["model"] == "two"
        assert int(meta["n_evals"]) == 1
        assert meta["split_hash"] == result.split_digest
        assert float(meta["train_mi_bits"]) == pytest.approx(result.train_mi)

    def test_one_resource_round_trip(self, tmp_path):
        from cogres.fitting import FitResult

        cfg = FitConfig(kind=ModelKind.ONE_RESOURCE, max_evals=3)
        result = FitResult(
            config=cfg, params=FITTED_ONE, train_mi=0.125,
            trace=((1, 0.125),), n_evals=1, budget_exhausted=False,
            split_digest="abc",
        )
        path = tmp_path / "fit1.txt"
        write_fit_result(result, path)
        params, meta = read_fit_result(path)
        assert params == FITTED_ONE
        assert meta["model"] == "one"

    def test_report_csvs(self, small_corpus, tmp_path):
        _, profs, table, _, _, test = small_corpus
        cfg = FitConfig(kind=ModelKind.TWO_RESOURCE, n_shuffles=4, seed=5)
        rows = evaluate(FITTED_TWO, test, profs, table, cfg)
        crows = cmi_report(FITTED_TWO, test, profs, table, cfg)
        epath = tmp_path / "table1.csv"
        cpath = tmp_path / "table2.csv"
        write_eval_report(rows, epath)
        write_cmi_report(crows, cpath)
        elines = epath.read_text().splitlines()
        assert len(elines) == len(rows) + 1
        assert elines[0].startswith("row,target,features,n,mi_bits")
        clines = cpath.read_text().splitlines()
        assert len(clines) == len(crows) + 1
        assert clines[0].startswith("row,target,condition,n,cmi_bits")
