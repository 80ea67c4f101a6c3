import random

import pytest

from skillminer import Trace, canonical_playout
from skillminer.evaluation import (
    QuerySpec,
    RetrievalTrial,
    f1_score,
    macro_f1,
    mrr,
    run_retrieval_experiment,
    sensitivity_analysis,
)
from skillminer.gateway import HashingEmbeddingClient, noisy_planner
from skillminer.retrieval import RankedEntry, RankedSkillList, RetrievalMethod, embed_library
from skillminer.synthetic import make_collision_library, make_synthetic_library


def ranked(*skill_ids):
    entries = tuple(
        RankedEntry(skill_id=sid, score=1.0 - 0.1 * i, rank=i + 1)
        for i, sid in enumerate(skill_ids)
    )
    return RankedSkillList(entries=entries, method=RetrievalMethod.EMBED)


def trial(true_id, *ranking):
    return RetrievalTrial(true_skill_id=true_id, ranked=ranked(*ranking))


class TestMetrics:
    def test_f1_half(self):
        trials = [trial("a", "a"), trial("b", "b"), trial("c", "x"), trial("d", "y")]
        assert f1_score(trials) == 0.5

    def test_f1_all_correct(self):
        trials = [trial(s, s) for s in "abcd"]
        assert f1_score(trials) == 1.0

    def test_f1_seven_of_ten(self):
        trials = [trial(f"s{i}", f"s{i}") for i in range(7)]
        trials += [trial(f"s{i}", "wrong") for i in range(7, 10)]
        assert f1_score(trials) == pytest.approx(0.7)

    def test_mrr_mixed_ranks(self):
        trials = [
            trial("a", "a", "b", "c", "d"),
            trial("b", "x", "b", "c", "d"),
            trial("c", "x", "y", "z", "c"),
        ]
        assert mrr(trials) == pytest.approx(0.58333, abs=1e-5)

    def test_mrr_all_first(self):
        assert mrr([trial(s, s) for s in "ab"]) == 1.0

    def test_mrr_absent_counts_zero(self):
        trials = [trial("a", "a"), trial("b", "x", "y")]
        assert mrr(trials) == pytest.approx(0.5)

    def test_mrr_at_least_f1(self):
        rng = random.Random(5)
        ids = [f"s{i}" for i in range(6)]
        trials = []
        for _ in range(40):
            true = rng.choice(ids)
            ranking = rng.sample(ids, k=rng.randint(1, len(ids)))
            trials.append(trial(true, *ranking))
        assert mrr(trials) >= f1_score(trials)

    def test_order_invariance(self):
        rng = random.Random(6)
        trials = [trial("a", "a"), trial("b", "c", "b"), trial("c", "x")]
        shuffled = trials[:]
        rng.shuffle(shuffled)
        assert f1_score(trials) == f1_score(shuffled)
        assert mrr(trials) == mrr(shuffled)
        assert macro_f1(trials) == macro_f1(shuffled)

    def test_macro_differs_from_micro_on_skew(self):
        trials = [trial("a", "a"), trial("a", "a"), trial("b", "a")]
        assert f1_score(trials) == pytest.approx(2 / 3)
        assert macro_f1(trials) < f1_score(trials)

    def test_empty_trials_rejected(self):
        for metric in (f1_score, mrr, macro_f1):
            with pytest.raises(ValueError):
                metric([])


@pytest.fixture(scope="module")
def library():
    return make_synthetic_library(20, seed=7)


@pytest.fixture(scope="module")
def exact_queries(library):
    return [QuerySpec(s.canonical_text(), s.skill_id) for s in library]


class TestExperiment:
    def test_noiseless_stubs_hit_f1_one_everywhere(self, library, exact_queries):
        report = run_retrieval_experiment(library, exact_queries)
        assert report.methods["conform"].f1 == 1.0
        assert report.methods["embed"].f1 == 1.0
        assert report.methods["hybrid"].f1 == 1.0
        assert not report.excluded

    def test_hybrid_k_first_one_equals_embedding(self, library, exact_queries):
        report = run_retrieval_experiment(library, exact_queries, k_first=1)
        assert report.methods["hybrid"].f1 == report.methods["embed"].f1
        for probe in report.probes:
            hybrid_top = probe.ranking_for("hybrid", 1).entries[0].skill_id
            embed_top = probe.ranking_for("embed", 1).entries[0].skill_id
            assert hybrid_top == embed_top

    def test_hybrid_full_shortlist_matches_conformance_top(self, library, exact_queries):
        report = run_retrieval_experiment(library, exact_queries, k_first=len(library))
        for probe in report.probes:
            hybrid_top = probe.ranking_for("hybrid", len(library)).entries[0].skill_id
            conform_top = probe.conform_ranking.entries[0].skill_id
            assert hybrid_top == conform_top

    def test_unknown_method_rejected(self, library, exact_queries):
        with pytest.raises(ValueError):
            run_retrieval_experiment(library, exact_queries, methods=("nearest",))

    def test_unknown_true_skill_rejected(self, library):
        with pytest.raises(ValueError):
            run_retrieval_experiment(library, [QuerySpec("q", "nope")])

    def test_per_language_breakdown(self, library):
        queries = []
        for i, skill in enumerate(library):
            queries.append(
                QuerySpec(skill.canonical_text(), skill.skill_id, language="EN" if i % 2 else "DA")
            )
        report = run_retrieval_experiment(library, queries)
        assert set(report.per_language) == {"EN", "DA"}

    def test_failed_query_excluded_not_fatal(self, library, exact_queries):
        queries = exact_queries + [QuerySpec("完全 unknown query with no tools", next(iter(library)).skill_id)]
        report = run_retrieval_experiment(library, queries)
        assert len(report.excluded) == 1
        assert report.methods["conform"].n_trials == len(exact_queries)


class TestSensitivity:
    @pytest.fixture(scope="class")
    def noisy_report(self):
        library = make_collision_library(6, seed=11)
        queries = []
        for i, skill in enumerate(library):
            ground_truth = canonical_playout(skill.tree)
            thought = noisy_planner(ground_truth, 0.75, seed=100 + i, model=skill)
            queries.append(QuerySpec(skill.canonical_text(), skill.skill_id, thought=thought.trace))
        return run_retrieval_experiment(library, queries)

    def test_threshold_zero_is_bit_identical(self, noisy_report):
        grid = sensitivity_analysis(noisy_report.probes, [0.0], (noisy_report.k_first,))
        cell_f1 = grid.cells["f1"][0.0]
        cell_mrr = grid.cells["mrr"][0.0]
        assert cell_f1["embed"] == noisy_report.methods["embed"].f1
        assert cell_f1["conform"] == noisy_report.methods["conform"].f1
        assert cell_f1["hybrid"][noisy_report.k_first] == noisy_report.methods["hybrid"].f1
        assert cell_mrr["embed"] == noisy_report.methods["embed"].mrr
        assert cell_mrr["hybrid"][noisy_report.k_first] == noisy_report.methods["hybrid"].mrr

    def test_unattainable_threshold_flagged_empty(self, noisy_report):
        grid = sensitivity_analysis(noisy_report.probes, [1.0], (1,))
        assert grid.empty_thresholds == (1.0,)
        assert grid.bucket_sizes[1.0] == 0
        assert grid.cells["f1"][1.0]["embed"] is None

    def test_hybrid_beats_embedding_at_high_threshold(self, noisy_report):
        grid = sensitivity_analysis(noisy_report.probes, [0.0, 0.7], (2, 3))
        cell = grid.cells["f1"][0.7]
        assert cell["hybrid"][3] >= cell["embed"]

    def test_probes_without_fitness_rejected(self, library, exact_queries):
        report = run_retrieval_experiment(library, exact_queries[:2], methods=("embed",))
        with pytest.raises(ValueError):
            sensitivity_analysis(report.probes, [0.0])

    def test_csv_export_shape(self, noisy_report):
        grid = sensitivity_analysis(noisy_report.probes, [0.0, 0.7], (1, 3))
        lines = grid.to_csv().splitlines()
        assert lines[0] == "metric,threshold,method,k_first,value"
        assert any(line.startswith("f1,0.7,hybrid,3,") for line in lines)
