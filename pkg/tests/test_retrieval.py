import dataclasses
import random

import pytest

from skillminer import EmbeddingVector, Skill, SkillLibrary, Trace, canonical_playout
from skillminer.gateway import HashingEmbeddingClient, embed
from skillminer.retrieval import (
    RetrievalMethod,
    cosine_similarity,
    embed_library,
    retrieve_by_conformance,
    retrieve_by_embedding,
    retrieve_hybrid,
)
from skillminer.synthetic import make_collision_library, make_synthetic_library


@pytest.fixture(scope="module")
def library():
    return embed_library(make_synthetic_library(8, seed=7), HashingEmbeddingClient())


@pytest.fixture(scope="module")
def embedder():
    return HashingEmbeddingClient()


class TestCosine:
    def test_self_similarity(self):
        v = EmbeddingVector([0.2, 0.5, -1.0], "t")
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity(
            EmbeddingVector([1, 0], "t"), EmbeddingVector([0, 1], "t")
        ) == pytest.approx(0.0)

    def test_forty_five_degrees(self):
        value = cosine_similarity(EmbeddingVector([1, 0], "t"), EmbeddingVector([1, 1], "t"))
        assert value == pytest.approx(0.70711, abs=1e-5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine_similarity(EmbeddingVector([1], "t"), EmbeddingVector([1, 0], "t"))

    def test_zero_vector(self):
        with pytest.raises(ValueError):
            cosine_similarity(EmbeddingVector([0, 0], "t"), EmbeddingVector([1, 0], "t"))


class TestEmbeddingRetrieval:
    def test_exact_text_ranks_first_with_unit_score(self, library, embedder):
        skill = library.get("proc_03")
        ranking = retrieve_by_embedding(embed(skill.canonical_text(), embedder), library, 3)
        assert ranking.method is RetrievalMethod.EMBED
        assert ranking.entries[0].skill_id == "proc_03"
        assert ranking.entries[0].score == pytest.approx(1.0)

    def test_k_beyond_library_returns_full_ranking(self, library, embedder):
        ranking = retrieve_by_embedding(embed("anything at all", embedder), library, 99)
        assert len(ranking.entries) == len(library)

    def test_all_exact_queries_rank_first(self, library, embedder):
        for skill in library:
            ranking = retrieve_by_embedding(embed(skill.canonical_text(), embedder), library, 1)
            assert ranking.entries[0].skill_id == skill.skill_id

    def test_unembedded_skill_rejected(self, embedder):
        plain = make_synthetic_library(2, seed=1)
        with pytest.raises(ValueError):
            retrieve_by_embedding(embed("q", embedder), plain, 1)

    def test_empty_library_rejected(self, embedder):
        with pytest.raises(ValueError):
            retrieve_by_embedding(embed("q", embedder), SkillLibrary(), 1)


class TestConformanceRetrieval:
    def test_language_member_ranks_first_with_unit_score(self, library):
        skill = library.get("proc_05")
        ranking = retrieve_by_conformance(canonical_playout(skill.tree), library, 3)
        assert ranking.entries[0].skill_id == "proc_05"
        assert ranking.entries[0].score == 1.0

    def test_worked_example_scored_two_thirds(self, library, worked_tree, worked_net):
        extended = SkillLibrary(list(library))
        extended.add(Skill("worked", worked_tree, worked_net, query_texts=("w",)))
        ranking = retrieve_by_conformance(Trace(["E", "F", "A", "B", "C", "D"]), extended, len(extended))
        score = ranking.score_of("worked")
        assert score == pytest.approx(2 / 3, abs=0.01)

    def test_diagnostics_carry_alignments(self, library):
        skill = library.get("proc_02")
        ranking = retrieve_by_conformance(canonical_playout(skill.tree), library, 2)
        assert set(ranking.diagnostics) == {e.skill_id for e in ranking.entries}

    def test_noiseless_probes_give_perfect_f1(self, library):
        correct = 0
        for skill in library:
            ranking = retrieve_by_conformance(canonical_playout(skill.tree), library, 1)
            correct += ranking.entries[0].skill_id == skill.skill_id
        assert correct == len(library)

    def test_empty_thought_rejected(self, library):
        with pytest.raises(ValueError):
            retrieve_by_conformance(Trace([]), library, 1)


class TestHybridRetrieval:
    def test_full_shortlist_matches_conformance_top(self, library):
        skill = library.get("proc_06")
        thought = canonical_playout(skill.tree)
        query_vec = embed("completely unrelated words", HashingEmbeddingClient())
        hybrid = retrieve_hybrid(query_vec, thought, library, k_first=len(library), k_final=1)
        conform = retrieve_by_conformance(thought, library, 1)
        assert hybrid.entries[0].skill_id == conform.entries[0].skill_id

    def test_singleton_shortlist_matches_embedding_top(self, library, embedder):
        skill = library.get("proc_01")
        query_vec = embed(skill.canonical_text(), embedder)
        thought = canonical_playout(library.get("proc_04").tree)  # misleading thought
        hybrid = retrieve_hybrid(query_vec, thought, library, k_first=1, k_final=1)
        embed_only = retrieve_by_embedding(query_vec, library, 1)
        assert hybrid.entries[0].skill_id == embed_only.entries[0].skill_id

    def test_collision_fixture_reranks_true_skill_first(self):
        embedder = HashingEmbeddingClient()
        library = embed_library(make_collision_library(4, seed=11), embedder)
        # Query for the 'b' member of a collision pair: embedding ties on the
        # permuted text, the lexicographic tie-break favours 'a', and the
        # conformance rerank must recover 'b'.
        target = library.get("pair_02b")
        query_vec = embed(target.canonical_text(), embedder)
        embed_only = retrieve_by_embedding(query_vec, library, 3)
        assert embed_only.entries[0].skill_id == "pair_02a"
        hybrid = retrieve_hybrid(query_vec, canonical_playout(target.tree), library, k_first=3, k_final=3)
        assert hybrid.entries[0].skill_id == "pair_02b"

    def test_invalid_k_combination(self, library, embedder):
        with pytest.raises(ValueError):
            retrieve_hybrid(
                embed("q", embedder), Trace(["x"]), library, k_first=1, k_final=2
            )


class TestRankingInvariants:
    def test_scores_non_increasing_and_ranks_consecutive(self, library, embedder):
        ranking = retrieve_by_embedding(embed("prepare the report", embedder), library, len(library))
        scores = [e.score for e in ranking.entries]
        assert scores == sorted(scores, reverse=True)
        assert [e.rank for e in ranking.entries] == list(range(1, len(library) + 1))

    def test_insertion_order_does_not_change_output(self, embedder):
        skills = list(make_synthetic_library(6, seed=2))
        rng = random.Random(0)
        shuffled = skills[:]
        rng.shuffle(shuffled)
        lib_a = embed_library(SkillLibrary(skills), embedder)
        lib_b = embed_library(SkillLibrary(shuffled), embedder)
        query_vec = embed("render the dataset", embedder)
        assert retrieve_by_embedding(query_vec, lib_a, 6) == retrieve_by_embedding(query_vec, lib_b, 6)

    def test_conformance_ignores_query_texts(self, library):
        mutated = SkillLibrary()
        for skill in library:
            mutated.add(dataclasses.replace(skill))
        renamed = SkillLibrary()
        for skill in library:
            renamed.add(
                Skill(
                    skill.skill_id,
                    skill.tree,
                    skill.net,
                    query_texts=("something entirely different",),
                    embedding=skill.embedding,
                    provenance=skill.provenance,
                )
            )
        thought = canonical_playout(library.get("proc_00").tree)
        r1 = retrieve_by_conformance(thought, mutated, 3)
        r2 = retrieve_by_conformance(thought, renamed, 3)
        assert [e.skill_id for e in r1.entries] == [e.skill_id for e in r2.entries]
        assert [e.score for e in r1.entries] == [e.score for e in r2.entries]
