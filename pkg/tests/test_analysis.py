import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moralframes.analysis import (
    EntityAliasMap,
    PredictionRow,
    PredictionSet,
    RelationGraph,
    build_relation_graph,
    error_taxonomy,
    merge_ngram_groups,
    partisanship_table,
    partisanship_zscore,
    polarity_rank,
    role_distribution,
    stem,
    top_entities_per_role,
)
from moralframes.errors import DataError
from moralframes.taxonomy import MoralFoundation, MoralRole

MF = MoralFoundation
R = MoralRole


def _row(tid, ent, pred_role, gold_role, gold_mf, ideology="left",
         topic="k", pred_mf=MF.CARE_HARM):
    return PredictionRow(tid, ideology, topic, ent, pred_mf, pred_role,
                         gold_mf, gold_role)


# -- z-score ------------------------------------------------------------------


def _oracle_z(s_l, n_l, s_r, n_r):
    # independent arrangement of the pooled two-proportion statistic
    pool = (s_l + s_r) / (n_l + n_r)
    var = pool * (1 - pool) * (n_l + n_r) / (n_l * n_r)
    return (s_l / n_l - s_r / n_r) / math.sqrt(var)


def test_zscore_against_oracle():
    rng = random.Random(99)
    for _ in range(50):
        n_l, n_r = rng.randint(2, 200), rng.randint(2, 200)
        s_l, s_r = rng.randint(1, n_l - 1), rng.randint(1, n_r - 1)
        z, degenerate = partisanship_zscore((s_l, n_l), (s_r, n_r))
        assert not degenerate
        assert z == pytest.approx(_oracle_z(s_l, n_l, s_r, n_r), abs=1e-9)


def test_zscore_antisymmetry_exact():
    rng = random.Random(5)
    for _ in range(50):
        n_l, n_r = rng.randint(2, 50), rng.randint(2, 50)
        s_l, s_r = rng.randint(1, n_l - 1), rng.randint(1, n_r - 1)
        z_ab, _ = partisanship_zscore((s_l, n_l), (s_r, n_r))
        z_ba, _ = partisanship_zscore((s_r, n_r), (s_l, n_l))
        assert z_ab == -z_ba


def test_zscore_positive_means_left():
    z, _ = partisanship_zscore((9, 10), (1, 10))
    assert z > 0


def test_zscore_degenerate_pooled_proportion():
    assert partisanship_zscore((0, 5), (0, 7)) == (0.0, True)
    assert partisanship_zscore((5, 5), (7, 7)) == (0.0, True)


def test_zscore_requires_trials():
    with pytest.raises(DataError):
        partisanship_zscore((0, 0), (1, 2))


# -- error taxonomy -------------------------------------------------------------


def five_tweet_fixture() -> PredictionSet:
    """Hand-counted: E1=1 (t1), E2=2 (t2, t4), E3=1 (t3)."""
    rows = [
        # t1: polarity swap, same foundation as gold MF
        _row("t1", "e1", R.ENTITY_CAUSING_HARM, R.ENTITY_PROVIDING_CARE,
             MF.CARE_HARM),
        # t2: role foundation differs from gold MF, polarity preserved
        _row("t2", "e2", R.ENTITY_DOING_CHEATING, R.ENTITY_CAUSING_HARM,
             MF.CARE_HARM),
        # t3: two entities collapsed onto one role, gold roles differ but
        # share polarity and foundation
        _row("t3", "e3", R.TARGET_OF_LOYALTY_BETRAYAL,
             R.TARGET_OF_LOYALTY_BETRAYAL, MF.LOYALTY_BETRAYAL,
             pred_mf=MF.LOYALTY_BETRAYAL),
        _row("t3", "e4", R.TARGET_OF_LOYALTY_BETRAYAL,
             R.ENTITY_BEING_LOYAL, MF.LOYALTY_BETRAYAL,
             pred_mf=MF.LOYALTY_BETRAYAL),
        # t4: wrong-foundation role again, positive both sides
        _row("t4", "e5", R.TARGET_OF_PURITY_DEGRADATION,
             R.TARGET_OF_FAIRNESS_CHEATING, MF.FAIRNESS_CHEATING,
             pred_mf=MF.FAIRNESS_CHEATING),
        # t5: fully correct
        _row("t5", "e6", R.ENTITY_BEING_LOYAL, R.ENTITY_BEING_LOYAL,
             MF.LOYALTY_BETRAYAL, pred_mf=MF.LOYALTY_BETRAYAL),
    ]
    return PredictionSet(rows)


def test_error_taxonomy_hand_counts():
    assert error_taxonomy(five_tweet_fixture()) == (1, 2, 1)


def test_error_taxonomy_gold_equals_pred_is_zero():
    ps = five_tweet_fixture()
    for r in ps.rows:
        r.pred_role = r.gold_role
        r.pred_mf = r.gold_mf
    assert error_taxonomy(ps) == (0, 0, 0)


def test_e3_needs_two_entities_and_differing_gold():
    rows = [
        _row("t", "a", R.TARGET_OF_CARE_HARM, R.TARGET_OF_CARE_HARM, MF.CARE_HARM),
        _row("t", "b", R.TARGET_OF_CARE_HARM, R.TARGET_OF_CARE_HARM, MF.CARE_HARM),
    ]
    # identical golds: collapse is correct, not an error
    assert error_taxonomy(PredictionSet(rows))[2] == 0


# -- jsonl round trip -----------------------------------------------------------


def test_prediction_set_jsonl_round_trip():
    ps = five_tweet_fixture()
    back = PredictionSet.from_jsonl(ps.to_jsonl())
    assert len(back.rows) == len(ps.rows)
    assert back.to_jsonl() == ps.to_jsonl()


# -- aliasing -------------------------------------------------------------------


def test_alias_resolution_and_case_folding():
    amap = EntityAliasMap({"joe biden": ["biden", "potus"]})
    assert amap.resolve("POTUS") == "joe biden"
    assert amap.resolve("unknown guy") == "unknown guy"
    assert amap.resolve("Joe Biden") == "joe biden"


def test_alias_apply_idempotent():
    amap = EntityAliasMap({"joe biden": ["biden"]})
    ps = PredictionSet([
        _row("t1", "Biden", R.ENTITY_PROVIDING_CARE, None, None),
    ])
    once = amap.apply(ps)
    twice = amap.apply(once)
    assert once.rows[0].entity_id == "joe biden"
    assert twice.to_jsonl() == once.to_jsonl()


def test_alias_collision_raises():
    with pytest.raises(DataError):
        EntityAliasMap({"a": ["x"], "b": ["x"]})


# -- stemming and n-gram merging --------------------------------------------------


def test_stem_examples():
    assert stem("voters") == "vot"
    assert stem("running") == "runn"
    assert stem("cities") == "cit"
    assert stem("gop") == "gop"          # too short to strip
    assert stem("Trump") == "trump"


def test_stem_strips_one_suffix_only():
    assert stem("stressedly") == "stress"   # edly, not ed then ly


def test_merge_ngram_groups_containment():
    counts = {("border", "patrol"): 5, ("border",): 3, ("wall",): 4}
    merged = merge_ngram_groups(counts)
    assert merged == [("border patrol", 5), ("wall", 4)]


def test_merge_ngram_groups_tie_breaks_lexicographic():
    merged = merge_ngram_groups({("b",): 2, ("a",): 2})
    assert merged == [("a", 2), ("b", 2)]


def test_top_entities_per_role_groups():
    rows = [
        _row(f"t{i}", "Border Patrol", R.JUSTIFIED_AUTHORITY, None, None)
        for i in range(3)
    ] + [
        _row("t9", "the patrol", R.JUSTIFIED_AUTHORITY, None, None),
    ]
    tops = top_entities_per_role(PredictionSet(rows))
    grams = tops[("left", R.JUSTIFIED_AUTHORITY.value)]
    # "patrol" appears in both surfaces and absorbs "border patrol"
    assert grams[0] == ("patrol", 4)
    assert ("bord", 3) in grams  # stemmer strips the -er suffix
    assert all(g != "border patrol" for g, _ in grams)


# -- relation graph ---------------------------------------------------------------


def graph_fixture() -> PredictionSet:
    rows = []
    i = 0
    # migrants: frequent target of care/harm on the left
    for _ in range(20):
        rows.append(_row(f"t{i}", "migrants", R.TARGET_OF_CARE_HARM, None,
                         None))
        i += 1
    # ice co-mentioned as negative actor in the same tweets
    for j in range(16):
        rows.append(_row(f"t{j}", "ice", R.ENTITY_CAUSING_HARM, None, None))
    # ngo as positive actor
    for j in range(15):
        rows.append(_row(f"t{j}", "ngo", R.ENTITY_PROVIDING_CARE, None, None))
    return PredictionSet(rows)


def test_relation_graph_structure():
    graph = build_relation_graph(graph_fixture(), MF.CARE_HARM, "left",
                                 min_count=15)
    assert graph.nodes["migrants"]["class"] == "target"
    assert graph.nodes["ice"]["class"] == "negative-actor"
    assert graph.nodes["ngo"]["class"] == "positive-actor"
    assert graph.edges[("ice", "migrants")] == 16
    assert graph.edges[("ngo", "migrants")] == 15
    assert graph.underfull  # fewer than 2 targets and 3 actors per class


def test_relation_graph_min_count_filter():
    graph = build_relation_graph(graph_fixture(), MF.CARE_HARM, "left",
                                 min_count=100)
    assert not graph.nodes


def test_relation_graph_dot_round_trip():
    graph = build_relation_graph(graph_fixture(), MF.CARE_HARM, "left",
                                 min_count=15)
    back = RelationGraph.from_dot(graph.to_dot())
    assert back.nodes == graph.nodes
    assert back.edges == graph.edges


# -- polarity rank and distributions ------------------------------------------------


def rank_fixture() -> PredictionSet:
    rows = []
    i = 0
    for role, count in ((R.TARGET_OF_CARE_HARM, 30),
                        (R.ENTITY_CAUSING_HARM, 20),
                        (R.ENTITY_PROVIDING_CARE, 12),
                        (R.ENTITY_BEING_LOYAL, 3)):
        for _ in range(count):
            rows.append(_row(f"t{i}", "gov", role, None, None))
            i += 1
    return PredictionSet(rows)


def test_polarity_rank_normalization():
    series = polarity_rank(rank_fixture(), "gov", min_role_count=10)["left"]
    assert [s for _, s in series] == [0.0, 0.5, 1.0]
    assert series[-1][0] == R.TARGET_OF_CARE_HARM.value
    # the 3-count role fell under the threshold
    assert all(role != R.ENTITY_BEING_LOYAL.value for role, _ in series)


def test_polarity_rank_single_role():
    rows = [_row(f"t{i}", "x", R.ENTITY_BEING_LOYAL, None, None)
            for i in range(10)]
    series = polarity_rank(PredictionSet(rows), "x")["left"]
    assert series == [(R.ENTITY_BEING_LOYAL.value, 1.0)]
    assert polarity_rank(PredictionSet(rows), "x")["right"] == []


def test_role_distribution_sums_to_one():
    dist = role_distribution(rank_fixture(), "gov")
    assert sum(dist.values()) == pytest.approx(1.0)
    assert dist[R.TARGET_OF_CARE_HARM.value] == pytest.approx(30 / 65)
    assert role_distribution(rank_fixture(), "nobody") == {}


# -- partisanship table --------------------------------------------------------------


def test_partisanship_table_direction():
    rows = []
    i = 0
    for _ in range(8):
        rows.append(_row(f"l{i}", None, None, None, MF.CARE_HARM,
                         ideology="left", pred_mf=MF.CARE_HARM))
        rows.append(_row(f"l{i}", "migrants", R.TARGET_OF_CARE_HARM, None,
                         None, ideology="left", pred_mf=MF.CARE_HARM))
        i += 1
    for _ in range(8):
        rows.append(_row(f"r{i}", None, None, None, MF.CARE_HARM,
                         ideology="right", pred_mf=MF.AUTHORITY_SUBVERSION))
        rows.append(_row(f"r{i}", "border patrol", R.JUSTIFIED_AUTHORITY,
                         None, None, ideology="right",
                         pred_mf=MF.AUTHORITY_SUBVERSION))
        i += 1
    table = partisanship_table(PredictionSet(rows))
    assert len(table) == 1
    row = table[0]
    assert row["most_partisan_left"]["entity"] == "migrants"
    assert row["most_partisan_left"]["z"] > 0
    assert row["most_partisan_right"]["entity"] == "border patrol"
    assert row["most_partisan_right"]["z"] < 0


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(2, 41),
       st.integers(2, 41))
def test_zscore_antisymmetry_property(s_l, s_r, extra_l, extra_r):
    n_l, n_r = s_l + extra_l, s_r + extra_r
    z_ab, d1 = partisanship_zscore((s_l, n_l), (s_r, n_r))
    z_ba, d2 = partisanship_zscore((s_r, n_r), (s_l, n_l))
    assert z_ab == -z_ba
    assert d1 == d2
