"""Shared fixtures: random ground programs and synthetic corpora."""

import random

import pytest

from moralframes.corpus import EntityMention, TweetInstance
from moralframes.grounding import GroundProgram, LinearConstraint
from moralframes.taxonomy import MoralFoundation, MoralRole

MF = MoralFoundation
R = MoralRole


def random_ground_program(rng: random.Random, max_atoms: int = 12,
                          with_equalities: bool = True) -> GroundProgram:
    """Random feasible program: exactly-one groups, free atoms, random
    hinge rules, and hard constraints anchored at a known feasible point."""
    gp = GroundProgram()
    budget = rng.randint(3, max_atoms)
    n_groups = rng.randint(0, min(3, budget // 2))
    reference = {}
    next_id = 0
    for g in range(n_groups):
        size = rng.randint(2, min(4, budget - next_id))
        ids = []
        for j in range(size):
            aid = gp.intern(("MF", f"t{g}", f"l{j}"))
            ids.append(aid)
        gp.groups[("MF", f"t{g}")] = ids
        gp.constraints.append(LinearConstraint(
            {i: 1.0 for i in ids}, -1.0, equality=True, origin="exactly_one"))
        pick = rng.choice(ids)
        for i in ids:
            reference[i] = 1.0 if i == pick else 0.0
        next_id = gp.n_atoms
        if budget - next_id < 2:
            break
    while gp.n_atoms < budget:
        aid = gp.intern(("Free", f"x{gp.n_atoms}"))
        reference[aid] = float(rng.randint(0, 1))
    n = gp.n_atoms

    from moralframes.grounding import GroundRule
    for _ in range(rng.randint(2, 8)):
        ids = rng.sample(range(n), rng.randint(1, min(4, n)))
        coeffs = {i: rng.choice([-1.0, 1.0]) for i in ids}
        gp.rules.append(GroundRule(
            tag="rand", coeffs=coeffs,
            const=rng.uniform(-2.0, 1.5),
            weight=rng.uniform(0.1, 2.0),
            rho=rng.choice([1, 2])))

    # hard inequalities satisfied at the reference point by construction
    for _ in range(rng.randint(0, 3)):
        ids = rng.sample(range(n), rng.randint(1, min(3, n)))
        coeffs = {i: rng.choice([-1.0, 1.0]) for i in ids}
        lhs = sum(c * reference[i] for i, c in coeffs.items())
        gp.constraints.append(LinearConstraint(
            coeffs, -(lhs + rng.uniform(0.0, 1.0)), origin="rand_ineq"))
    if with_equalities and n >= 2 and rng.random() < 0.3:
        i, j = rng.sample(range(n), 2)
        if reference[i] == reference[j]:
            gp.constraints.append(LinearConstraint(
                {i: 1.0, j: -1.0}, 0.0, equality=True, origin="rand_eq"))

    if rng.random() < 0.5:
        for i in rng.sample(range(n), rng.randint(1, n)):
            gp.linear_terms[i] = rng.uniform(-1.5, 1.5)
    return gp


def _tweet(tid, text, ideology, topic, mf, ents):
    mentions = []
    cursor = 0
    for surface, role in ents:
        mentions.append(EntityMention(surface, cursor, cursor + len(surface),
                                      gold_role=role))
        cursor += len(surface) + 1
    return TweetInstance(id=tid, text=text, ideology=ideology, topic=topic,
                         entities=mentions, gold_mf=mf)


def separable_corpus() -> list[TweetInstance]:
    """Every MF and role keyed by a private token; trivially learnable."""
    out = []
    markers = {
        MF.CARE_HARM: ("mercy", R.TARGET_OF_CARE_HARM, "victimgroup"),
        MF.FAIRNESS_CHEATING: ("rigged", R.ENTITY_DOING_CHEATING, "fraudster"),
        MF.LOYALTY_BETRAYAL: ("traitor", R.ENTITY_DOING_BETRAYAL, "turncoat"),
        MF.AUTHORITY_SUBVERSION: ("lawful", R.JUSTIFIED_AUTHORITY, "thecourt"),
        MF.PURITY_DEGRADATION: ("sacred", R.ENTITY_PRESERVING_PURITY, "guardian"),
    }
    i = 0
    for mf, (token, role, surface) in markers.items():
        for k in range(2):
            out.append(_tweet(
                f"sep{i}", f"{token} politics today {token}",
                "left" if k == 0 else "right", f"topic{i}",
                mf, [(surface, role)]))
            i += 1
    return out


def role_evidence_corpus() -> list[TweetInstance]:
    """Entity evidence disambiguates MF; c2 without c1 pushes a weakly
    attested entity into a wrong-foundation role.

    Group one: ten tweets with identical text, MF decided solely by which
    entity appears. Group two: an entity attested with two roles across
    foundations, co-mentioned with a strongly attested one.
    """
    out = []
    # group one: ambiguous text, decisive entities
    for i in range(6):
        out.append(_tweet(f"g1a{i}", "people argue about this",
                          "left", "kg1", MF.CARE_HARM,
                          [("helper org", R.TARGET_OF_CARE_HARM)]))
    for i in range(4):
        out.append(_tweet(f"g1b{i}", "people argue about this",
                          "left", "kg1", MF.FAIRNESS_CHEATING,
                          [("swindle corp", R.ENTITY_DOING_CHEATING)]))
    # group two: singles fixing the per-entity role statistics
    for i in range(5):
        out.append(_tweet(f"g2a{i}", "debate continues here",
                          "right", "ka", MF.CARE_HARM,
                          [("quid", R.TARGET_OF_CARE_HARM)]))
    for i in range(3):
        out.append(_tweet(f"g2b{i}", "debate continues here",
                          "right", "kb", MF.FAIRNESS_CHEATING,
                          [("quid", R.ENTITY_DOING_CHEATING)]))
    for i in range(4):
        out.append(_tweet(f"g2c{i}", "debate continues here",
                          "right", "ka", MF.CARE_HARM,
                          [("anchor", R.TARGET_OF_CARE_HARM)]))
    # two-entity tweets: both golds share one role, c2 must split them
    for i in range(6):
        out.append(_tweet(f"g2d{i}", "debate continues here",
                          "right", "kd", MF.CARE_HARM,
                          [("anchor", R.TARGET_OF_CARE_HARM),
                           ("quid", R.TARGET_OF_CARE_HARM)]))
    return out


@pytest.fixture
def rng():
    return random.Random(20260826)
