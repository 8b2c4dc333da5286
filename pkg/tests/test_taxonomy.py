from moralframes.taxonomy import (
    FOUNDATIONS,
    ROLES,
    TARGET_ROLES,
    MoralFoundation,
    MoralRole,
    Polarity,
    role_polarity,
    role_to_mf,
    roles_of_foundation,
    same_polarity,
)


def test_label_counts():
    assert len(FOUNDATIONS) == 5
    assert len(ROLES) == 16


def test_roles_per_foundation():
    sizes = {mf: len(roles_of_foundation(mf)) for mf in FOUNDATIONS}
    assert sizes[MoralFoundation.AUTHORITY_SUBVERSION] == 4
    for mf, size in sizes.items():
        if mf is not MoralFoundation.AUTHORITY_SUBVERSION:
            assert size == 3
    assert sum(sizes.values()) == 16


def test_role_to_mf_is_total_and_consistent():
    for role in ROLES:
        assert role in roles_of_foundation(role_to_mf(role))


def test_exactly_five_negative_roles():
    negative = [r for r in ROLES if role_polarity(r) is Polarity.NEGATIVE]
    assert sorted(r.value for r in negative) == sorted([
        "entity_causing_harm",
        "entity_doing_cheating",
        "entity_doing_betrayal",
        "failing_authority",
        "entity_causing_degradation",
    ])
    # one per foundation
    assert len({role_to_mf(r) for r in negative}) == 5


def test_target_roles():
    assert sorted(r.value for r in TARGET_ROLES) == sorted([
        "target_of_care_harm",
        "target_of_fairness_cheating",
        "target_of_loyalty_betrayal",
        "justified_authority_over",
        "failing_authority_over",
        "target_of_purity_degradation",
    ])


def test_same_polarity_symmetry():
    for a in ROLES:
        for b in ROLES:
            assert same_polarity(a, b) == same_polarity(b, a)
        assert same_polarity(a, a)


def test_total_order_matches_declaration_order():
    assert sorted(ROLES) == list(ROLES)
    assert sorted(FOUNDATIONS) == list(FOUNDATIONS)
    assert MoralRole.TARGET_OF_CARE_HARM < MoralRole.ENTITY_CAUSING_HARM
