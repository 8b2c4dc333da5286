"""Label taxonomy: moral foundations, moral roles, and their mappings."""

from enum import Enum


class MoralFoundation(Enum):
    CARE_HARM = "care_harm"
    FAIRNESS_CHEATING = "fairness_cheating"
    LOYALTY_BETRAYAL = "loyalty_betrayal"
    AUTHORITY_SUBVERSION = "authority_subversion"
    PURITY_DEGRADATION = "purity_degradation"

    def __lt__(self, other):
        if not isinstance(other, MoralFoundation):
            return NotImplemented
        return _MF_ORDER[self] < _MF_ORDER[other]


_MF_ORDER = {mf: i for i, mf in enumerate(MoralFoundation)}


class Polarity(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


class MoralRole(Enum):
    TARGET_OF_CARE_HARM = "target_of_care_harm"
    ENTITY_CAUSING_HARM = "entity_causing_harm"
    ENTITY_PROVIDING_CARE = "entity_providing_care"
    TARGET_OF_FAIRNESS_CHEATING = "target_of_fairness_cheating"
    ENTITY_ENSURING_FAIRNESS = "entity_ensuring_fairness"
    ENTITY_DOING_CHEATING = "entity_doing_cheating"
    TARGET_OF_LOYALTY_BETRAYAL = "target_of_loyalty_betrayal"
    ENTITY_BEING_LOYAL = "entity_being_loyal"
    ENTITY_DOING_BETRAYAL = "entity_doing_betrayal"
    JUSTIFIED_AUTHORITY = "justified_authority"
    JUSTIFIED_AUTHORITY_OVER = "justified_authority_over"
    FAILING_AUTHORITY = "failing_authority"
    FAILING_AUTHORITY_OVER = "failing_authority_over"
    TARGET_OF_PURITY_DEGRADATION = "target_of_purity_degradation"
    ENTITY_PRESERVING_PURITY = "entity_preserving_purity"
    ENTITY_CAUSING_DEGRADATION = "entity_causing_degradation"

    def __lt__(self, other):
        if not isinstance(other, MoralRole):
            return NotImplemented
        return _ROLE_ORDER[self] < _ROLE_ORDER[other]


_ROLE_ORDER = {r: i for i, r in enumerate(MoralRole)}


_ROLE_TO_MF = {
    MoralRole.TARGET_OF_CARE_HARM: MoralFoundation.CARE_HARM,
    MoralRole.ENTITY_CAUSING_HARM: MoralFoundation.CARE_HARM,
    MoralRole.ENTITY_PROVIDING_CARE: MoralFoundation.CARE_HARM,
    MoralRole.TARGET_OF_FAIRNESS_CHEATING: MoralFoundation.FAIRNESS_CHEATING,
    MoralRole.ENTITY_ENSURING_FAIRNESS: MoralFoundation.FAIRNESS_CHEATING,
    MoralRole.ENTITY_DOING_CHEATING: MoralFoundation.FAIRNESS_CHEATING,
    MoralRole.TARGET_OF_LOYALTY_BETRAYAL: MoralFoundation.LOYALTY_BETRAYAL,
    MoralRole.ENTITY_BEING_LOYAL: MoralFoundation.LOYALTY_BETRAYAL,
    MoralRole.ENTITY_DOING_BETRAYAL: MoralFoundation.LOYALTY_BETRAYAL,
    MoralRole.JUSTIFIED_AUTHORITY: MoralFoundation.AUTHORITY_SUBVERSION,
    MoralRole.JUSTIFIED_AUTHORITY_OVER: MoralFoundation.AUTHORITY_SUBVERSION,
    MoralRole.FAILING_AUTHORITY: MoralFoundation.AUTHORITY_SUBVERSION,
    MoralRole.FAILING_AUTHORITY_OVER: MoralFoundation.AUTHORITY_SUBVERSION,
    MoralRole.TARGET_OF_PURITY_DEGRADATION: MoralFoundation.PURITY_DEGRADATION,
    MoralRole.ENTITY_PRESERVING_PURITY: MoralFoundation.PURITY_DEGRADATION,
    MoralRole.ENTITY_CAUSING_DEGRADATION: MoralFoundation.PURITY_DEGRADATION,
}

# One negative role per foundation; everything else is positive.
_NEGATIVE_ROLES = frozenset({
    MoralRole.ENTITY_CAUSING_HARM,
    MoralRole.ENTITY_DOING_CHEATING,
    MoralRole.ENTITY_DOING_BETRAYAL,
    MoralRole.FAILING_AUTHORITY,
    MoralRole.ENTITY_CAUSING_DEGRADATION,
})

# Roles that name the entity the moral sentiment is directed at, rather
# than the acting entity.
TARGET_ROLES = frozenset({
    MoralRole.TARGET_OF_CARE_HARM,
    MoralRole.TARGET_OF_FAIRNESS_CHEATING,
    MoralRole.TARGET_OF_LOYALTY_BETRAYAL,
    MoralRole.JUSTIFIED_AUTHORITY_OVER,
    MoralRole.FAILING_AUTHORITY_OVER,
    MoralRole.TARGET_OF_PURITY_DEGRADATION,
})


def role_to_mf(role: MoralRole) -> MoralFoundation:
    """Return the foundation that owns a role."""
    return _ROLE_TO_MF[role]


def role_polarity(role: MoralRole) -> Polarity:
    """Return the sentiment polarity intrinsically carried by a role."""
    return Polarity.NEGATIVE if role in _NEGATIVE_ROLES else Polarity.POSITIVE


def roles_of_foundation(mf: MoralFoundation) -> list[MoralRole]:
    """Roles belonging to a foundation, in canonical order."""
    return [r for r in MoralRole if _ROLE_TO_MF[r] == mf]


def same_polarity(r1: MoralRole, r2: MoralRole) -> bool:
    return role_polarity(r1) == role_polarity(r2)


FOUNDATIONS = tuple(MoralFoundation)
ROLES = tuple(MoralRole)
