"""Corpus ingestion and the relational knowledge base."""

import json
import logging
import warnings
from dataclasses import dataclass, field

from .errors import DataError
from .taxonomy import FOUNDATIONS, ROLES, MoralFoundation, MoralRole

logger = logging.getLogger(__name__)

IDEOLOGIES = ("left", "right")


@dataclass(frozen=True)
class EntityMention:
    surface: str
    start: int
    end: int
    gold_role: MoralRole | None = None

    @property
    def entity_id(self) -> str:
        # Entity identity is case-folded exact surface match.
        return self.surface.casefold()


@dataclass
class TweetInstance:
    id: str
    text: str
    ideology: str
    topic: str
    entities: list[EntityMention] = field(default_factory=list)
    gold_mf: MoralFoundation | None = None

    @property
    def tokens(self) -> list[str]:
        return tokenize(self.text)

    @property
    def gold_roles(self) -> dict[str, MoralRole]:
        return {
            e.entity_id: e.gold_role
            for e in self.entities
            if e.gold_role is not None
        }


_PUNCT = set(".,;:!?\"'()[]{}#@&-/\\")


def tokenize(text: str) -> list[str]:
    """Whitespace + punctuation splitting, lower-cased."""
    out = []
    cur = []
    for ch in text:
        if ch.isspace() or ch in _PUNCT:
            if cur:
                out.append("".join(cur))
                cur = []
        else:
            cur.append(ch.lower())
    if cur:
        out.append("".join(cur))
    return out


class KnowledgeBase:
    """Immutable store of ground atoms, indexed by predicate and argument.

    Atom values are truth values in [0, 1]; observed boolean atoms are
    stored as 1.0. Lookup order is insertion order, which is deterministic
    given identical input files.
    """

    def __init__(self):
        self._atoms: dict[str, dict[tuple, float]] = {}
        self._index: dict[tuple, dict] = {}
        self._frozen = False

    def add(self, predicate: str, args: tuple, value: float = 1.0):
        if self._frozen:
            raise DataError("knowledge base is frozen")
        self._atoms.setdefault(predicate, {})[args] = value

    def freeze(self):
        self._frozen = True
        return self

    def value(self, predicate: str, args: tuple) -> float | None:
        return self._atoms.get(predicate, {}).get(args)

    def atoms(self, predicate: str) -> list[tuple]:
        return list(self._atoms.get(predicate, {}).keys())

    def match(self, predicate: str, pattern: tuple) -> list[tuple]:
        """All atom argument tuples matching a pattern (None = wildcard)."""
        bound = [(i, c) for i, c in enumerate(pattern) if c is not None]
        if not bound:
            return self.atoms(predicate)
        # Index on the first bound position, then filter the rest.
        pos, const = bound[0]
        key = (predicate, pos)
        if key not in self._index:
            idx: dict = {}
            for args in self._atoms.get(predicate, {}):
                idx.setdefault(args[pos], []).append(args)
            self._index[key] = idx
        candidates = self._index[key].get(const, [])
        rest = bound[1:]
        return [a for a in candidates if all(a[i] == c for i, c in rest)]


def _parse_mf(name: str, lineno: int) -> MoralFoundation:
    try:
        return MoralFoundation(name)
    except ValueError:
        raise DataError(f"line {lineno}: unknown moral foundation {name!r}") from None


def _parse_role(name: str, lineno: int) -> MoralRole:
    try:
        return MoralRole(name)
    except ValueError:
        raise DataError(f"line {lineno}: unknown moral role {name!r}") from None


def load_corpus(path) -> tuple[list[TweetInstance], KnowledgeBase]:
    """Load a JSONL corpus and materialize its relational atoms.

    Produces Tweet, Ent, Ideo and Topic atoms; gold labels are kept on the
    TweetInstance records, not in the knowledge base.
    """
    instances = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: invalid JSON: {exc}") from None
            instances.append(_record_to_instance(rec, lineno, seen))
    kb = build_kb(instances)
    return instances, kb


def _record_to_instance(rec: dict, lineno: int, seen: set) -> TweetInstance:
    for key in ("id", "text", "ideology", "topic"):
        if key not in rec:
            raise DataError(f"line {lineno}: missing field {key!r}")
    tid = str(rec["id"])
    if tid in seen:
        raise DataError(f"line {lineno}: duplicate tweet id {tid!r}")
    seen.add(tid)
    ideology = rec["ideology"]
    if ideology not in IDEOLOGIES:
        raise DataError(f"line {lineno}: unknown ideology {ideology!r}")
    text = rec["text"]
    entities = []
    for ent in rec.get("entities", []):
        start, end = int(ent["start"]), int(ent["end"])
        if not (0 <= start <= end <= len(text)):
            raise DataError(f"line {lineno}: entity span [{start}, {end}) outside text")
        gold_role = None
        if ent.get("gold_role") is not None:
            gold_role = _parse_role(ent["gold_role"], lineno)
        entities.append(EntityMention(ent["surface"], start, end, gold_role))
    gold_mf = None
    if rec.get("gold_mf") is not None:
        gold_mf = _parse_mf(rec["gold_mf"], lineno)
    return TweetInstance(
        id=tid, text=text, ideology=ideology, topic=str(rec["topic"]),
        entities=entities, gold_mf=gold_mf,
    )


def build_kb(instances: list[TweetInstance]) -> KnowledgeBase:
    """Materialize Tweet/Ent/Ideo/Topic atoms for a batch of instances."""
    kb = KnowledgeBase()
    for inst in instances:
        kb.add("Tweet", (inst.id,))
        kb.add("Ideo", (inst.id, inst.ideology))
        kb.add("Topic", (inst.id, inst.topic))
        for ent in inst.entities:
            kb.add("Ent", (inst.id, ent.entity_id))
    return kb.freeze()


class PriorScores:
    """External prior scores for MF and role candidates.

    Missing entries are absent, not zero; absent priors produce no
    grounding of the prior rules.
    """

    def __init__(self):
        self.mf: dict[tuple[str, MoralFoundation], float] = {}
        self.role: dict[tuple[str, str, MoralRole], float] = {}

    def __len__(self):
        return len(self.mf) + len(self.role)

    def set_mf(self, tweet_id: str, mf: MoralFoundation, score: float):
        self.mf[(tweet_id, mf)] = _clamp_score(score, f"MF prior {tweet_id}/{mf.value}")

    def set_role(self, tweet_id: str, entity_id: str, role: MoralRole, score: float):
        self.role[(tweet_id, entity_id, role)] = _clamp_score(
            score, f"role prior {tweet_id}/{entity_id}/{role.value}")


def _clamp_score(score: float, what: str) -> float:
    if not (score == score) or score in (float("inf"), float("-inf")):
        raise DataError(f"{what}: score must be finite, got {score}")
    if score < 0.0 or score > 1.0:
        warnings.warn(f"{what}: score {score} clamped to [0, 1]")
        return min(max(score, 0.0), 1.0)
    return score


_MF_NAMES = {mf.value for mf in FOUNDATIONS}
_ROLE_NAMES = {r.value for r in ROLES}


def load_priors(path, instances: list[TweetInstance]) -> PriorScores:
    """Load a priors TSV: tweet_id [entity_id] label score."""
    tweet_ids = {inst.id for inst in instances}
    entity_ids = {
        (inst.id, ent.entity_id) for inst in instances for ent in inst.entities
    }
    priors = PriorScores()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) == 3:
                tid, label, score = parts
                ent = None
            elif len(parts) == 4:
                tid, ent, label, score = parts
            else:
                raise DataError(f"line {lineno}: expected 3 or 4 tab-separated fields")
            if tid not in tweet_ids:
                raise DataError(f"line {lineno}: unknown tweet id {tid!r}")
            try:
                score = float(score)
            except ValueError:
                raise DataError(f"line {lineno}: bad score {score!r}") from None
            if ent is None:
                if label not in _MF_NAMES:
                    raise DataError(f"line {lineno}: unknown MF label {label!r}")
                priors.set_mf(tid, MoralFoundation(label), score)
            else:
                ent = ent.casefold()
                if (tid, ent) not in entity_ids:
                    raise DataError(f"line {lineno}: unknown entity {ent!r} for tweet {tid!r}")
                if label not in _ROLE_NAMES:
                    raise DataError(f"line {lineno}: unknown role label {label!r}")
                priors.set_role(tid, ent, MoralRole(label), score)
    return priors
