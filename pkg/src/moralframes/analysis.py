"""Post-prediction analytics: partisanship z-scores, the three-way error
taxonomy, frequent-entity rankings with n-gram merging, entity-relation
graphs, polarity rank series, and per-entity role distributions."""

import json
import math
import re
from dataclasses import dataclass, field

from .errors import DataError
from .taxonomy import (
    TARGET_ROLES,
    MoralFoundation,
    MoralRole,
    Polarity,
    role_polarity,
    role_to_mf,
)


@dataclass
class PredictionRow:
    tweet_id: str
    ideology: str
    topic: str
    entity_id: str | None          # None for tweet-level rows
    pred_mf: MoralFoundation
    pred_role: MoralRole | None = None
    gold_mf: MoralFoundation | None = None
    gold_role: MoralRole | None = None


@dataclass
class PredictionSet:
    rows: list[PredictionRow] = field(default_factory=list)

    def tweet_rows(self) -> list[PredictionRow]:
        return [r for r in self.rows if r.entity_id is None]

    def entity_rows(self) -> list[PredictionRow]:
        return [r for r in self.rows if r.entity_id is not None]

    def to_jsonl(self) -> str:
        lines = []
        for r in self.rows:
            lines.append(json.dumps({
                "tweet_id": r.tweet_id, "ideology": r.ideology, "topic": r.topic,
                "entity_id": r.entity_id,
                "pred_mf": r.pred_mf.value,
                "pred_role": r.pred_role.value if r.pred_role else None,
                "gold_mf": r.gold_mf.value if r.gold_mf else None,
                "gold_role": r.gold_role.value if r.gold_role else None,
            }, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "PredictionSet":
        rows = []
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            rows.append(PredictionRow(
                d["tweet_id"], d["ideology"], d["topic"], d["entity_id"],
                MoralFoundation(d["pred_mf"]),
                MoralRole(d["pred_role"]) if d["pred_role"] else None,
                MoralFoundation(d["gold_mf"]) if d["gold_mf"] else None,
                MoralRole(d["gold_role"]) if d["gold_role"] else None,
            ))
        return cls(rows)


def build_prediction_set(instances, predictions) -> PredictionSet:
    """Join decoded predictions back onto instance metadata."""
    ps = PredictionSet()
    for inst in instances:
        pred_mf = predictions.mf[inst.id]
        ps.rows.append(PredictionRow(inst.id, inst.ideology, inst.topic, None,
                                     pred_mf, None, inst.gold_mf, None))
        for ent in inst.entities:
            ps.rows.append(PredictionRow(
                inst.id, inst.ideology, inst.topic, ent.entity_id, pred_mf,
                predictions.roles.get((inst.id, ent.entity_id)),
                inst.gold_mf, ent.gold_role))
    return ps


# -- entity aliasing -------------------------------------------------------


class EntityAliasMap:
    """Maps surface aliases to canonical entity names (case-folded)."""

    def __init__(self, groups: dict[str, list[str]] | None = None):
        self.canonical: dict[str, str] = {}
        for canon, aliases in (groups or {}).items():
            canon = canon.casefold()
            for alias in aliases + [canon]:
                alias = alias.casefold()
                if self.canonical.get(alias, canon) != canon:
                    raise DataError(f"alias {alias!r} claimed by two canonicals")
                self.canonical[alias] = canon

    def resolve(self, entity_id: str) -> str:
        return self.canonical.get(entity_id.casefold(), entity_id.casefold())

    def apply(self, ps: PredictionSet) -> PredictionSet:
        out = PredictionSet()
        for r in ps.rows:
            ent = self.resolve(r.entity_id) if r.entity_id is not None else None
            out.rows.append(PredictionRow(r.tweet_id, r.ideology, r.topic, ent,
                                          r.pred_mf, r.pred_role, r.gold_mf,
                                          r.gold_role))
        return out

    @classmethod
    def load(cls, path) -> "EntityAliasMap":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))


# -- partisanship z-score ---------------------------------------------------


def partisanship_zscore(counts_left: tuple[int, int],
                        counts_right: tuple[int, int]) -> tuple[float, bool]:
    """Pooled two-proportion z statistic; positive means left-leaning.

    Returns (z, degenerate); z is defined as 0 with the flag set when the
    pooled proportion is 0 or 1.
    """
    s_l, n_l = counts_left
    s_r, n_r = counts_right
    if n_l < 1 or n_r < 1:
        raise DataError("both sides need at least one trial")
    p_l, p_r = s_l / n_l, s_r / n_r
    pooled = (s_l + s_r) / (n_l + n_r)
    if pooled in (0.0, 1.0):
        return 0.0, True
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n_l + 1.0 / n_r))
    return (p_l - p_r) / se, False


def partisanship_table(ps: PredictionSet) -> list[dict]:
    """Per topic: common-MF z score and the most partisan (role, entity)
    on each side."""
    topics = sorted({r.topic for r in ps.rows})
    out = []
    for topic in topics:
        tweet_rows = [r for r in ps.tweet_rows() if r.topic == topic]
        n_l = sum(1 for r in tweet_rows if r.ideology == "left")
        n_r = len(tweet_rows) - n_l
        if n_l == 0 or n_r == 0:
            continue
        mf_z = {}
        for mf in MoralFoundation:
            s_l = sum(1 for r in tweet_rows
                      if r.ideology == "left" and r.pred_mf == mf)
            s_r = sum(1 for r in tweet_rows
                      if r.ideology == "right" and r.pred_mf == mf)
            mf_z[mf] = partisanship_zscore((s_l, n_l), (s_r, n_r))[0]
        common_mf = max(
            MoralFoundation,
            key=lambda mf: sum(1 for r in tweet_rows if r.pred_mf == mf))

        ent_rows = [r for r in ps.entity_rows() if r.topic == topic]
        e_l = sum(1 for r in ent_rows if r.ideology == "left")
        e_r = len(ent_rows) - e_l
        pair_z = {}
        if e_l and e_r:
            pairs = sorted({(r.pred_role, r.entity_id) for r in ent_rows
                            if r.pred_role is not None})
            for role, ent in pairs:
                s_l = sum(1 for r in ent_rows if r.ideology == "left"
                          and r.pred_role == role and r.entity_id == ent)
                s_r = sum(1 for r in ent_rows if r.ideology == "right"
                          and r.pred_role == role and r.entity_id == ent)
                pair_z[(role, ent)] = partisanship_zscore((s_l, e_l), (s_r, e_r))[0]
        most_left = max(pair_z, key=lambda k: (pair_z[k], k[0].value, k[1])) if pair_z else None
        most_right = min(pair_z, key=lambda k: (pair_z[k], k[0].value, k[1])) if pair_z else None
        out.append({
            "topic": topic,
            "common_mf": common_mf.value,
            "common_mf_z": mf_z[common_mf],
            "most_partisan_left": _pair_cell(most_left, pair_z),
            "most_partisan_right": _pair_cell(most_right, pair_z),
        })
    return out


def _pair_cell(pair, pair_z):
    if pair is None:
        return None
    role, ent = pair
    return {"role": role.value, "entity": ent, "z": pair_z[pair]}


# -- error taxonomy ----------------------------------------------------------


def error_taxonomy(ps: PredictionSet) -> tuple[int, int, int]:
    """Counts of (polarity swap, role outside gold MF, all-same-role) errors.

    Polarity swaps and wrong-foundation roles count per entity row; the
    all-same-role error counts per tweet with two or more entities whose
    predicted roles are all equal while the gold roles are not.
    """
    e1 = e2 = e3 = 0
    by_tweet: dict[str, list[PredictionRow]] = {}
    for r in ps.entity_rows():
        if r.pred_role is None:
            continue
        by_tweet.setdefault(r.tweet_id, []).append(r)
        if r.gold_role is not None and \
                role_polarity(r.pred_role) != role_polarity(r.gold_role):
            e1 += 1
        if r.gold_mf is not None and role_to_mf(r.pred_role) != r.gold_mf:
            e2 += 1
    for rows in by_tweet.values():
        if len(rows) < 2:
            continue
        preds = {r.pred_role for r in rows}
        golds = {r.gold_role for r in rows if r.gold_role is not None}
        if len(preds) == 1 and len(golds) > 1:
            e3 += 1
    return e1, e2, e3


# -- frequent entities with n-gram merging ------------------------------------

_SUFFIXES = ("ingly", "edly", "ing", "ies", "ied", "ers", "ily", "ed",
             "er", "es", "ly", "s")


def stem(token: str) -> str:
    """Light suffix-stripping stemmer (deterministic, dictionary-free)."""
    tok = token.lower()
    for suf in _SUFFIXES:
        if tok.endswith(suf) and len(tok) - len(suf) >= 3:
            tok = tok[: len(tok) - len(suf)]
            break
    return tok


def _stemmed_ngrams(surface: str, n_max: int):
    toks = [stem(t) for t in re.split(r"[^\w]+", surface.lower()) if t]
    for n in range(1, min(n_max, len(toks)) + 1):
        for i in range(len(toks) - n + 1):
            yield tuple(toks[i:i + n])


def _is_subseq(short: tuple, long: tuple) -> bool:
    if len(short) >= len(long):
        return False
    return any(long[i:i + len(short)] == short
               for i in range(len(long) - len(short) + 1))


def top_entities_per_role(ps: PredictionSet, top_k: int = 5,
                          n_max: int = 5) -> dict[tuple[str, str], list[tuple[str, int]]]:
    """Per (ideology, role): frequent stemmed n-grams over predicted-entity
    surfaces, with contained n-grams merged into higher-count groups.

    Returns (ideology, role value) -> [(representative ngram, count)].
    """
    counters: dict[tuple[str, str], dict[tuple, int]] = {}
    for r in ps.entity_rows():
        if r.pred_role is None:
            continue
        key = (r.ideology, r.pred_role.value)
        counts = counters.setdefault(key, {})
        for gram in set(_stemmed_ngrams(r.entity_id, n_max)):
            counts[gram] = counts.get(gram, 0) + 1
    out = {}
    for key, counts in counters.items():
        out[key] = merge_ngram_groups(counts)[:top_k]
    return out


def merge_ngram_groups(counts: dict[tuple, int]) -> list[tuple[str, int]]:
    """Merge each n-gram into a strictly containing-or-contained group led
    by the higher-count member; ties break lexicographically."""
    ordered = sorted(counts.items(), key=lambda p: (-p[1], p[0]))
    leaders: list[tuple[tuple, int]] = []
    for gram, count in ordered:
        merged = False
        for lead, _ in leaders:
            if _is_subseq(lead, gram) or _is_subseq(gram, lead):
                merged = True
                break
        if not merged:
            leaders.append((gram, count))
    return [(" ".join(g), c) for g, c in leaders]


# -- entity-relation graph -----------------------------------------------------


@dataclass
class RelationGraph:
    nodes: dict[str, dict] = field(default_factory=dict)  # entity -> attrs
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    underfull: bool = False

    def to_dot(self) -> str:
        lines = ["digraph relations {"]
        for name in sorted(self.nodes):
            attrs = self.nodes[name]
            lines.append(
                f'  "{name}" [role="{attrs["role"]}" class="{attrs["class"]}"];')
        for (src, dst) in sorted(self.edges):
            lines.append(f'  "{src}" -> "{dst}" [weight={self.edges[(src, dst)]}];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dot(cls, text: str) -> "RelationGraph":
        graph = cls()
        node_re = re.compile(r'^\s*"([^"]+)"\s+\[role="([^"]+)" class="([^"]+)"\];')
        edge_re = re.compile(r'^\s*"([^"]+)"\s*->\s*"([^"]+)"\s+\[weight=(\d+)\];')
        for line in text.splitlines():
            m = node_re.match(line)
            if m:
                graph.nodes[m.group(1)] = {"role": m.group(2), "class": m.group(3)}
                continue
            m = edge_re.match(line)
            if m:
                graph.edges[(m.group(1), m.group(2))] = int(m.group(3))
        return graph

    def to_json(self) -> str:
        return json.dumps({
            "nodes": self.nodes,
            "edges": [
                {"source": s, "target": t, "weight": w}
                for (s, t), w in sorted(self.edges.items())
            ],
            "underfull": self.underfull,
        }, sort_keys=True, indent=2)


def _modal_role(rows: list[PredictionRow]) -> MoralRole:
    counts: dict[MoralRole, int] = {}
    for r in rows:
        counts[r.pred_role] = counts.get(r.pred_role, 0) + 1
    return max(sorted(counts, key=lambda x: x.value), key=lambda x: counts[x])


def build_relation_graph(ps: PredictionSet, mf: MoralFoundation, ideology: str,
                         min_count: int = 15, n_targets: int = 2,
                         n_actors: int = 3) -> RelationGraph:
    """Top targets of one foundation plus the positive/negative actor
    entities co-mentioned with them, edges weighted by co-mention count."""
    rows = [r for r in ps.entity_rows()
            if r.ideology == ideology and r.pred_role is not None]
    entity_total: dict[str, int] = {}
    for r in rows:
        entity_total[r.entity_id] = entity_total.get(r.entity_id, 0) + 1
    rows = [r for r in rows if entity_total[r.entity_id] >= min_count]
    by_entity: dict[str, list[PredictionRow]] = {}
    for r in rows:
        by_entity.setdefault(r.entity_id, []).append(r)

    def usage(ent: str, pred) -> int:
        return sum(1 for r in by_entity[ent] if pred(r))

    target_counts = {
        e: usage(e, lambda r: r.pred_role in TARGET_ROLES and role_to_mf(r.pred_role) == mf)
        for e in by_entity}
    targets = [e for e, c in sorted(target_counts.items(),
                                    key=lambda p: (-p[1], p[0])) if c > 0][:n_targets]

    target_tweets = {
        e: {r.tweet_id for r in by_entity[e]
            if r.pred_role in TARGET_ROLES and role_to_mf(r.pred_role) == mf}
        for e in targets}
    all_target_tweets = set().union(*target_tweets.values()) if targets else set()

    def actor_count(ent: str, polarity: Polarity) -> int:
        return sum(
            1 for r in by_entity[ent]
            if r.tweet_id in all_target_tweets and r.pred_role not in TARGET_ROLES
            and role_polarity(r.pred_role) == polarity)

    actors = {}
    for polarity, cls in ((Polarity.POSITIVE, "positive-actor"),
                          (Polarity.NEGATIVE, "negative-actor")):
        ranked = sorted(
            ((actor_count(e, polarity), e) for e in by_entity if e not in targets),
            key=lambda p: (-p[0], p[1]))
        actors[cls] = [e for c, e in ranked if c > 0][:n_actors]

    graph = RelationGraph()
    graph.underfull = (len(targets) < n_targets
                       or any(len(v) < n_actors for v in actors.values()))
    for e in targets:
        graph.nodes[e] = {"role": _modal_role(by_entity[e]).value, "class": "target"}
    for cls, ents in actors.items():
        for e in ents:
            graph.nodes.setdefault(
                e, {"role": _modal_role(by_entity[e]).value, "class": cls})
    for cls, ents in actors.items():
        for actor in ents:
            actor_tweets = {r.tweet_id for r in by_entity[actor]}
            for target in targets:
                weight = len(actor_tweets & target_tweets[target])
                if weight >= 1:
                    graph.edges[(actor, target)] = weight
    return graph


# -- polarity rank and role distribution ---------------------------------------


def polarity_rank(ps: PredictionSet, entity_id: str,
                  min_role_count: int = 10) -> dict[str, list[tuple[str, float]]]:
    """Per ideology: (role, normalized usage rank) series for one entity.

    Roles used fewer than ``min_role_count`` times are dropped; ranks are
    min-max normalized to [0, 1], highest usage at 1.
    """
    out: dict[str, list[tuple[str, float]]] = {}
    for ideology in ("left", "right"):
        counts: dict[MoralRole, int] = {}
        for r in ps.entity_rows():
            if r.ideology == ideology and r.entity_id == entity_id and r.pred_role:
                counts[r.pred_role] = counts.get(r.pred_role, 0) + 1
        kept = {role: c for role, c in counts.items() if c >= min_role_count}
        if not kept:
            out[ideology] = []
            continue
        ranked = sorted(kept.items(), key=lambda p: (p[1], p[0].value))
        if len(ranked) == 1:
            out[ideology] = [(ranked[0][0].value, 1.0)]
            continue
        hi = len(ranked) - 1
        out[ideology] = [(role.value, i / hi) for i, (role, _) in enumerate(ranked)]
    return out


def role_distribution(ps: PredictionSet, entity_id: str,
                      ideology: str | None = None) -> dict[str, float]:
    """Fraction of each predicted role for one entity; sums to 1."""
    counts: dict[str, int] = {}
    for r in ps.entity_rows():
        if r.entity_id != entity_id or r.pred_role is None:
            continue
        if ideology is not None and r.ideology != ideology:
            continue
        counts[r.pred_role.value] = counts.get(r.pred_role.value, 0) + 1
    total = sum(counts.values())
    return {role: c / total for role, c in sorted(counts.items())} if total else {}


def render_markdown_table(headers: list[str], rows: list[list]) -> str:
    lines = ["| " + " | ".join(headers) + " |",
             "| " + " | ".join("---" for _ in headers) + " |"]
    for row in rows:
        lines.append("| " + " | ".join(str(c) for c in row) + " |")
    return "\n".join(lines) + "\n"
