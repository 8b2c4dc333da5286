"""PMI lexicon induction, dictionary matching, and the matching baseline.

An n-gram w is scored against label l by I(w, l) = log(P(w|l) / P(w)),
where P(w|l) counts w over documents labeled l (normalized by the total
n-gram count of the same order) and P(w) counts over all documents.
"""

import math
import random
from dataclasses import dataclass, field

from .corpus import tokenize
from .errors import DataError

EPS = 1e-12


@dataclass
class PmiConfig:
    n_max: int = 5
    min_count: int = 2
    top_k: int = 200
    smoothing: float = EPS

    def __post_init__(self):
        if self.n_max < 1:
            raise DataError("n_max must be >= 1")
        if self.min_count < 1:
            raise DataError("min count must be >= 1")


@dataclass
class LexiconEntry:
    ngram: tuple[str, ...]
    weight: float
    provenance: str  # "pmi" or "mfd"


@dataclass
class Lexicon:
    entries: dict[str, list[LexiconEntry]] = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        return list(self.entries)

    def add(self, label: str, entry: LexiconEntry):
        bucket = self.entries.setdefault(label, [])
        if any(e.ngram == entry.ngram for e in bucket):
            raise DataError(f"duplicate ngram {entry.ngram} for label {label!r}")
        bucket.append(entry)

    def score_text(self, text: str) -> dict[str, float]:
        """Per-label sum of matched n-gram weights.

        Matching is longest-first and non-overlapping within a label;
        every non-overlapping occurrence counts.
        """
        tokens = tokenize(text)
        out = {}
        for label, bucket in self.entries.items():
            by_ngram = {e.ngram: e for e in bucket}
            ordered = sorted(by_ngram, key=lambda g: (-len(g), g))
            used = [False] * len(tokens)
            score = 0.0
            for gram in ordered:
                entry = by_ngram[gram]
                n = len(gram)
                i = 0
                while i + n <= len(tokens):
                    window = tuple(tokens[i:i + n])
                    if any(used[i:i + n]) or not _gram_matches(gram, window, entry):
                        i += 1
                        continue
                    score += entry.weight
                    for j in range(i, i + n):
                        used[j] = True
                    i += n
            out[label] = score
        return out

    def to_tsv(self) -> str:
        lines = []
        for label in sorted(self.entries):
            for e in sorted(self.entries[label], key=lambda e: (-e.weight, e.ngram)):
                lines.append(f"{label}\t{' '.join(e.ngram)}\t{e.weight:.12g}\t{e.provenance}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str) -> "Lexicon":
        lex = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(f"lexicon line {lineno}: expected 4 fields")
            label, gram, weight, prov = parts
            lex.add(label, LexiconEntry(tuple(gram.split()), float(weight), prov))
        return lex


def _gram_matches(gram, window, entry) -> bool:
    # MFD stems ending in '*' match any token with that prefix.
    if entry.provenance == "mfd":
        return all(
            w.startswith(g[:-1]) if g.endswith("*") else w == g
            for g, w in zip(gram, window))
    return gram == window


def _ngrams(tokens: list[str], n: int):
    for i in range(len(tokens) - n + 1):
        yield tuple(tokens[i:i + n])


def build_pmi_lexicon(documents: list[tuple[str, str]],
                      cfg: PmiConfig | None = None) -> Lexicon:
    """Induce a per-label n-gram lexicon ranked by PMI.

    ``documents`` is a list of (text, label). Weights are the positive PMI
    values normalized by the per-label maximum, so the top entry of each
    label has weight 1 and all weights stay in (0, 1].
    """
    cfg = cfg or PmiConfig()
    if not documents:
        raise DataError("empty corpus")
    labels = sorted({label for _, label in documents})
    docs_by_label: dict[str, list[list[str]]] = {l: [] for l in labels}
    for text, label in documents:
        docs_by_label[label].append(tokenize(text))
    for label in labels:
        if not docs_by_label[label]:
            raise DataError(f"label {label!r} has zero documents")

    # counts per n-gram order, per label and global
    counts_global: dict[int, dict[tuple, int]] = {n: {} for n in range(1, cfg.n_max + 1)}
    totals_global = {n: 0 for n in range(1, cfg.n_max + 1)}
    counts_label: dict[str, dict[int, dict[tuple, int]]] = {
        l: {n: {} for n in range(1, cfg.n_max + 1)} for l in labels}
    totals_label = {l: {n: 0 for n in range(1, cfg.n_max + 1)} for l in labels}

    for label in labels:
        for tokens in docs_by_label[label]:
            for n in range(1, cfg.n_max + 1):
                for gram in _ngrams(tokens, n):
                    counts_global[n][gram] = counts_global[n].get(gram, 0) + 1
                    counts_label[label][n][gram] = counts_label[label][n].get(gram, 0) + 1
                    totals_global[n] += 1
                    totals_label[label][n] += 1

    lexicon = Lexicon()
    for label in labels:
        scored = []
        for n in range(1, cfg.n_max + 1):
            for gram, c in counts_label[label][n].items():
                if c < cfg.min_count:
                    continue
                p_wl = c / totals_label[label][n]
                p_w = counts_global[n][gram] / totals_global[n]
                i_wl = math.log((p_wl + cfg.smoothing) / (p_w + cfg.smoothing))
                scored.append((i_wl, gram))
        scored = [(i, g) for i, g in scored if i > 0.0]
        scored.sort(key=lambda p: (-p[0], p[1]))
        scored = scored[:cfg.top_k]
        if not scored:
            lexicon.entries.setdefault(label, [])
            continue
        max_i = scored[0][0]
        for i_wl, gram in scored:
            lexicon.add(label, LexiconEntry(gram, i_wl / max_i, "pmi"))
    return lexicon


def pmi_score(documents: list[tuple[str, str]], ngram: tuple[str, ...],
              label: str, smoothing: float = EPS) -> float:
    """PMI of one n-gram with one label; reference path for spot checks."""
    n = len(ngram)
    c_l = t_l = c_all = t_all = 0
    for text, lab in documents:
        tokens = tokenize(text)
        for gram in _ngrams(tokens, n):
            t_all += 1
            if lab == label:
                t_l += 1
            if gram == ngram:
                c_all += 1
                if lab == label:
                    c_l += 1
    if t_l == 0:
        raise DataError(f"label {label!r} has zero documents")
    return math.log((c_l / t_l + smoothing) / (c_all / t_all + smoothing))


def load_mfd(path) -> Lexicon:
    """Moral-foundation dictionary: one stem per line under a [label]
    section header; every entry carries weight exactly 1."""
    lex = Lexicon()
    label = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                label = line[1:-1].strip()
                lex.entries.setdefault(label, [])
                continue
            if label is None:
                raise DataError(f"MFD line {lineno}: entry before any [label] header")
            lex.add(label, LexiconEntry(tuple(line.lower().split()), 1.0, "mfd"))
    return lex


def merge_lexicons(a: Lexicon, b: Lexicon) -> Lexicon:
    """Union of entries; on an n-gram collision the higher weight wins."""
    merged = Lexicon()
    for src in (a, b):
        for label, bucket in src.entries.items():
            merged.entries.setdefault(label, [])
            for entry in bucket:
                existing = next((e for e in merged.entries[label]
                                 if e.ngram == entry.ngram), None)
                if existing is None:
                    merged.entries[label].append(entry)
                elif entry.weight > existing.weight:
                    merged.entries[label].remove(existing)
                    merged.entries[label].append(entry)
    return merged


def lexicon_baseline_predict(lexicon: Lexicon, texts: list[str], labels: list[str],
                             seed: int = 0) -> tuple[list[str], float]:
    """Argmax-of-lexicon-score baseline.

    Zero-score and tied texts get a label drawn uniformly with the run
    seed; returns (predictions, fraction of random fallbacks).
    """
    rng = random.Random(seed)
    preds = []
    fallbacks = 0
    for text in texts:
        scores = lexicon.score_text(text)
        row = [(scores.get(l, 0.0), l) for l in labels]
        best = max(v for v, _ in row)
        winners = [l for v, l in row if v == best]
        if best == 0.0 or len(winners) > 1:
            fallbacks += 1
            preds.append(rng.choice(labels if best == 0.0 else winners))
        else:
            preds.append(winners[0])
    return preds, fallbacks / max(len(texts), 1)
