"""Scorer training and end-to-end prediction.

Three regimes:
  * LocalOnly   - independent multinomial linear classifiers per template
  * PerceptronMLE - scalar rule weights updated from MAP-vs-gold potentials,
                    with local classifier outputs entering as priors
  * GlobalMargin  - large-margin updates of the template scorers driven by
                    loss-augmented MAP inference
"""

import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .corpus import KnowledgeBase, PriorScores, TweetInstance, build_kb
from .errors import DataError, MoralFramesError
from .grounding import GroundConfig, GroundProgram, ground
from .metrics import macro_f1
from .rules import (
    DISTINCT_ROLES_TAG,
    Program,
    RuleKind,
    RuleTemplate,
    default_program,
    parse_program,
    validate,
)
from .solver import (
    Assignment,
    SolverConfig,
    loss_augmented_map,
    map_exact,
    round_assignment,
    total_energy,
)
from .taxonomy import (
    FOUNDATIONS,
    ROLES,
    MoralFoundation,
    MoralRole,
    role_to_mf,
)

logger = logging.getLogger(__name__)

MF_LABELS = [mf.value for mf in FOUNDATIONS]
ROLE_LABELS = [r.value for r in ROLES]

ALL_FAMILIES = ("text", "entity", "lexicon", "ideology", "topic")


class Featurizer:
    """Sparse feature extraction over tweets and entity mentions.

    Families: tweet unigrams, entity-surface unigrams, per-MF lexicon match
    scores, one-hot ideology, one-hot topic. The vocabulary is frozen after
    fit; extraction is deterministic.
    """

    def __init__(self, families=ALL_FAMILIES, lexicon=None):
        families = tuple(families)
        unknown = set(families) - set(ALL_FAMILIES)
        if unknown:
            raise DataError(f"unknown feature families: {sorted(unknown)}")
        if not families:
            raise DataError("featurizer needs at least one feature family")
        if "lexicon" in families and lexicon is None:
            families = tuple(f for f in families if f != "lexicon")
        self.families = families
        self.lexicon = lexicon
        self.vocab: dict[str, int] = {}
        self.fitted = False

    def fit(self, instances: list[TweetInstance]) -> "Featurizer":
        keys = set()
        for inst in instances:
            keys.update(self._raw(inst, None))
            for ent in inst.entities:
                keys.update(self._raw(inst, ent.entity_id))
        self.vocab = {k: i for i, k in enumerate(sorted(keys))}
        self.fitted = True
        return self

    @property
    def dim(self) -> int:
        return len(self.vocab)

    def _raw(self, inst: TweetInstance, entity_id: str | None) -> dict[str, float]:
        feats: dict[str, float] = {}
        if "text" in self.families:
            for tok in inst.tokens:
                key = f"t:{tok}"
                feats[key] = feats.get(key, 0.0) + 1.0
        if "entity" in self.families and entity_id is not None:
            for tok in entity_id.split():
                key = f"e:{tok}"
                feats[key] = feats.get(key, 0.0) + 1.0
        if "lexicon" in self.families and self.lexicon is not None:
            for label, score in self.lexicon.score_text(inst.text).items():
                feats[f"lex:{label}"] = score
        if "ideology" in self.families:
            feats[f"i:{inst.ideology}"] = 1.0
        if "topic" in self.families:
            feats[f"k:{inst.topic}"] = 1.0
        return feats

    def features(self, inst: TweetInstance, entity_id: str | None = None,
                 families: tuple | None = None) -> dict[int, float]:
        if not self.fitted:
            raise MoralFramesError("featurizer is not fitted")
        raw = self._raw(inst, entity_id)
        out = {}
        prefixes = None
        if families is not None:
            prefixes = tuple(_FAMILY_PREFIX[f] for f in families)
        for key, val in raw.items():
            if prefixes is not None and not key.startswith(prefixes):
                continue
            idx = self.vocab.get(key)
            if idx is not None:
                out[idx] = val
        return out


_FAMILY_PREFIX = {"text": "t:", "entity": "e:", "lexicon": "lex:",
                  "ideology": "i:", "topic": "k:"}


def template_families(template: RuleTemplate) -> tuple[str, ...]:
    """Feature families a scored template sees, derived from its body."""
    preds = {lit.predicate for lit in template.body}
    fams = ["text", "lexicon"]
    if "Ent" in preds and template.head.predicate == "Role":
        fams.append("entity")
    if "Ideo" in preds:
        fams.append("ideology")
    if "Topic" in preds:
        fams.append("topic")
    return tuple(fams)


def template_labels(template: RuleTemplate) -> list[str]:
    return MF_LABELS if template.head.predicate == "MF" else ROLE_LABELS


@dataclass
class LinearModel:
    weights: np.ndarray            # (n_features, n_labels)
    bias: np.ndarray               # (n_labels,)
    labels: list[str]

    def scores(self, feats: dict[int, float]) -> np.ndarray:
        s = self.bias.copy()
        for i, v in feats.items():
            s += v * self.weights[i]
        return s

    def probs(self, feats: dict[int, float]) -> np.ndarray:
        s = self.scores(feats)
        s -= s.max()
        e = np.exp(s)
        return e / e.sum()


@dataclass
class ParameterStore:
    """All learned parameters: per-template linear scorers, scalar rule
    weights, and the per-MF distinct-roles penalties."""

    models: dict[str, LinearModel] = field(default_factory=dict)
    scalars: dict[str, float] = field(default_factory=dict)
    c2_weights: dict[str, float] = field(
        default_factory=lambda: {mf.value: 1.0 for mf in FOUNDATIONS})

    def save(self, path, featurizer: Featurizer | None = None):
        blob = {
            "version": 1,
            "scalars": self.scalars,
            "c2_weights": self.c2_weights,
            "models": {
                tag: {
                    "weights": m.weights.tolist(),
                    "bias": m.bias.tolist(),
                    "labels": m.labels,
                }
                for tag, m in self.models.items()
            },
        }
        if featurizer is not None:
            blob["vocab"] = featurizer.vocab
            blob["families"] = list(featurizer.families)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(blob, fh)

    @classmethod
    def load(cls, path) -> tuple["ParameterStore", Featurizer | None]:
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
        store = cls(
            models={
                tag: LinearModel(np.array(m["weights"]), np.array(m["bias"]),
                                 list(m["labels"]))
                for tag, m in blob["models"].items()
            },
            scalars=dict(blob["scalars"]),
            c2_weights=dict(blob["c2_weights"]),
        )
        featurizer = None
        if "vocab" in blob:
            featurizer = Featurizer(families=tuple(blob["families"]))
            featurizer.vocab = dict(blob["vocab"])
            featurizer.fitted = True
        return store, featurizer


class TrainAlgorithm(Enum):
    LOCAL_ONLY = "local_only"
    PERCEPTRON_MLE = "perceptron_mle"
    GLOBAL_MARGIN = "global_margin"


@dataclass
class TrainConfig:
    algorithm: TrainAlgorithm = TrainAlgorithm.LOCAL_ONLY
    learning_rate: float = 0.5
    epochs: int = 100
    patience: int = 10
    l2: float = 1e-4
    seed: int = 0
    val_fraction: float = 0.1
    global_learning_rate: float = 0.05
    global_epochs: int = 10

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DataError("learning rate must be positive")
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")


# -- local classifier training --------------------------------------------


def _split_train_val(rows, cfg: TrainConfig):
    """Stratified validation split on the row label."""
    rng = random.Random(cfg.seed)
    by_label: dict[str, list] = {}
    for row in rows:
        by_label.setdefault(row[1], []).append(row)
    train, val = [], []
    for label in sorted(by_label):
        group = by_label[label]
        rng.shuffle(group)
        k = int(len(group) * cfg.val_fraction)
        val.extend(group[:k])
        train.extend(group[k:])
    if not train:
        train, val = val, []
    rng.shuffle(train)
    return train, val


def _fit_softmax(rows, dim: int, labels: list[str], cfg: TrainConfig) -> LinearModel:
    """Full-batch gradient descent on L2-regularized cross-entropy, early
    stopping on validation macro-F1."""
    train, val = _split_train_val(rows, cfg)
    label_idx = {l: i for i, l in enumerate(labels)}
    seen = {row[1] for row in rows}
    for label in labels:
        if label not in seen:
            logger.warning("label %r absent from training data", label)

    n, L = len(train), len(labels)
    x_mat = np.zeros((n, dim))
    y_idx = np.zeros(n, dtype=int)
    for k, (feats, label) in enumerate(train):
        for i, v in feats.items():
            x_mat[k, i] = v
        y_idx[k] = label_idx[label]

    w = np.zeros((dim, L))
    b = np.zeros(L)
    best = (-1.0, None, None)
    stale = 0
    for epoch in range(cfg.epochs):
        scores = x_mat @ w + b
        scores -= scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        p = e / e.sum(axis=1, keepdims=True)
        p[np.arange(n), y_idx] -= 1.0
        p /= max(n, 1)
        w -= cfg.learning_rate * (x_mat.T @ p + cfg.l2 * w)
        b -= cfg.learning_rate * p.sum(axis=0)

        if val:
            model = LinearModel(w.copy(), b.copy(), labels)
            preds = [model.labels[int(np.argmax(model.scores(f)))] for f, _ in val]
            score = macro_f1([lab for _, lab in val], preds, labels)
            if score > best[0]:
                best = (score, w.copy(), b.copy())
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    if val and best[1] is not None:
        w, b = best[1], best[2]
    return LinearModel(w, b, labels)


def train_local(program: Program, instances: list[TweetInstance],
                featurizer: Featurizer, cfg: TrainConfig) -> ParameterStore:
    """Fit one multinomial linear classifier per scored template."""
    labeled = [i for i in instances if i.gold_mf is not None]
    if not labeled:
        raise DataError("no labeled instances to train on")
    if featurizer.dim == 0:
        raise DataError("featurizer produced zero-dimensional features")
    store = ParameterStore()
    for template in program.templates:
        if template.kind is not RuleKind.SCORED:
            continue
        if template.tag == DISTINCT_ROLES_TAG:
            continue
        fams = template_families(template)
        labels = template_labels(template)
        rows = []
        if template.head.predicate == "MF":
            for inst in labeled:
                rows.append((featurizer.features(inst, None, fams),
                             inst.gold_mf.value))
        else:
            for inst in labeled:
                for ent in inst.entities:
                    if ent.gold_role is not None:
                        rows.append((featurizer.features(inst, ent.entity_id, fams),
                                     ent.gold_role.value))
        if not rows:
            raise DataError(f"no training rows for template {template.tag!r}")
        store.models[template.tag] = _fit_softmax(rows, featurizer.dim, labels, cfg)
    for template in program.templates:
        if template.kind is RuleKind.SCALAR:
            store.scalars[template.tag] = template.weight
    return store


# -- template scoring -------------------------------------------------------


class TemplateScorer:
    """Resolves scored-rule weights during grounding.

    ``probability`` mode emits softmax probabilities (nonnegative, suitable
    for hinge-loss relaxation); raw mode emits unnormalized linear scores
    (used by large-margin training).
    """

    def __init__(self, store: ParameterStore, featurizer: Featurizer,
                 instances: list[TweetInstance], program: Program,
                 probability: bool = True):
        self.store = store
        self.featurizer = featurizer
        self.instances = {inst.id: inst for inst in instances}
        self.probability = probability
        self.families = {t.tag: template_families(t) for t in program.templates
                         if t.kind is RuleKind.SCORED}
        self._cache: dict[tuple, np.ndarray] = {}

    def score_vector(self, tag: str, tweet_id: str, entity_id: str | None) -> np.ndarray:
        key = (tag, tweet_id, entity_id)
        if key not in self._cache:
            model = self.store.models.get(tag)
            if model is None:
                raise MoralFramesError(f"no parameters for template {tag!r}")
            inst = self.instances[tweet_id]
            feats = self.featurizer.features(inst, entity_id, self.families[tag])
            self._cache[key] = model.probs(feats) if self.probability else model.scores(feats)
        return self._cache[key]

    def weight_for(self, template: RuleTemplate, binding: dict,
                   head_key: tuple | None) -> float:
        if template.tag == DISTINCT_ROLES_TAG:
            role = MoralRole(head_key[3])
            return self.store.c2_weights[role_to_mf(role).value]
        if head_key is None:
            return 0.0
        if head_key[0] == "MF":
            _, tweet_id, label = head_key
            entity_id = None
            labels = MF_LABELS
        else:
            _, tweet_id, entity_id, label = head_key
            labels = ROLE_LABELS
        vec = self.score_vector(template.tag, tweet_id, entity_id)
        return float(vec[labels.index(label)])


class PriorWeights:
    """Weight model for prior-only programs: scalar templates only."""

    def weight_for(self, template, binding, head_key):
        if template.tag == DISTINCT_ROLES_TAG:
            return 1.0
        return 1.0


def priors_from_local(store: ParameterStore, featurizer: Featurizer,
                      instances: list[TweetInstance], program: Program,
                      mf_tag: str = "mf_context",
                      role_tag: str = "role_context") -> PriorScores:
    """Convert local classifier probabilities into a prior table."""
    scorer = TemplateScorer(store, featurizer, instances, program)
    mf_tag = mf_tag if mf_tag in store.models else "mf_text"
    role_tag = role_tag if role_tag in store.models else "role_text"
    priors = PriorScores()
    for inst in instances:
        vec = scorer.score_vector(mf_tag, inst.id, None)
        for mf, p in zip(FOUNDATIONS, vec):
            priors.set_mf(inst.id, mf, float(p))
        for ent in inst.entities:
            rvec = scorer.score_vector(role_tag, inst.id, ent.entity_id)
            for role, p in zip(ROLES, rvec):
                priors.set_role(inst.id, ent.entity_id, role, float(p))
    return priors


# -- assignments and decoding -----------------------------------------------


def gold_assignment(gp: GroundProgram, instances: list[TweetInstance]) -> Assignment:
    by_id = {inst.id: inst for inst in instances}
    values = np.zeros(gp.n_atoms)
    for key, aid in gp.atom_id.items():
        if key[0] == "MF":
            inst = by_id[key[1]]
            if inst.gold_mf is None:
                raise DataError(f"tweet {key[1]} has no gold MF")
            values[aid] = 1.0 if inst.gold_mf.value == key[2] else 0.0
        elif key[0] == "Role":
            inst = by_id[key[1]]
            gold = inst.gold_roles.get(key[2])
            if gold is None:
                raise DataError(f"no gold role for entity {key[2]} in tweet {key[1]}")
            values[aid] = 1.0 if gold.value == key[3] else 0.0
    return Assignment(values, 0.0)


def decode(gp: GroundProgram, assignment: Assignment):
    """Exactly-one groups back to labels: (tweet -> MF, (tweet, entity) -> role)."""
    mf_out: dict[str, MoralFoundation] = {}
    role_out: dict[tuple[str, str], MoralRole] = {}
    for gkey, ids in gp.groups.items():
        chosen = max(ids, key=lambda i: (assignment.values[i], -i))
        key = gp.atoms[chosen]
        if gkey[0] == "MF":
            mf_out[gkey[1]] = MoralFoundation(key[2])
        else:
            role_out[(gkey[1], gkey[2])] = MoralRole(key[3])
    return mf_out, role_out


# -- structured perceptron (scalar weights) ----------------------------------


PSL_PROGRAM = """\
pred Tweet/1 closed
pred Ent/2 closed
pred Ideo/2 closed
pred Topic/2 closed
pred PriorMF/2 closed
pred PriorRole/3 closed
pred MF/2 open
pred Role/3 open

1.0: PriorMF(t, m) => MF(t, m).
1.0: PriorRole(t, e, r) => Role(t, e, r).
1.0: Ent(t, e1) & Ent(t, e2) & Role(t, e1, r) => ~Role(t, e2, r).
hard: Ent(t, e) & Role(t, e, r) & MF_Role(m, r) => MF(t, m).
hard: SameIdeo(t1, t2) & SameTopic(t1, t2) & Ent(t1, e) & Ent(t2, e) & Role(t1, e, r1) & Role(t2, e, r2) => SamePolarity(r1, r2).
"""


def psl_program() -> Program:
    return validate(parse_program(PSL_PROGRAM))


def _potentials_by_tag(gp: GroundProgram, y) -> dict[str, float]:
    sums: dict[str, float] = {}
    for rule in gp.rules:
        sums[rule.tag] = sums.get(rule.tag, 0.0) + rule.hinge(y)
    return sums


def train_perceptron_mle(program: Program, instances: list[TweetInstance],
                         priors: PriorScores, cfg: TrainConfig,
                         solver_cfg: SolverConfig | None = None,
                         ground_cfg: GroundConfig | None = None) -> ParameterStore:
    """Structured-perceptron updates of scalar rule weights.

    Per example: w_r <- max(0, w_r - lr * (psi_r(MAP) - psi_r(gold))),
    summed over that template's groundings.
    """
    labeled = [i for i in instances if i.gold_mf is not None]
    if not labeled:
        raise DataError("no labeled instances to train on")
    store = ParameterStore()
    scalar_tags = [t.tag for t in program.templates if t.kind is RuleKind.SCALAR]
    for tag in scalar_tags:
        store.scalars[tag] = program.template_by_tag(tag).weight
    rng = random.Random(cfg.seed)
    skipped = 0
    for epoch in range(cfg.epochs):
        order = list(labeled)
        rng.shuffle(order)
        total_update = 0.0
        for inst in order:
            for tag in scalar_tags:
                program.template_by_tag(tag).weight = store.scalars[tag]
            kb = build_kb([inst])
            gp = ground(program, kb, priors=priors, config=ground_cfg)
            gold = gold_assignment(gp, [inst])
            if gp.violations(gold.values):
                skipped += 1
                logger.warning("gold infeasible for %s; skipped", inst.id)
                continue
            pred = map_exact(gp, solver_cfg)
            psi_map = _potentials_by_tag(gp, pred.values)
            psi_gold = _potentials_by_tag(gp, gold.values)
            for tag in scalar_tags:
                grad = psi_map.get(tag, 0.0) - psi_gold.get(tag, 0.0)
                new = max(0.0, store.scalars[tag] - cfg.learning_rate * grad)
                total_update += abs(new - store.scalars[tag])
                store.scalars[tag] = new
        if total_update == 0.0:
            break
    store.skipped_examples = skipped  # type: ignore[attr-defined]
    for tag in scalar_tags:
        program.template_by_tag(tag).weight = store.scalars[tag]
    return store


# -- global large-margin training ---------------------------------------------


def train_global_margin(program: Program, instances: list[TweetInstance],
                        featurizer: Featurizer, cfg: TrainConfig,
                        warm: ParameterStore | None = None,
                        solver_cfg: SolverConfig | None = None,
                        ground_cfg: GroundConfig | None = None) -> ParameterStore:
    """Structured hinge-loss training of the template scorers.

    Warm-starts from locally trained parameters, runs loss-augmented MAP
    per example, and takes a subgradient step whenever the hinge is
    positive: gold head labels move up, predicted ones move down.
    """
    labeled = [i for i in instances if i.gold_mf is not None]
    if not labeled:
        raise DataError("no labeled instances to train on")
    store = warm if warm is not None else train_local(program, instances, featurizer, cfg)
    scored_tags = {t.tag: t for t in program.templates
                   if t.kind is RuleKind.SCORED and t.tag != DISTINCT_ROLES_TAG}
    rng = random.Random(cfg.seed)
    lr = cfg.global_learning_rate
    best_state = None
    best_acc = -1.0
    stale = 0
    for epoch in range(cfg.global_epochs):
        order = list(labeled)
        rng.shuffle(order)
        hinge_total = 0.0
        for inst in order:
            scorer = TemplateScorer(store, featurizer, [inst], program,
                                    probability=False)
            kb = build_kb([inst])
            gp = ground(program, kb, weights=scorer, config=ground_cfg)
            gold = gold_assignment(gp, [inst])
            if gp.violations(gold.values):
                logger.warning("gold infeasible for %s; skipped", inst.id)
                continue
            pred = loss_augmented_map(gp, gold, solver_cfg)
            hinge = total_energy(gp, gold.values) - pred.objective
            if hinge <= 1e-9:
                continue
            hinge_total += hinge
            _margin_step(store, featurizer, scorer, program, scored_tags, gp,
                         gold.values, pred.values, inst, lr)
        acc = _structured_accuracy(program, store, featurizer, labeled,
                                   solver_cfg, ground_cfg)
        if acc > best_acc:
            best_acc = acc
            best_state = _clone_store(store)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
        if hinge_total == 0.0:
            break
    return best_state if best_state is not None else store


def _clone_store(store: ParameterStore) -> ParameterStore:
    return ParameterStore(
        models={tag: LinearModel(m.weights.copy(), m.bias.copy(), list(m.labels))
                for tag, m in store.models.items()},
        scalars=dict(store.scalars),
        c2_weights=dict(store.c2_weights),
    )


def _margin_step(store, featurizer, scorer, program, scored_tags, gp,
                 gold_values, pred_values, inst, lr):
    for key, aid in gp.atom_id.items():
        diff = gold_values[aid] - round(pred_values[aid])
        if diff == 0:
            continue
        if key[0] == "MF":
            tweet_id, label = key[1], key[2]
            entity_id = None
            labels = MF_LABELS
        else:
            tweet_id, entity_id, label = key[1], key[2], key[3]
            labels = ROLE_LABELS
        li = labels.index(label)
        for tag, template in scored_tags.items():
            model = store.models.get(tag)
            if model is None or template.head.predicate != key[0]:
                continue
            feats = featurizer.features(inst, entity_id, template_families(template))
            for i, v in feats.items():
                model.weights[i, li] += lr * diff * v
            model.bias[li] += lr * diff
    # distinct-roles penalty: per-MF scalar moves by the potential gap
    psi_pred = _c2_by_mf(gp, pred_values)
    psi_gold = _c2_by_mf(gp, gold_values)
    for mf in MF_LABELS:
        grad = psi_pred.get(mf, 0.0) - psi_gold.get(mf, 0.0)
        store.c2_weights[mf] = max(0.0, store.c2_weights[mf] + lr * grad)


def _c2_by_mf(gp: GroundProgram, y) -> dict[str, float]:
    sums: dict[str, float] = {}
    for rule in gp.rules:
        if rule.tag != DISTINCT_ROLES_TAG:
            continue
        # the head atom is the one with the +1 coefficient on a role label
        role = None
        for aid in rule.coeffs:
            key = gp.atoms[aid]
            if key[0] == "Role":
                role = MoralRole(key[3])
                break
        if role is None:
            continue
        mf = role_to_mf(role).value
        sums[mf] = sums.get(mf, 0.0) + rule.hinge(y)
    return sums


def _structured_accuracy(program, store, featurizer, instances,
                         solver_cfg, ground_cfg) -> float:
    preds = predict(program, store, featurizer, instances,
                    solver_cfg=solver_cfg, ground_cfg=ground_cfg,
                    probability=False)
    correct = total = 0
    for inst in instances:
        total += 1
        if preds.mf[inst.id] == inst.gold_mf:
            correct += 1
        for ent_id, gold_role in inst.gold_roles.items():
            total += 1
            if preds.roles.get((inst.id, ent_id)) == gold_role:
                correct += 1
    return correct / max(total, 1)


# -- prediction ----------------------------------------------------------------


@dataclass
class Predictions:
    mf: dict[str, MoralFoundation]
    roles: dict[tuple[str, str], MoralRole]
    stats: dict = field(default_factory=dict)


def predict_local(store: ParameterStore, featurizer: Featurizer,
                  instances: list[TweetInstance],
                  mf_tag: str = "mf_context",
                  role_tag: str = "role_context") -> Predictions:
    """Independent per-decision argmax of the local classifiers."""
    mf_tag = mf_tag if mf_tag in store.models else "mf_text"
    role_tag = role_tag if role_tag in store.models else "role_text"
    mf_out, role_out = {}, {}
    for inst in instances:
        model = store.models[mf_tag]
        feats = featurizer.features(inst, None, template_families_by_tag(mf_tag))
        mf_out[inst.id] = MoralFoundation(model.labels[int(np.argmax(model.scores(feats)))])
        rmodel = store.models[role_tag]
        for ent in inst.entities:
            feats = featurizer.features(inst, ent.entity_id,
                                        template_families_by_tag(role_tag))
            role_out[(inst.id, ent.entity_id)] = MoralRole(
                rmodel.labels[int(np.argmax(rmodel.scores(feats)))])
    return Predictions(mf_out, role_out)


_DEFAULT_FAMILIES = {
    "mf_text": ("text", "lexicon"),
    "role_text": ("text", "lexicon", "entity"),
    "mf_context": ("text", "lexicon", "ideology", "topic"),
    "role_context": ("text", "lexicon", "entity", "ideology", "topic"),
}


def template_families_by_tag(tag: str) -> tuple[str, ...]:
    return _DEFAULT_FAMILIES[tag]


def predict(program: Program, store: ParameterStore | None,
            featurizer: Featurizer | None, instances: list[TweetInstance],
            priors: PriorScores | None = None,
            solver_cfg: SolverConfig | None = None,
            ground_cfg: GroundConfig | None = None,
            observed_mf: dict[str, MoralFoundation] | None = None,
            probability: bool = True) -> Predictions:
    """Joint prediction: ground, solve MAP exactly, decode labels."""
    kb = build_kb(instances)
    has_scored = any(t.kind is RuleKind.SCORED and t.tag != DISTINCT_ROLES_TAG
                     for t in program.templates)
    if has_scored and store is not None and featurizer is not None and store.models:
        weights = TemplateScorer(store, featurizer, instances, program,
                                 probability=probability)
    else:
        weights = PriorWeights()
    gp = ground(program, kb, priors=priors, weights=weights,
                config=ground_cfg, observed_mf=observed_mf)
    assignment = map_exact(gp, solver_cfg)
    mf_out, role_out = decode(gp, assignment)
    if observed_mf:
        mf_out.update(observed_mf)
    return Predictions(mf_out, role_out, stats=dict(assignment.stats))
