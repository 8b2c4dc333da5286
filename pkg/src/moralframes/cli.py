"""Command-line pipelines: train, predict, ablate, analyze, lexicon, ground.

Every artifact embeds (config hash, seed, tool version) so identical runs
reproduce identical bytes. Exit codes: 0 success, 2 config error, 3 data
error, 4 solver non-convergence (artifacts still written, flagged).
"""

import argparse
import hashlib
import json
import logging
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .analysis import (
    EntityAliasMap,
    PredictionSet,
    build_prediction_set,
    build_relation_graph,
    error_taxonomy,
    partisanship_table,
    polarity_rank,
    role_distribution,
    top_entities_per_role,
)
from .corpus import load_corpus, load_priors
from .errors import ConfigError, DataError, MoralFramesError, SolverError
from .grounding import GroundConfig, ground
from .learning import (
    Featurizer,
    ParameterStore,
    TrainAlgorithm,
    TrainConfig,
    build_kb,
    predict,
    predict_local,
    priors_from_local,
    psl_program,
    train_global_margin,
    train_local,
    train_perceptron_mle,
)
from .lexicon import (
    Lexicon,
    PmiConfig,
    build_pmi_lexicon,
    lexicon_baseline_predict,
    load_mfd,
    merge_lexicons,
)
from .metrics import macro_f1, per_class_report, weighted_f1
from .rules import parse_program, validate
from .solver import SolverConfig, SolverMode
from .taxonomy import FOUNDATIONS, MoralFoundation

logger = logging.getLogger(__name__)

MF_VALUES = [mf.value for mf in FOUNDATIONS]

# canonical program fragments, assembled per ablation variant
DECLS = """\
pred Tweet/1 closed
pred Ent/2 closed
pred Ideo/2 closed
pred Topic/2 closed
pred PriorMF/2 closed
pred PriorRole/3 closed
pred MF/2 open
pred Role/3 open
"""
RULE_SRC = {
    "r1": "scored(mf_text): Tweet(t) => MF(t, m).",
    "r2": "scored(role_text): Tweet(t) & Ent(t, e) => Role(t, e, r).",
    "r3": "scored(mf_context): Tweet(t) & Ideo(t, i) & Topic(t, k) => MF(t, m).",
    "r4": "scored(role_context): Tweet(t) & Ideo(t, i) & Topic(t, k) & Ent(t, e) => Role(t, e, r).",
    "priors": "1.0: PriorMF(t, m) => MF(t, m).\n1.0: PriorRole(t, e, r) => Role(t, e, r).",
}
CONSTRAINT_SRC = {
    "c1": "hard: Ent(t, e) & Role(t, e, r) & MF_Role(m, r) => MF(t, m).",
    "c2": "scored(distinct_roles): Ent(t, e1) & Ent(t, e2) & Role(t, e1, r) => ~Role(t, e2, r).",
    "c3": "hard: SameIdeo(t1, t2) & SameTopic(t1, t2) & Ent(t1, e) & Ent(t2, e) & Role(t1, e, r1) & Role(t2, e, r2) => SamePolarity(r1, r2).",
}


def build_program(rules=("r1", "r2", "r3", "r4"), constraints=("c1", "c2", "c3"),
                  priors: bool = False):
    scored = [r for r in rules if r != "priors"]
    if not scored and not priors and "priors" not in rules:
        raise ConfigError("at least one scored rule must be enabled")
    parts = [DECLS]
    for r in ("r1", "r2", "r3", "r4"):
        if r in rules:
            parts.append(RULE_SRC[r])
    for c in ("c1", "c2", "c3"):
        if c in constraints:
            parts.append(CONSTRAINT_SRC[c])
    if priors or "priors" in rules:
        parts.append(RULE_SRC["priors"])
    return validate(parse_program("\n".join(parts)))


@dataclass
class PipelineConfig:
    corpus: str = ""
    priors: str | None = None
    lexicon: str | None = None
    mfd: str | None = None
    alias_map: str | None = None
    program: str | None = None
    params: str = "params.json"
    output_dir: str = "out"
    seed: int = 0
    folds: int = 3
    jobs: int = 1
    rules: list = field(default_factory=lambda: ["r1", "r2", "r3", "r4"])
    constraints: list = field(default_factory=lambda: ["c1", "c2", "c3"])
    train: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    ground: dict = field(default_factory=dict)
    lexicon_cfg: dict = field(default_factory=dict)
    analyze: dict = field(default_factory=dict)
    ablate: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "PipelineConfig":
        data = {}
        if path:
            with open(path, encoding="utf-8") as fh:
                data = yaml.safe_load(fh) or {}
            if not isinstance(data, dict):
                raise ConfigError("config root must be a mapping")
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        cfg = cls(**data)
        if cfg.folds < 2:
            raise ConfigError("folds: cross-validation requires >= 2 folds")
        return cfg

    def digest(self) -> str:
        blob = json.dumps(self.__dict__, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def train_config(self) -> TrainConfig:
        d = dict(self.train)
        algo = d.pop("algorithm", "local_only")
        try:
            algorithm = TrainAlgorithm(algo)
        except ValueError:
            raise ConfigError(f"train.algorithm: unknown value {algo!r}") from None
        try:
            return TrainConfig(algorithm=algorithm, seed=self.seed, **d)
        except TypeError as exc:
            raise ConfigError(f"train: {exc}") from None

    def solver_config(self) -> SolverConfig:
        d = dict(self.solver)
        mode = d.pop("mode", "branch_and_bound")
        try:
            return SolverConfig(mode=SolverMode(mode), **d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from None

    def ground_config(self) -> GroundConfig:
        try:
            return GroundConfig(**self.ground)
        except TypeError as exc:
            raise ConfigError(f"ground: {exc}") from None

    def pmi_config(self) -> PmiConfig:
        try:
            return PmiConfig(**self.lexicon_cfg)
        except TypeError as exc:
            raise ConfigError(f"lexicon_cfg: {exc}") from None

    def load_program(self):
        if self.program:
            with open(self.program, encoding="utf-8") as fh:
                return validate(parse_program(fh.read()))
        return build_program(tuple(self.rules), tuple(self.constraints),
                             priors="priors" in self.rules)


def _write_artifact(cfg: PipelineConfig, path: Path, payload: dict):
    payload = dict(payload)
    payload["meta"] = {"config_hash": cfg.digest(), "seed": cfg.seed,
                       "version": __version__}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _write_text(cfg: PipelineConfig, path: Path, text: str):
    header = (f"# config_hash={cfg.digest()} seed={cfg.seed} "
              f"version={__version__}\n")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(header + text, encoding="utf-8")


def _stratified_folds(instances, k: int, seed: int):
    rng = random.Random(seed)
    by_mf: dict = {}
    for inst in instances:
        by_mf.setdefault(inst.gold_mf, []).append(inst)
    folds = [[] for _ in range(k)]
    for mf in sorted(by_mf, key=lambda m: m.value if m else ""):
        group = by_mf[mf]
        rng.shuffle(group)
        for i, inst in enumerate(group):
            folds[i % k].append(inst)
    return folds


def _score_predictions(instances, mf_pred, role_pred) -> dict:
    mf_gold, mf_hat = [], []
    role_gold, role_hat = [], []
    for inst in instances:
        if inst.gold_mf is not None:
            mf_gold.append(inst.gold_mf.value)
            mf_hat.append(mf_pred[inst.id].value)
        for ent_id, gold_role in inst.gold_roles.items():
            pred_role = role_pred.get((inst.id, ent_id))
            if pred_role is not None:
                role_gold.append(gold_role.value)
                role_hat.append(pred_role.value)
    from .learning import MF_LABELS, ROLE_LABELS
    return {
        "mf": {
            "macro_f1": macro_f1(mf_gold, mf_hat, MF_LABELS),
            "weighted_f1": weighted_f1(mf_gold, mf_hat, MF_LABELS),
            "per_class": per_class_report(mf_gold, mf_hat, MF_LABELS),
        },
        "role": {
            "macro_f1": macro_f1(role_gold, role_hat, ROLE_LABELS),
            "weighted_f1": weighted_f1(role_gold, role_hat, ROLE_LABELS),
            "per_class": per_class_report(role_gold, role_hat, ROLE_LABELS),
        },
    }


def _fit_and_predict(cfg: PipelineConfig, program, train_insts, test_insts,
                     lexicon=None):
    """One train/predict round; returns (mf_pred, role_pred, store, featurizer)."""
    tc = cfg.train_config()
    featurizer = Featurizer(lexicon=lexicon).fit(train_insts)
    store = train_local(program, train_insts, featurizer, tc)
    if tc.algorithm is TrainAlgorithm.LOCAL_ONLY:
        preds = predict_local(store, featurizer, test_insts)
        return preds.mf, preds.roles, store, featurizer
    if tc.algorithm is TrainAlgorithm.PERCEPTRON_MLE:
        pprog = psl_program()
        train_priors = priors_from_local(store, featurizer, train_insts, program)
        store2 = train_perceptron_mle(pprog, train_insts, train_priors, tc,
                                      cfg.solver_config(), cfg.ground_config())
        store.scalars.update(store2.scalars)
        test_priors = priors_from_local(store, featurizer, test_insts, program)
        preds = predict(pprog, None, None, test_insts, priors=test_priors,
                        solver_cfg=cfg.solver_config(),
                        ground_cfg=cfg.ground_config())
        return preds.mf, preds.roles, store, featurizer
    if tc.algorithm is TrainAlgorithm.GLOBAL_MARGIN:
        store = train_global_margin(program, train_insts, featurizer, tc,
                                    warm=store, solver_cfg=cfg.solver_config(),
                                    ground_cfg=cfg.ground_config())
        preds = predict(program, store, featurizer, test_insts,
                        solver_cfg=cfg.solver_config(),
                        ground_cfg=cfg.ground_config(), probability=False)
        return preds.mf, preds.roles, store, featurizer
    # joint inference over local probabilities
    preds = predict(program, store, featurizer, test_insts,
                    solver_cfg=cfg.solver_config(),
                    ground_cfg=cfg.ground_config())
    return preds.mf, preds.roles, store, featurizer


def _load_lexicon(cfg: PipelineConfig):
    lexicon = None
    if cfg.lexicon:
        lexicon = Lexicon.from_tsv(_strip_header(Path(cfg.lexicon).read_text()))
    if cfg.mfd:
        mfd = load_mfd(cfg.mfd)
        lexicon = merge_lexicons(lexicon, mfd) if lexicon else mfd
    return lexicon


def _strip_header(text: str) -> str:
    return "\n".join(l for l in text.splitlines() if not l.startswith("#")) + "\n"


# -- subcommands -------------------------------------------------------------


def cmd_train(cfg: PipelineConfig) -> int:
    instances, _ = load_corpus(cfg.corpus)
    labeled = [i for i in instances if i.gold_mf is not None]
    if not labeled:
        raise DataError("training requires gold labels")
    program = cfg.load_program()
    lexicon = _load_lexicon(cfg)
    folds = _stratified_folds(labeled, cfg.folds, cfg.seed)
    per_fold = []
    for k in range(cfg.folds):
        test = folds[k]
        train = [i for j, f in enumerate(folds) if j != k for i in f]
        mf_pred, role_pred, _, _ = _fit_and_predict(cfg, program, train, test,
                                                    lexicon)
        per_fold.append(_score_predictions(test, mf_pred, role_pred))

    def agg(task, metric):
        return sum(f[task][metric] for f in per_fold) / len(per_fold)

    _, _, store, featurizer = _fit_and_predict(cfg, program, labeled, labeled,
                                               lexicon)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    store.save(out / cfg.params, featurizer)
    _write_artifact(cfg, out / "metrics.json", {
        "folds": per_fold,
        "aggregate": {
            task: {m: agg(task, m) for m in ("macro_f1", "weighted_f1")}
            for task in ("mf", "role")
        },
    })
    print(f"wrote {out / cfg.params} and {out / 'metrics.json'}")
    return 0


def cmd_predict(cfg: PipelineConfig) -> int:
    instances, _ = load_corpus(cfg.corpus)
    program = cfg.load_program()
    store, featurizer = ParameterStore.load(Path(cfg.output_dir) / cfg.params)
    if featurizer is None:
        raise DataError("parameter file lacks a featurizer vocabulary; "
                        "re-run `moralframes train` first")
    priors = load_priors(cfg.priors, instances) if cfg.priors else None
    preds = predict(program, store, featurizer, instances, priors=priors,
                    solver_cfg=cfg.solver_config(), ground_cfg=cfg.ground_config())
    ps = build_prediction_set(instances, preds)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(cfg, out / "predictions.jsonl", ps.to_jsonl())
    print(f"wrote {out / 'predictions.jsonl'}")
    return 0


def cmd_ablate(cfg: PipelineConfig) -> int:
    instances, _ = load_corpus(cfg.corpus)
    labeled = [i for i in instances if i.gold_mf is not None]
    variants = cfg.ablate.get("variants")
    if variants is None:
        variants = [[], ["c1"], ["c2"], ["c3"], ["c1", "c2"], ["c1", "c3"],
                    ["c2", "c3"], ["c1", "c2", "c3"]]
    rules = tuple(cfg.ablate.get("rules", cfg.rules))
    lexicon = _load_lexicon(cfg)
    folds = _stratified_folds(labeled, cfg.folds, cfg.seed)
    rows = []
    for constraints in variants:
        program = build_program(rules, tuple(constraints))
        mf_pred_all, role_pred_all = {}, {}
        for k in range(cfg.folds):
            test = folds[k]
            train = [i for j, f in enumerate(folds) if j != k for i in f]
            mf_pred, role_pred, _, _ = _fit_and_predict(cfg, program, train,
                                                        test, lexicon)
            mf_pred_all.update(mf_pred)
            role_pred_all.update(role_pred)
        scores = _score_predictions(labeled, mf_pred_all, role_pred_all)

        class _P:
            mf = mf_pred_all
            roles = role_pred_all
        ps = build_prediction_set(labeled, _P)
        e1, e2, e3 = error_taxonomy(ps)
        rows.append({
            "constraints": "+".join(constraints) if constraints else "none",
            "role_weighted_f1": scores["role"]["weighted_f1"],
            "mf_weighted_f1": scores["mf"]["weighted_f1"],
            "E1": e1, "E2": e2, "E3": e3,
        })
    out = Path(cfg.output_dir)
    _write_artifact(cfg, out / "ablation.json", {"rows": rows})
    print(f"wrote {out / 'ablation.json'} ({len(rows)} variants)")
    return 0


def cmd_analyze(cfg: PipelineConfig) -> int:
    pred_path = Path(cfg.output_dir) / "predictions.jsonl"
    if not pred_path.exists():
        raise DataError(f"{pred_path} not found; run `moralframes predict` first")
    ps = PredictionSet.from_jsonl(_strip_header(pred_path.read_text()))
    if cfg.alias_map:
        ps = EntityAliasMap.load(cfg.alias_map).apply(ps)
    out = Path(cfg.output_dir)
    a_cfg = cfg.analyze
    min_count = a_cfg.get("min_count", 15)
    min_role_count = a_cfg.get("min_role_count", 10)

    _write_artifact(cfg, out / "partisanship.json",
                    {"topics": partisanship_table(ps)})

    tops = top_entities_per_role(ps, top_k=a_cfg.get("top_k", 5))
    _write_artifact(cfg, out / "top_entities.json", {
        "groups": [{"ideology": k[0], "role": k[1], "entities": v}
                   for k, v in sorted(tops.items())]})

    graphs = {}
    for mf in FOUNDATIONS:
        for ideology in ("left", "right"):
            graph = build_relation_graph(ps, mf, ideology, min_count=min_count)
            if graph.nodes:
                name = f"graph_{mf.value}_{ideology}"
                _write_text(cfg, out / f"{name}.dot", graph.to_dot())
                (out / f"{name}.json").write_text(graph.to_json() + "\n")
                graphs[name] = len(graph.nodes)

    entities = sorted({r.entity_id for r in ps.entity_rows()})
    rank_lines = ["entity,ideology,role,normalized_rank"]
    dist = {}
    for ent in entities:
        for ideology, series in polarity_rank(ps, ent, min_role_count).items():
            for role, rank in series:
                rank_lines.append(f"{ent},{ideology},{role},{rank:.6f}")
        dist[ent] = role_distribution(ps, ent)
    _write_text(cfg, out / "polarity_rank.csv", "\n".join(rank_lines) + "\n")
    _write_artifact(cfg, out / "role_distributions.json", {"entities": dist})

    if any(r.gold_role is not None for r in ps.entity_rows()):
        e1, e2, e3 = error_taxonomy(ps)
        _write_artifact(cfg, out / "errors.json", {"E1": e1, "E2": e2, "E3": e3})
    print(f"wrote analysis artifacts to {out} ({len(graphs)} graphs)")
    return 0


def cmd_lexicon(cfg: PipelineConfig) -> int:
    instances, _ = load_corpus(cfg.corpus)
    labeled = [(i.text, i.gold_mf.value) for i in instances
               if i.gold_mf is not None]
    if not labeled:
        raise DataError("lexicon induction requires gold MF labels")
    lexicon = build_pmi_lexicon(labeled, cfg.pmi_config())
    if cfg.mfd:
        lexicon = merge_lexicons(lexicon, load_mfd(cfg.mfd))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(cfg, out / "lexicon.tsv", lexicon.to_tsv())
    preds, fallback = lexicon_baseline_predict(
        lexicon, [i.text for i in instances], MF_VALUES, seed=cfg.seed)
    gold = [i.gold_mf.value for i in instances if i.gold_mf is not None]
    hats = [p for i, p in zip(instances, preds) if i.gold_mf is not None]
    _write_artifact(cfg, out / "lexicon_baseline.json", {
        "predictions": dict(zip((i.id for i in instances), preds)),
        "random_fallback_fraction": fallback,
        "macro_f1": macro_f1(gold, hats, MF_VALUES),
        "weighted_f1": weighted_f1(gold, hats, MF_VALUES),
    })
    print(f"wrote {out / 'lexicon.tsv'} and {out / 'lexicon_baseline.json'}")
    return 0


def cmd_ground(cfg: PipelineConfig, dump: bool) -> int:
    instances, kb = load_corpus(cfg.corpus)
    program = cfg.load_program()
    priors = load_priors(cfg.priors, instances) if cfg.priors else None
    gp = ground(program, kb, priors=priors, config=cfg.ground_config())
    if dump:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_text(cfg, out / "ground_program.lp", gp.dump_lp())
        print(f"wrote {out / 'ground_program.lp'}")
    print(f"{gp.n_atoms} open atoms, {len(gp.rules)} weighted rules, "
          f"{len(gp.constraints)} hard constraints")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="moralframes",
        description="Joint moral-foundation and moral-role prediction")
    parser.add_argument("--config", help="YAML pipeline config")
    parser.add_argument("--corpus", help="corpus JSONL path")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jobs", type=int)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "predict", "ablate", "analyze", "lexicon"):
        sub.add_parser(name)
    g = sub.add_parser("ground")
    g.add_argument("--dump", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = PipelineConfig.load(args.config, {
            "corpus": args.corpus, "output_dir": args.output_dir,
            "seed": args.seed, "jobs": args.jobs,
        })
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "predict":
            return cmd_predict(cfg)
        if args.command == "ablate":
            return cmd_ablate(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "lexicon":
            return cmd_lexicon(cfg)
        if args.command == "ground":
            return cmd_ground(cfg, args.dump)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, MoralFramesError) as exc:
        if isinstance(exc, SolverError):
            print(f"solver error: {exc}", file=sys.stderr)
            return 4
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
