"""Instantiates rule templates against a knowledge base.

A ground program is an energy-minimization problem over binary/continuous
open atoms y in [0,1]^n:

    minimize  sum_r  w_r * max(l_r(y), 0)^rho
    subject to hard linear constraints

where each horn clause body => head grounds to the linear expression
l_r = sum(body) - (|body| - 1) - head (head coefficient flips for negated
heads), with observed atoms substituted by their stored values.
"""

from dataclasses import dataclass, field

from .corpus import KnowledgeBase, PriorScores
from .errors import GroundingError
from .rules import (
    LABEL_SORTS,
    Program,
    RuleKind,
    RuleTemplate,
)
from .taxonomy import (
    MoralFoundation,
    MoralRole,
    Polarity,
    role_polarity,
    role_to_mf,
    roles_of_foundation,
)


@dataclass
class GroundRule:
    tag: str                       # originating template
    coeffs: dict[int, float]      # open-atom id -> coefficient in l_r
    const: float
    weight: float
    rho: int = 1

    def hinge(self, y) -> float:
        l = self.const + sum(c * y[i] for i, c in self.coeffs.items())
        h = max(l, 0.0)
        return h * h if self.rho == 2 else h


@dataclass
class LinearConstraint:
    coeffs: dict[int, float]      # sum coeffs*y + const  (<= | ==)  0
    const: float
    equality: bool = False
    origin: str = ""

    def violation(self, y) -> float:
        v = self.const + sum(c * y[i] for i, c in self.coeffs.items())
        return abs(v) if self.equality else max(v, 0.0)


class GroundProgram:
    """Open-atom index plus weighted ground rules and hard constraints."""

    def __init__(self):
        self.atoms: list[tuple] = []
        self.atom_id: dict[tuple, int] = {}
        self.rules: list[GroundRule] = []
        self.constraints: list[LinearConstraint] = []
        # exactly-one groups: group key -> atom ids, in label order
        self.groups: dict[tuple, list[int]] = {}
        # linear objective terms (hinges that are active everywhere on the
        # unit box fold into these; loss augmentation adds to them too)
        self.linear_terms: dict[int, float] = {}
        self.linear_const: float = 0.0

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def intern(self, key: tuple) -> int:
        if key not in self.atom_id:
            self.atom_id[key] = len(self.atoms)
            self.atoms.append(key)
        return self.atom_id[key]

    def add_linear(self, coeffs: dict[int, float], const: float, weight: float):
        for i, c in coeffs.items():
            self.linear_terms[i] = self.linear_terms.get(i, 0.0) + weight * c
        self.linear_const += weight * const

    def energy(self, y) -> float:
        total = sum(r.weight * r.hinge(y) for r in self.rules)
        total += sum(c * y[i] for i, c in self.linear_terms.items())
        return total + self.linear_const

    def violations(self, y, tol: float = 1e-6) -> list[LinearConstraint]:
        return [c for c in self.constraints if c.violation(y) > tol]

    # -- component partition -------------------------------------------

    def components(self) -> list["GroundProgram"]:
        """Split into sub-programs disconnected in the rule-sharing graph."""
        parent = list(range(self.n_atoms))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        def union(i, j):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

        for obj in list(self.rules) + list(self.constraints):
            ids = list(obj.coeffs.keys())
            for a, b in zip(ids, ids[1:]):
                union(a, b)
        for ids in self.groups.values():
            for a, b in zip(ids, ids[1:]):
                union(a, b)

        roots: dict[int, GroundProgram] = {}
        for i in range(self.n_atoms):
            root = find(i)
            sub = roots.get(root)
            if sub is None:
                sub = roots[root] = GroundProgram()
                sub.parent_ids = []  # type: ignore[attr-defined]
            sub.atom_id[self.atoms[i]] = len(sub.atoms)
            sub.atoms.append(self.atoms[i])
            sub.parent_ids.append(i)  # type: ignore[attr-defined]

        def remap(sub, coeffs):
            return {sub.atom_id[self.atoms[i]]: c for i, c in coeffs.items()}

        for rule in self.rules:
            if not rule.coeffs:
                continue
            sub = roots[find(next(iter(rule.coeffs)))]
            sub.rules.append(GroundRule(rule.tag, remap(sub, rule.coeffs),
                                        rule.const, rule.weight, rule.rho))
        for con in self.constraints:
            sub = roots[find(next(iter(con.coeffs)))]
            sub.constraints.append(LinearConstraint(
                remap(sub, con.coeffs), con.const, con.equality, con.origin))
        for key, ids in self.groups.items():
            sub = roots[find(ids[0])]
            sub.groups[key] = [sub.atom_id[self.atoms[i]] for i in ids]
        for i, c in self.linear_terms.items():
            sub = roots[find(i)]
            sub.linear_terms[sub.atom_id[self.atoms[i]]] = c
        out = [roots[r] for r in sorted(roots)]
        if out:
            # keep the energy partition exact: the constant goes somewhere
            out[0].linear_const = self.linear_const
        return out

    # -- debug dump ------------------------------------------------------

    def dump_lp(self) -> str:
        """Textual LP-style dump for external cross-checks."""
        lines = ["\\ ground program dump", "Minimize"]
        terms = []
        for k, rule in enumerate(self.rules):
            expr = " + ".join(f"{c:g} y{i}" for i, c in sorted(rule.coeffs.items()))
            terms.append(f"  {rule.weight:g} * max({rule.const:g} + {expr}, 0)^{rule.rho}"
                         f"  \\ {rule.tag} r{k}")
        lines += terms or ["  0"]
        lines.append("Subject To")
        for k, con in enumerate(self.constraints):
            expr = " + ".join(f"{c:g} y{i}" for i, c in sorted(con.coeffs.items()))
            sense = "=" if con.equality else "<="
            lines.append(f"  c{k}: {expr} {sense} {-con.const:g}  \\ {con.origin}")
        lines.append("Bounds")
        for i, key in enumerate(self.atoms):
            lines.append(f"  0 <= y{i} <= 1  \\ {_atom_str(key)}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def _atom_str(key: tuple) -> str:
    pred, args = key[0], key[1:]
    return f"{pred}({', '.join(str(a) for a in args)})"


@dataclass
class GroundConfig:
    max_ground_rules: int = 10_000_000
    rho: int = 1                   # hinge exponent, 1 or 2
    soften_c3: bool = False        # compile polarity agreement as weighted
    c3_weight: float = 1.0
    rho_by_tag: dict = field(default_factory=dict)

    def rho_for(self, tag: str) -> int:
        return self.rho_by_tag.get(tag, self.rho)


class UniformWeights:
    """Weight model giving every scored grounding weight 1.0."""

    def weight_for(self, template: RuleTemplate, binding: dict, head_key: tuple) -> float:
        return 1.0


def ground(
    program: Program,
    kb: KnowledgeBase,
    priors: PriorScores | None = None,
    weights=None,
    config: GroundConfig | None = None,
    observed_mf: dict[str, MoralFoundation] | None = None,
) -> GroundProgram:
    """Ground every template of a validated program against the KB.

    ``weights`` resolves scored-rule weights (see UniformWeights protocol);
    scalar templates use their stored weight. ``observed_mf`` fixes gold MF
    labels, pruning each entity's role candidates to that foundation's
    roles (skyline mode).

    Distinct variables of the same sort always bind distinct constants,
    which gives c2-style templates their e1 != e2 semantics.
    """
    if not program.validated:
        raise GroundingError("program must be validated before grounding")
    config = config or GroundConfig()
    weights = weights or UniformWeights()
    kb = _with_prior_atoms(kb, priors)
    gp = GroundProgram()
    schema = {d.name: d for d in program.declarations}

    for template in program.templates:
        if template.head.predicate == "SamePolarity":
            _ground_polarity_agreement(gp, template, kb, config, observed_mf)
            continue
        _ground_template(gp, template, kb, schema, weights, config, observed_mf)
        if len(gp.rules) + len(gp.constraints) > config.max_ground_rules:
            raise GroundingError(
                f"ground-rule cap {config.max_ground_rules} exceeded while "
                f"grounding template {template.tag!r}")

    add_label_exclusivity(gp)
    return gp


def _with_prior_atoms(kb: KnowledgeBase, priors: PriorScores | None) -> KnowledgeBase:
    merged = KnowledgeBase()
    for pred in ("Tweet", "Ent", "Ideo", "Topic"):
        for args in kb.atoms(pred):
            merged.add(pred, args, kb.value(pred, args))
    if priors is not None:
        tweets = {args[0] for args in kb.atoms("Tweet")}
        ents = {args for args in kb.atoms("Ent")}
        for (tid, mf), score in priors.mf.items():
            if tid in tweets:
                merged.add("PriorMF", (tid, mf.value), score)
        for (tid, ent, role), score in priors.role.items():
            if (tid, ent) in ents:
                merged.add("PriorRole", (tid, ent, role.value), score)
    return merged.freeze()


def _label_values(sort: str, binding_tweet: str | None,
                  observed_mf: dict | None, entity_scoped: bool) -> list[str]:
    if sort == "RoleLabel" and entity_scoped and observed_mf and binding_tweet in observed_mf:
        return [r.value for r in roles_of_foundation(observed_mf[binding_tweet])]
    return list(LABEL_SORTS[sort])


def _role_values_for(tweet_id: str, observed_mf: dict | None) -> list[str]:
    if observed_mf and tweet_id in observed_mf:
        return [r.value for r in roles_of_foundation(observed_mf[tweet_id])]
    return [r.value for r in MoralRole]


def _ground_template(gp, template, kb, schema, weights, config, observed_mf):
    rho = config.rho_for(template.tag)
    for binding, body_sum, open_body in _join_body(
            template.body, kb, schema, observed_mf):
        for head_binding, head in _head_groundings(
                template, binding, schema, observed_mf):
            n_body = len(template.body)
            coeffs: dict[int, float] = {}
            const = body_sum - (n_body - 1)
            for key in open_body:
                aid = gp.intern(key)
                coeffs[aid] = coeffs.get(aid, 0.0) + 1.0
            head_key, head_value = head
            if head_key is None:          # observed head
                if template.head.negated:
                    const += head_value - 1.0
                else:
                    const -= head_value
            else:
                # MF atoms for tweets with observed gold MF are fixed.
                fixed = _fixed_mf_value(head_key, observed_mf)
                if fixed is not None:
                    if template.head.negated:
                        const += fixed - 1.0
                    else:
                        const -= fixed
                else:
                    aid = gp.intern(head_key)
                    sign = 1.0 if template.head.negated else -1.0
                    coeffs[aid] = coeffs.get(aid, 0.0) + sign
                    if template.head.negated:
                        const -= 1.0

            if template.kind is RuleKind.HARD:
                if coeffs:
                    gp.constraints.append(LinearConstraint(
                        coeffs, const, equality=False, origin=template.tag))
                elif const > 1e-9:
                    raise GroundingError(
                        f"hard template {template.tag!r} grounds to an "
                        f"unconditionally violated constraint")
                continue
            if template.kind is RuleKind.SCALAR:
                w = template.weight
            else:
                w = weights.weight_for(template, head_binding, head_key)
            if w != w or w in (float("inf"), float("-inf")):
                raise GroundingError(
                    f"non-finite weight for template {template.tag!r}")
            if not coeffs:
                continue
            # A linear hinge that is nonnegative everywhere on the unit box
            # is just a linear function; folding scored ones keeps the
            # objective well-behaved even for negative (raw-score) weights.
            # Scalar rules stay as hinges so weight learning can read their
            # per-template potentials back off the ground program.
            floor = const + sum(c for c in coeffs.values() if c < 0)
            if template.kind is RuleKind.SCORED and rho == 1 and floor >= -1e-12:
                gp.add_linear(coeffs, const, w)
            else:
                gp.rules.append(GroundRule(template.tag, coeffs, const, w, rho))


def _fixed_mf_value(head_key, observed_mf):
    if observed_mf and head_key[0] == "MF" and head_key[1] in observed_mf:
        return 1.0 if observed_mf[head_key[1]].value == head_key[2] else 0.0
    return None


def _join_body(body, kb, schema, observed_mf):
    """Yield (binding, observed_value_sum, open_atom_keys) for each
    satisfied grounding of the body literals."""

    def extend(i, binding, sorts_used, value_sum, open_atoms):
        if i == len(body):
            yield dict(binding), value_sum, list(open_atoms)
            return
        lit = body[i]
        for new_binding, val, open_key in _match_literal(
                lit, kb, schema, binding, sorts_used, observed_mf):
            merged = {**binding, **new_binding}
            used = _merge_sorts(sorts_used, new_binding, lit, schema)
            if used is None:
                continue
            if open_key is not None:
                open_atoms.append(open_key)
            yield from extend(i + 1, merged, used, value_sum + val, open_atoms)
            if open_key is not None:
                open_atoms.pop()

    yield from extend(0, {}, {}, 0.0, [])


def _merge_sorts(sorts_used, new_binding, lit, schema):
    # Enforce: distinct variables of one sort bind distinct constants.
    ps = schema.get(lit.predicate) or _builtin_schema(lit.predicate)
    var_sort = {t.name: s for t, s in zip(lit.terms, ps.sorts) if t.is_variable}
    used = dict(sorts_used)
    for var, const in new_binding.items():
        sort = var_sort.get(var)
        if sort is None:
            continue
        taken = used.setdefault(sort, {})
        if taken.get(const, var) != var:
            return None
        taken = dict(taken)
        taken[const] = var
        used[sort] = taken
    return used


def _builtin_schema(name):
    from .rules import BUILTIN_PREDICATES, PredicateSchema
    return PredicateSchema(name, BUILTIN_PREDICATES[name], True, builtin=True)


def _match_literal(lit, kb, schema, binding, sorts_used, observed_mf):
    """Yield (new_bindings, observed_value, open_atom_key_or_None)."""
    if lit.predicate in ("SameIdeo", "SameTopic"):
        yield from _match_equality_join(lit, kb, binding)
        return
    if lit.predicate == "MF_Role":
        yield from _match_mf_role(lit, binding)
        return

    ps = schema.get(lit.predicate)
    if ps is None:
        raise GroundingError(f"predicate {lit.predicate!r} missing from schema")

    pattern = []
    for term in lit.terms:
        if term.is_variable:
            pattern.append(binding.get(term.name))
        else:
            pattern.append(term.name)

    if ps.closed:
        for args in kb.match(lit.predicate, tuple(pattern)):
            new = {t.name: a for t, a in zip(lit.terms, args)
                   if t.is_variable and t.name not in binding}
            yield new, kb.value(lit.predicate, args), None
        return

    # Open body atom: unbound variables must range over label sorts.
    slots = []
    for term, sort, pat in zip(lit.terms, ps.sorts, pattern):
        if pat is not None:
            slots.append([pat])
        elif sort in LABEL_SORTS:
            tweet = binding.get(lit.terms[0].name) if lit.terms else None
            if lit.predicate == "Role" and sort == "RoleLabel":
                slots.append(_role_values_for(tweet, observed_mf))
            else:
                slots.append(list(LABEL_SORTS[sort]))
        else:
            raise GroundingError(
                f"cannot enumerate variable {term.name!r} of sort {sort!r} "
                f"in open body atom {lit.predicate!r}")
    for args in _product(slots):
        new = {t.name: a for t, a in zip(lit.terms, args)
               if t.is_variable and t.name not in binding}
        fixed = _fixed_mf_value((lit.predicate, *args), observed_mf)
        if fixed is not None:
            yield new, fixed, None
        else:
            yield new, 0.0, (lit.predicate, *args)


def _product(slots):
    if not slots:
        yield ()
        return
    for head in slots[0]:
        for rest in _product(slots[1:]):
            yield (head, *rest)


def _match_equality_join(lit, kb, binding):
    pred = "Ideo" if lit.predicate == "SameIdeo" else "Topic"
    v1, v2 = lit.terms
    t1 = binding.get(v1.name) if v1.is_variable else v1.name
    t2 = binding.get(v2.name) if v2.is_variable else v2.name
    if t1 is not None and t2 is not None:
        a1 = kb.match(pred, (t1, None))
        a2 = kb.match(pred, (t2, None))
        if a1 and a2 and a1[0][1] == a2[0][1]:
            yield {}, 1.0, None
        return
    if t1 is not None:
        group = kb.match(pred, (t1, None))
        if not group:
            return
        val = group[0][1]
        for args in kb.match(pred, (None, val)):
            new = {}
            if v2.is_variable and v2.name not in binding:
                new[v2.name] = args[0]
            yield new, 1.0, None
        return
    # both unbound: enumerate all pairs sharing the attribute value
    for args1 in kb.atoms(pred):
        for args2 in kb.match(pred, (None, args1[1])):
            new = {}
            if v1.is_variable:
                new[v1.name] = args1[0]
            if v2.is_variable:
                new[v2.name] = args2[0]
            yield new, 1.0, None


def _match_mf_role(lit, binding):
    vm, vr = lit.terms
    m = binding.get(vm.name) if vm.is_variable else vm.name
    r = binding.get(vr.name) if vr.is_variable else vr.name
    if r is not None:
        owner = role_to_mf(MoralRole(r)).value
        if m is None:
            new = {vm.name: owner} if vm.is_variable else {}
            yield new, 1.0, None
        elif m == owner:
            yield {}, 1.0, None
        return
    for role in MoralRole:
        new = {}
        if vr.is_variable:
            new[vr.name] = role.value
        owner = role_to_mf(role).value
        if m is None:
            if vm.is_variable:
                new[vm.name] = owner
            yield new, 1.0, None
        elif m == owner:
            yield new, 1.0, None


def _head_groundings(template, binding, schema, observed_mf):
    """Enumerate head-label assignments; yields (full_binding, (key, value))."""
    head = template.head
    ps = schema.get(head.predicate)
    slots = []
    names = []
    for term, sort in zip(head.terms, ps.sorts):
        if not term.is_variable:
            slots.append([term.name])
            names.append(None)
        elif term.name in binding:
            slots.append([binding[term.name]])
            names.append(None)
        else:
            tweet = binding.get(head.terms[0].name)
            if head.predicate == "Role" and sort == "RoleLabel":
                slots.append(_role_values_for(tweet, observed_mf))
            else:
                slots.append(list(LABEL_SORTS[sort]))
            names.append(term.name)
    for args in _product(slots):
        full = dict(binding)
        for name, a in zip(names, args):
            if name is not None:
                full[name] = a
        if ps.closed:
            value = 0.0  # absent closed head counts as false
            yield full, (None, value)
        else:
            yield full, ((head.predicate, *args), None)


def add_label_exclusivity(gp: GroundProgram) -> GroundProgram:
    """Add one-MF-per-tweet and one-role-per-entity equality constraints."""
    mf_groups: dict[tuple, list[tuple[str, int]]] = {}
    role_groups: dict[tuple, list[tuple[str, int]]] = {}
    for key, aid in gp.atom_id.items():
        if key[0] == "MF":
            mf_groups.setdefault(("MF", key[1]), []).append((key[2], aid))
        elif key[0] == "Role":
            role_groups.setdefault(("Role", key[1], key[2]), []).append((key[2 + 1], aid))
    label_order_mf = {mf.value: i for i, mf in enumerate(MoralFoundation)}
    label_order_role = {r.value: i for i, r in enumerate(MoralRole)}
    for groups, order in ((mf_groups, label_order_mf), (role_groups, label_order_role)):
        for gkey, members in groups.items():
            members.sort(key=lambda p: order[p[0]])
            ids = [aid for _, aid in members]
            gp.groups[gkey] = ids
            gp.constraints.append(LinearConstraint(
                {aid: 1.0 for aid in ids}, -1.0, equality=True,
                origin="exactly_one"))
    return gp


def _ground_polarity_agreement(gp, template, kb, config, observed_mf):
    """Ground the polarity-agreement constraint (SamePolarity head).

    For every unordered pair of tweets with equal ideology and topic that
    share an entity, the per-polarity role mass must agree:
        sum_{r in P} y(t1,e,r) = sum_{r in P} y(t2,e,r)   for P in {+, -}.
    """
    for cons in ground_polarity_coupling(kb, observed_mf):
        if config.soften_c3:
            # |expr| as two opposing hinges
            gp.rules.append(GroundRule(template.tag,
                                       _intern_all(gp, cons[0]), 0.0,
                                       config.c3_weight, 1))
            gp.rules.append(GroundRule(template.tag,
                                       {k: -v for k, v in _intern_all(gp, cons[0]).items()},
                                       0.0, config.c3_weight, 1))
        else:
            gp.constraints.append(LinearConstraint(
                _intern_all(gp, cons[0]), 0.0, equality=True,
                origin=template.tag))


def _intern_all(gp, keyed_coeffs):
    return {gp.intern(key): c for key, c in keyed_coeffs.items()}


def ground_polarity_coupling(kb: KnowledgeBase, observed_mf=None):
    """Yield polarity-coupling expressions as ({atom key: coeff},) tuples."""
    ideo = {args[0]: args[1] for args in kb.atoms("Ideo")}
    topic = {args[0]: args[1] for args in kb.atoms("Topic")}
    by_entity: dict[str, list[str]] = {}
    for t, e in kb.atoms("Ent"):
        by_entity.setdefault(e, []).append(t)
    for e, tweets in by_entity.items():
        for i, t1 in enumerate(tweets):
            for t2 in tweets[i + 1:]:
                if ideo.get(t1) != ideo.get(t2) or topic.get(t1) != topic.get(t2):
                    continue
                for pol in (Polarity.POSITIVE, Polarity.NEGATIVE):
                    coeffs: dict[tuple, float] = {}
                    for rv in _role_values_for(t1, observed_mf):
                        if role_polarity(MoralRole(rv)) == pol:
                            key = ("Role", t1, e, rv)
                            coeffs[key] = coeffs.get(key, 0.0) + 1.0
                    for rv in _role_values_for(t2, observed_mf):
                        if role_polarity(MoralRole(rv)) == pol:
                            key = ("Role", t2, e, rv)
                            coeffs[key] = coeffs.get(key, 0.0) - 1.0
                    if coeffs:
                        yield (coeffs,)
