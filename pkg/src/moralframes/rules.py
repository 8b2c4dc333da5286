"""Declarative rule language: lexer, parser, validation, pretty-printing.

Grammar (EBNF):
    program := (decl | rule)*
    decl    := "pred" NAME "/" INT ("closed" | "open")
    rule    := tag ":" clause "."
    tag     := "hard" | "scored(" NAME ")" | FLOAT
    clause  := literal ("&" literal)* "=>" literal
    literal := "~"? NAME "(" term ("," term)* ")"
    term    := VARIABLE | CONSTANT

Terms starting with a lowercase letter are variables; quoted strings and
capitalized identifiers are constants.
"""

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import ProgramError
from .taxonomy import FOUNDATIONS, ROLES

# Sorts whose variables may appear free in a rule head: they range over a
# fixed label set rather than over knowledge-base constants.
LABEL_SORTS = {
    "MFLabel": tuple(mf.value for mf in FOUNDATIONS),
    "RoleLabel": tuple(r.value for r in ROLES),
}


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    sorts: tuple[str, ...]
    closed: bool
    builtin: bool = False

    @property
    def arity(self) -> int:
        return len(self.sorts)


def default_schema() -> dict[str, PredicateSchema]:
    """Relational schema of the shipped program."""
    defs = [
        ("Tweet", ("TweetId",), True),
        ("Ent", ("TweetId", "EntityId"), True),
        ("Ideo", ("TweetId", "Ideology"), True),
        ("Topic", ("TweetId", "TopicId"), True),
        ("PriorMF", ("TweetId", "MFLabel"), True),
        ("PriorRole", ("TweetId", "EntityId", "RoleLabel"), True),
        ("MF", ("TweetId", "MFLabel"), False),
        ("Role", ("TweetId", "EntityId", "RoleLabel"), False),
    ]
    schema = {n: PredicateSchema(n, s, c) for n, s, c in defs}
    for name, sorts in BUILTIN_PREDICATES.items():
        schema[name] = PredicateSchema(name, sorts, True, builtin=True)
    return schema


# Definitional predicates materialized from the taxonomy or compiled to
# equality joins; they need no declaration and carry no stored atoms.
BUILTIN_PREDICATES = {
    "MF_Role": ("MFLabel", "RoleLabel"),
    "SamePolarity": ("RoleLabel", "RoleLabel"),
    "SameIdeo": ("TweetId", "TweetId"),
    "SameTopic": ("TweetId", "TweetId"),
}


@dataclass(frozen=True)
class Term:
    name: str
    is_variable: bool

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Literal:
    predicate: str
    terms: tuple[Term, ...]
    negated: bool = False

    @property
    def arity(self) -> int:
        return len(self.terms)

    def __str__(self):
        neg = "~" if self.negated else ""
        return f"{neg}{self.predicate}({', '.join(map(str, self.terms))})"


class RuleKind(Enum):
    HARD = "hard"
    SCORED = "scored"
    SCALAR = "scalar"


@dataclass
class RuleTemplate:
    kind: RuleKind
    body: list[Literal]
    head: Literal
    scorer: str | None = None      # scored rules only
    weight: float = 1.0            # scalar rules only
    line: int = 0
    tag: str = ""                  # stable id, assigned by the parser

    def __str__(self):
        if self.kind is RuleKind.HARD:
            prefix = "hard"
        elif self.kind is RuleKind.SCORED:
            prefix = f"scored({self.scorer})"
        else:
            prefix = repr(self.weight)
        clause = " & ".join(map(str, self.body)) + " => " + str(self.head)
        return f"{prefix}: {clause}."


@dataclass
class Program:
    declarations: list[PredicateSchema] = field(default_factory=list)
    templates: list[RuleTemplate] = field(default_factory=list)
    validated: bool = False

    def pretty(self) -> str:
        lines = [
            f"pred {d.name}/{d.arity} {'closed' if d.closed else 'open'}"
            for d in self.declarations
        ]
        lines += [str(t) for t in self.templates]
        return "\n".join(lines) + "\n"

    def template_by_tag(self, tag: str) -> RuleTemplate:
        for t in self.templates:
            if t.tag == tag:
                return t
        raise KeyError(tag)


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>\#[^\n]*)
      | (?P<float>[+-]?\d+\.\d*|[+-]?\.\d+|[+-]?\d+(?![\w.]))
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<string>"[^"]*")
      | (?P<punct>[():,./&~]|=>)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _lex(source: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise ProgramError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.cur
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, msg):
        raise ProgramError(msg, self.cur.line, self.cur.col)

    def expect(self, text: str) -> _Token:
        if self.cur.text != text:
            self.fail(f"expected {text!r}, got {self.cur.text!r}")
        return self.advance()

    def expect_name(self) -> _Token:
        if self.cur.kind != "name":
            self.fail(f"expected identifier, got {self.cur.text!r}")
        return self.advance()

    def parse_program(self) -> Program:
        program = Program()
        scalar_count = hard_count = 0
        while self.cur.kind != "eof":
            if self.cur.text == "pred":
                program.declarations.append(self.parse_decl())
                continue
            template = self.parse_rule()
            if template.kind is RuleKind.SCORED:
                template.tag = template.scorer
            elif template.kind is RuleKind.HARD:
                template.tag = f"hard{hard_count}"
                hard_count += 1
            else:
                template.tag = f"scalar{scalar_count}"
                scalar_count += 1
            program.templates.append(template)
        tags = [t.tag for t in program.templates]
        dupes = {t for t in tags if tags.count(t) > 1}
        if dupes:
            raise ProgramError(f"duplicate scorer name(s): {sorted(dupes)}")
        return program

    def parse_decl(self) -> PredicateSchema:
        self.expect("pred")
        name = self.expect_name().text
        self.expect("/")
        if self.cur.kind != "float" or not self.cur.text.isdigit():
            self.fail("expected arity integer")
        arity = int(self.advance().text)
        mode = self.expect_name().text
        if mode not in ("closed", "open"):
            self.fail(f"expected 'closed' or 'open', got {mode!r}")
        # Sorts are resolved at validation time; placeholders until then.
        return PredicateSchema(name, ("?",) * arity, mode == "closed")

    def parse_rule(self) -> RuleTemplate:
        line = self.cur.line
        if self.cur.text == "hard":
            self.advance()
            kind, scorer, weight = RuleKind.HARD, None, 0.0
        elif self.cur.text == "scored":
            self.advance()
            self.expect("(")
            scorer = self.expect_name().text
            self.expect(")")
            kind, weight = RuleKind.SCORED, 0.0
        elif self.cur.kind == "float":
            weight = float(self.advance().text)
            kind, scorer = RuleKind.SCALAR, None
        else:
            self.fail(f"expected rule tag, got {self.cur.text!r}")
        self.expect(":")
        body = [self.parse_literal()]
        while self.cur.text == "&":
            self.advance()
            body.append(self.parse_literal())
        self.expect("=>")
        head = self.parse_literal()
        self.expect(".")
        return RuleTemplate(kind=kind, body=body, head=head, scorer=scorer,
                            weight=weight, line=line)

    def parse_literal(self) -> Literal:
        negated = False
        if self.cur.text == "~":
            self.advance()
            negated = True
        name = self.expect_name().text
        self.expect("(")
        terms = [self.parse_term()]
        while self.cur.text == ",":
            self.advance()
            terms.append(self.parse_term())
        self.expect(")")
        return Literal(name, tuple(terms), negated)

    def parse_term(self) -> Term:
        tok = self.cur
        if tok.kind == "string":
            self.advance()
            return Term(tok.text.strip('"'), False)
        if tok.kind == "float":
            self.advance()
            return Term(tok.text, False)
        if tok.kind == "name":
            self.advance()
            return Term(tok.text, tok.text[0].islower())
        self.fail(f"expected term, got {tok.text!r}")


def parse_program(source: str) -> Program:
    """Parse rule-language source into an (unvalidated) Program."""
    return _Parser(_lex(source)).parse_program()


def validate(program: Program, schema: dict[str, PredicateSchema] | None = None) -> Program:
    """Resolve sorts against the schema and check structural rules.

    Checks: every predicate declared (or builtin), arity agreement,
    negation only on open heads, scored/scalar heads open, and head
    variables either bound in the body or ranging over a label sort.
    """
    if schema is None:
        schema = default_schema()
    resolved = []
    known: dict[str, PredicateSchema] = {
        n: s for n, s in schema.items() if s.builtin
    }
    for decl in program.declarations:
        ref = schema.get(decl.name)
        if ref is None:
            raise ProgramError(f"predicate {decl.name!r} not in schema")
        if ref.arity != decl.arity:
            raise ProgramError(
                f"predicate {decl.name!r} declared with arity {decl.arity}, "
                f"schema says {ref.arity}")
        if ref.closed != decl.closed:
            raise ProgramError(
                f"predicate {decl.name!r} declared "
                f"{'closed' if decl.closed else 'open'}, schema disagrees")
        known[decl.name] = ref
        resolved.append(ref)

    for template in program.templates:
        _check_template(template, known)

    checked = Program(declarations=resolved, templates=program.templates,
                      validated=True)
    return checked


def _check_template(template: RuleTemplate, known: dict[str, PredicateSchema]):
    def lookup(lit: Literal) -> PredicateSchema:
        ps = known.get(lit.predicate)
        if ps is None:
            raise ProgramError(
                f"undeclared predicate {lit.predicate!r}", template.line)
        if ps.arity != lit.arity:
            raise ProgramError(
                f"{lit.predicate!r} used with {lit.arity} arguments, "
                f"declared with {ps.arity}", template.line)
        return ps

    body_vars = set()
    for lit in template.body:
        if lit.negated:
            raise ProgramError("negation is only permitted on the head",
                               template.line)
        lookup(lit)
        body_vars.update(t.name for t in lit.terms if t.is_variable)

    head_schema = lookup(template.head)
    if template.head.negated and head_schema.closed:
        raise ProgramError(
            f"negated head on closed predicate {template.head.predicate!r}",
            template.line)
    if template.kind is not RuleKind.HARD and head_schema.closed:
        raise ProgramError(
            f"weighted rule head {template.head.predicate!r} must be an "
            f"open predicate", template.line)
    for term, sort in zip(template.head.terms, head_schema.sorts):
        if term.is_variable and term.name not in body_vars and sort not in LABEL_SORTS:
            raise ProgramError(
                f"unsafe head variable {term.name!r} (not in body and not a "
                f"label sort)", template.line)


# The shipped program: text/context scorers for both decisions, the
# MF/role consistency constraint, a soft distinct-roles clause, a hard
# polarity-agreement constraint, and prior pass-through rules.
DEFAULT_PROGRAM = """\
pred Tweet/1 closed
pred Ent/2 closed
pred Ideo/2 closed
pred Topic/2 closed
pred PriorMF/2 closed
pred PriorRole/3 closed
pred MF/2 open
pred Role/3 open

scored(mf_text): Tweet(t) => MF(t, m).
scored(role_text): Tweet(t) & Ent(t, e) => Role(t, e, r).
scored(mf_context): Tweet(t) & Ideo(t, i) & Topic(t, k) => MF(t, m).
scored(role_context): Tweet(t) & Ideo(t, i) & Topic(t, k) & Ent(t, e) => Role(t, e, r).
scored(distinct_roles): Ent(t, e1) & Ent(t, e2) & Role(t, e1, r) => ~Role(t, e2, r).
hard: Ent(t, e) & Role(t, e, r) & MF_Role(m, r) => MF(t, m).
hard: SameIdeo(t1, t2) & SameTopic(t1, t2) & Ent(t1, e) & Ent(t2, e) & Role(t1, e, r1) & Role(t2, e, r2) => SamePolarity(r1, r2).
1.0: PriorMF(t, m) => MF(t, m).
1.0: PriorRole(t, e, r) => Role(t, e, r).
"""

MF_ROLE_CONSISTENCY_TAG = "hard0"
POLARITY_AGREEMENT_TAG = "hard1"
DISTINCT_ROLES_TAG = "distinct_roles"
MF_PRIOR_TAG = "scalar0"
ROLE_PRIOR_TAG = "scalar1"
SCORED_MF_TAGS = ("mf_text", "mf_context")
SCORED_ROLE_TAGS = ("role_text", "role_context")


def default_program() -> Program:
    return validate(parse_program(DEFAULT_PROGRAM))
