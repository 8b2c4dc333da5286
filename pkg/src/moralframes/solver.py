"""MAP inference over ground programs.

Exact integral solutions come from exhaustive enumeration or LP-bounded
branch and bound; the continuous relaxation is solved with consensus ADMM.
All solvers minimize the hinge energy sum(w_r * psi_r) plus any linear
objective terms, subject to the hard constraints; lower is better and ties
break toward the lexicographically smallest assignment vector.
"""

import itertools
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linprog

from .errors import SolverError
from .grounding import GroundProgram, GroundRule, LinearConstraint

FEAS_TOL = 1e-6


class SolverMode(Enum):
    ENUMERATE = "enumerate"
    BRANCH_AND_BOUND = "branch_and_bound"
    ADMM = "admm"


@dataclass
class SolverConfig:
    mode: SolverMode = SolverMode.BRANCH_AND_BOUND
    enumeration_cap: int = 2 ** 20
    admm_step: float = 1.0
    admm_max_iter: int = 5000
    admm_primal_tol: float = 1e-6
    admm_dual_tol: float = 1e-6
    bound_slack: float = 1e-6

    def __post_init__(self):
        if self.admm_primal_tol <= 0 or self.admm_dual_tol <= 0:
            raise SolverError("tolerances must be positive")


@dataclass
class Assignment:
    values: np.ndarray
    objective: float
    converged: bool = True
    stats: dict = field(default_factory=dict)

    def as_dict(self, gp: GroundProgram) -> dict[str, float]:
        out = {}
        for key, aid in gp.atom_id.items():
            pred, args = key[0], key[1:]
            out[f"{pred}({', '.join(map(str, args))})"] = float(self.values[aid])
        return out


def total_energy(gp: GroundProgram, y) -> float:
    return gp.energy(y)


def map_exact(gp: GroundProgram, cfg: SolverConfig | None = None) -> Assignment:
    """Globally optimal integral assignment over all components."""
    cfg = cfg or SolverConfig()
    full = np.zeros(gp.n_atoms)
    stats = {"nodes": 0, "assignments": 0, "wall_time": 0.0}
    t0 = time.monotonic()
    for sub in gp.components():
        if cfg.mode is SolverMode.ENUMERATE:
            values = _enumerate_component(sub, cfg, stats)
        else:
            values = _bnb_component(sub, cfg, stats)
        for local, parent in enumerate(sub.parent_ids):
            full[parent] = values[local]
    stats["wall_time"] = time.monotonic() - t0
    _assert_feasible(gp, full)
    return Assignment(full, total_energy(gp, full), stats=stats)


def _assert_feasible(gp: GroundProgram, y):
    bad = gp.violations(y, FEAS_TOL)
    if bad:
        raise SolverError(
            f"assignment violates {len(bad)} hard constraint(s); first: "
            f"{bad[0].origin or 'unnamed'}")


# -- enumeration ---------------------------------------------------------


def _candidate_iter(sub: GroundProgram):
    """Iterate integral candidates: one choice per exactly-one group,
    free binary atoms enumerated directly."""
    grouped = set()
    group_lists = sorted(sub.groups.items())
    for _, ids in group_lists:
        grouped.update(ids)
    free = [i for i in range(sub.n_atoms) if i not in grouped]
    group_choices = [ids for _, ids in group_lists]

    def count():
        total = 1
        for ids in group_choices:
            total *= len(ids)
        return total * (2 ** len(free))

    def gen():
        for choice in itertools.product(*group_choices):
            base = np.zeros(sub.n_atoms)
            for aid in choice:
                base[aid] = 1.0
            if not free:
                yield base
                continue
            for bits in itertools.product((0.0, 1.0), repeat=len(free)):
                y = base.copy()
                for aid, b in zip(free, bits):
                    y[aid] = b
                yield y

    return count, gen


def _enumerate_component(sub: GroundProgram, cfg: SolverConfig, stats: dict) -> np.ndarray:
    count, gen = _candidate_iter(sub)
    if count() > cfg.enumeration_cap:
        raise SolverError(
            f"enumeration cap exceeded ({count()} candidates > "
            f"{cfg.enumeration_cap}); use branch-and-bound")
    best = None
    best_key = None
    for y in gen():
        stats["assignments"] += 1
        if sub.violations(y, FEAS_TOL):
            continue
        key = (total_energy(sub, y), tuple(y))
        if best_key is None or key < best_key:
            best, best_key = y, key
    if best is None:
        names = sorted({c.origin for c in sub.constraints if c.origin})
        raise SolverError(f"infeasible program (constraints from: {names})")
    return best


# -- branch and bound ----------------------------------------------------


class _LpRelaxation:
    """LP lower bound with slack variables for linear hinges.

    Squared hinges are bounded below by zero and dropped from the LP; the
    bound stays valid because every dropped term is nonnegative. The
    constraint matrices are assembled once; only variable bounds change
    between branch-and-bound nodes.
    """

    def __init__(self, sub: GroundProgram):
        self.sub = sub
        n = self.n = sub.n_atoms
        lp_rules = [r for r in sub.rules if r.rho == 1 and r.weight != 0.0]
        self.quad_rules = [r for r in sub.rules
                           if r.rho == 2 and r.weight != 0.0]
        m = len(lp_rules)

        c = np.zeros(n + m)
        for i, w in sub.linear_terms.items():
            c[i] = w
        for k, rule in enumerate(lp_rules):
            if rule.weight < 0:
                raise SolverError("negative rule weight is not LP-boundable")
            c[n + k] = rule.weight
        self.c = c

        a_ub, b_ub = [], []
        a_eq, b_eq = [], []
        for k, rule in enumerate(lp_rules):
            row = np.zeros(n + m)
            for i, coef in rule.coeffs.items():
                row[i] = coef
            row[n + k] = -1.0
            a_ub.append(row)
            b_ub.append(-rule.const)
        for con in sub.constraints:
            row = np.zeros(n + m)
            for i, coef in con.coeffs.items():
                row[i] = coef
            if con.equality:
                a_eq.append(row)
                b_eq.append(-con.const)
            else:
                a_ub.append(row)
                b_ub.append(-con.const)
        self.a_ub = np.array(a_ub) if a_ub else None
        self.b_ub = np.array(b_ub) if b_ub else None
        self.a_eq = np.array(a_eq) if a_eq else None
        self.b_eq = np.array(b_eq) if b_eq else None
        self.slack_bounds = [(0.0, None)] * m

    def solve(self, fixed: dict[int, float]):
        bounds = [
            ((v, v) if (v := fixed.get(i)) is not None else (0.0, 1.0))
            for i in range(self.n)
        ] + self.slack_bounds
        res = linprog(self.c, A_ub=self.a_ub, b_ub=self.b_ub,
                      A_eq=self.a_eq, b_eq=self.b_eq,
                      bounds=bounds, method="highs")
        if res.status == 2:
            return None, None
        if not res.success:
            raise SolverError(f"LP relaxation failed: {res.message}")
        # squared hinges with every atom fixed contribute a known constant
        extra = 0.0
        for rule in self.quad_rules:
            if all(i in fixed for i in rule.coeffs):
                extra += rule.weight * rule.hinge(fixed)
        return res.fun + self.sub.linear_const + extra, res.x[:self.n]


def _lp_relaxation(sub: GroundProgram, fixed: dict[int, float]):
    return _LpRelaxation(sub).solve(fixed)


def _bnb_component(sub: GroundProgram, cfg: SolverConfig, stats: dict) -> np.ndarray:
    best_y = None
    best_key = None
    # atoms under squared hinges are invisible to the LP objective, so an
    # integral LP point does not settle them; branch until they are fixed
    quadratic_atoms = {
        i for r in sub.rules if r.rho == 2 and r.weight != 0.0
        for i in r.coeffs
    }

    lp = _LpRelaxation(sub)

    def close_out(fixed: dict[int, float]):
        # few enough unfixed atoms that trying every completion is cheaper
        # than another LP solve
        nonlocal best_y, best_key
        free = [i for i in range(sub.n_atoms) if i not in fixed]
        y = np.zeros(sub.n_atoms)
        for i, v in fixed.items():
            y[i] = v
        for bits in itertools.product((0.0, 1.0), repeat=len(free)):
            for i, b in zip(free, bits):
                y[i] = b
            stats["assignments"] += 1
            if sub.violations(y, FEAS_TOL):
                continue
            key = (total_energy(sub, y), tuple(y))
            if best_key is None or key < best_key:
                best_y, best_key = y.copy(), key

    def visit(fixed: dict[int, float]):
        nonlocal best_y, best_key
        stats["nodes"] += 1
        if sub.n_atoms - len(fixed) <= 5:
            close_out(fixed)
            return
        bound, relaxed = lp.solve(fixed)
        if bound is None:
            return
        # nothing in this subtree can beat the incumbent objective
        if best_key is not None and bound >= best_key[0] - cfg.bound_slack:
            return
        # rounding the relaxed point often gives a cheap feasible incumbent
        trial = np.array([fixed.get(i, round(relaxed[i]))
                          for i in range(sub.n_atoms)], dtype=float)
        if not sub.violations(trial, FEAS_TOL):
            key = (total_energy(sub, trial), tuple(trial))
            if best_key is None or key < best_key:
                best_y, best_key = trial, key
        frac = [(abs(relaxed[i] - round(relaxed[i])), i)
                for i in range(sub.n_atoms) if i not in fixed]
        frac = [(f, i) for f, i in frac
                if f > 1e-9 or i in quadratic_atoms]
        if not frac:
            y = np.array([fixed.get(i, round(relaxed[i]))
                          for i in range(sub.n_atoms)], dtype=float)
            if sub.violations(y, FEAS_TOL):
                return
            key = (total_energy(sub, y), tuple(y))
            if best_key is None or key < best_key:
                best_y, best_key = y, key
            return
        # most fractional first; explore the 0 branch before the 1 branch
        _, var = max(frac, key=lambda p: (p[0], -p[1]))
        for value in (0.0, 1.0):
            visit({**fixed, var: value})

    visit({})
    if best_y is None:
        names = sorted({c.origin for c in sub.constraints if c.origin})
        raise SolverError(f"infeasible program (constraints from: {names})")
    return best_y


# -- consensus ADMM ------------------------------------------------------


def map_admm(gp: GroundProgram, cfg: SolverConfig | None = None) -> Assignment:
    """Continuous MAP over [0,1]^n by consensus ADMM.

    Each hinge potential and each hard constraint owns a local copy of its
    variables; the consensus variable is clipped to the unit box. Reports
    the hinge-energy trajectory and convergence flag.
    """
    cfg = cfg or SolverConfig()
    for rule in gp.rules:
        if rule.weight < 0:
            raise SolverError("hinge-loss MRF requires nonnegative rule weights")
    full = np.zeros(gp.n_atoms)
    converged = True
    iters = 0
    trace_all = []
    for sub in gp.components():
        values, ok, it, trace = _admm_component(sub, cfg)
        converged = converged and ok
        iters = max(iters, it)
        trace_all.append(trace)
        for local, parent in enumerate(sub.parent_ids):
            full[parent] = values[local]
    return Assignment(
        full, total_energy(gp, full), converged=converged,
        stats={"iterations": iters, "objective_trace": trace_all})


def _admm_component(sub: GroundProgram, cfg: SolverConfig):
    n = sub.n_atoms
    step = cfg.admm_step
    terms = sub.linear_terms

    blocks = []  # (kind, payload, var_ids)
    for rule in sub.rules:
        if not rule.coeffs:
            continue
        ids = sorted(rule.coeffs)
        c = np.array([rule.coeffs[i] for i in ids])
        blocks.append(("hinge", (c, rule.const, rule.weight, rule.rho), ids))
    for con in sub.constraints:
        ids = sorted(con.coeffs)
        c = np.array([con.coeffs[i] for i in ids])
        blocks.append(("eq" if con.equality else "ineq", (c, con.const), ids))
    if terms:
        ids = sorted(terms)
        c = np.array([terms[i] for i in ids])
        blocks.append(("linear", (c,), ids))

    counts = np.zeros(n)
    for _, _, ids in blocks:
        for i in ids:
            counts[i] += 1
    counts[counts == 0] = 1.0

    z = np.full(n, 0.5)
    x = [z[ids].copy() for _, _, ids in blocks]
    u = [np.zeros(len(ids)) for _, _, ids in blocks]
    trace = []
    ok = False
    it = 0
    for it in range(1, cfg.admm_max_iter + 1):
        sums = np.zeros(n)
        for k, (kind, payload, ids) in enumerate(blocks):
            v = z[ids] - u[k]
            x[k] = _block_prox(kind, payload, v, step)
            sums[ids] += x[k] + u[k]
        z_old = z
        z = np.clip(sums / counts, 0.0, 1.0)
        primal_sq = 0.0
        for k, (_, _, ids) in enumerate(blocks):
            diff = x[k] - z[ids]
            u[k] += diff
            primal_sq += float(diff @ diff)
        dual = step * np.sqrt(float(((z - z_old) ** 2 * counts).sum()))
        primal = np.sqrt(primal_sq)
        trace.append(total_energy(sub, z))
        if primal < cfg.admm_primal_tol and dual < cfg.admm_dual_tol:
            ok = True
            break
    return z, ok, it, trace


def _block_prox(kind, payload, v, step):
    if kind == "linear":
        (c,) = payload
        return v - c / step
    if kind == "hinge":
        c, d, w, rho = payload
        cv = float(c @ v) + d
        if cv <= 0:
            return v
        nc = float(c @ c)
        if rho == 2:
            a = cv / (1.0 + 2.0 * w * nc / step)
            return v - (2.0 * w * a / step) * c
        x = v - (w / step) * c
        if float(c @ x) + d > 0:
            return x
        return v - (cv / nc) * c
    # hard constraint projection
    c, d = payload
    cv = float(c @ v) + d
    if kind == "ineq" and cv <= 0:
        return v
    return v - (cv / float(c @ c)) * c


# -- rounding ------------------------------------------------------------


def round_assignment(relaxed: Assignment, gp: GroundProgram) -> Assignment:
    """Discretize a relaxed assignment group-by-group, repairing any hard
    constraint broken by independent argmax choices."""
    y = np.round(np.clip(relaxed.values, 0.0, 1.0))

    mf_groups = sorted(k for k in gp.groups if k[0] == "MF")
    role_groups = sorted(k for k in gp.groups if k[0] == "Role")
    other_groups = sorted(k for k in gp.groups if k[0] not in ("MF", "Role"))

    fixed: set[int] = set()
    for gkey in mf_groups + role_groups + other_groups:
        ids = gp.groups[gkey]
        order = np.argsort([-relaxed.values[i] for i in ids], kind="stable")
        chosen = None
        for pick in order:
            candidate = ids[pick]
            for i in ids:
                y[i] = 1.0 if i == candidate else 0.0
            if _fixed_violations(gp, y, fixed | set(ids)):
                continue
            chosen = candidate
            break
        if chosen is None:
            raise SolverError(
                f"irreparable infeasibility while rounding group {gkey}")
        fixed.update(ids)

    _assert_feasible(gp, y)
    return Assignment(y, total_energy(gp, y), converged=relaxed.converged,
                      stats=dict(relaxed.stats))


def _fixed_violations(gp: GroundProgram, y, fixed: set[int]) -> bool:
    for con in gp.constraints:
        if all(i in fixed for i in con.coeffs):
            if con.violation(y) > FEAS_TOL:
                return True
    return False


# -- loss-augmented inference --------------------------------------------


def loss_augmented_map(gp: GroundProgram, gold: Assignment,
                       cfg: SolverConfig | None = None) -> Assignment:
    """MAP with a per-atom Hamming bonus for disagreeing with gold.

    Minimizes energy(y) - Hamming(y, gold); the returned objective is this
    augmented energy.
    """
    if gp.violations(gold.values, FEAS_TOL):
        raise SolverError("gold assignment is infeasible")
    aug = _shallow_copy(gp)
    terms = dict(gp.linear_terms)
    const = gp.linear_const
    for i in range(gp.n_atoms):
        if gold.values[i] >= 0.5:
            terms[i] = terms.get(i, 0.0) + 1.0
            const -= 1.0
        else:
            terms[i] = terms.get(i, 0.0) - 1.0
    aug.linear_terms = terms
    aug.linear_const = const
    return map_exact(aug, cfg)


def _shallow_copy(gp: GroundProgram) -> GroundProgram:
    out = GroundProgram()
    out.atoms = gp.atoms
    out.atom_id = gp.atom_id
    out.rules = gp.rules
    out.constraints = gp.constraints
    out.groups = gp.groups
    out.linear_terms = dict(gp.linear_terms)
    out.linear_const = gp.linear_const
    return out


def hamming(a: Assignment, b: Assignment) -> float:
    return float(np.abs(np.round(a.values) - np.round(b.values)).sum())
