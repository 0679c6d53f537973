"""Enumeration-based semantic ground truth for desk-scale problems.

Everything here evaluates original clauses directly at total points (or at
points merged with a fixed partial assignment), never through the symbolic
cofactor machinery, so the oracle is an independent route against which the
rest of the engine is checked.  Equivalence-style queries use bit-parallel
truth tables carried in Python big integers: bit ``i`` of a table records the
formula value at the assignment whose bit ``j`` gives the value of the
``j``-th variable of the chosen ordering.

All operations fail loudly with :class:`OracleLimitError` instead of
approximating once the variable count exceeds the configured limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .cnf import (
    Assignment,
    Clause,
    ClauseState,
    CnfFormula,
    EcnfProblem,
    lit_sign,
    lit_var,
)

DEFAULT_ORACLE_LIMIT = 24


class OracleLimitError(Exception):
    """The instance is too large for exhaustive enumeration."""


class NotBoundaryPointError(ValueError):
    """The point is not a boundary point of the required shape."""


@dataclass(frozen=True)
class RedundancyVerdict:
    redundant: bool
    witness: Assignment | None = None

    def __post_init__(self) -> None:
        if self.redundant == (self.witness is not None):
            raise ValueError("witness present iff not redundant")


def _check_limit(var_count: int, limit: int) -> None:
    if var_count > limit:
        raise OracleLimitError(
            "%d variables exceed the oracle limit %d" % (var_count, limit)
        )


def clause_status(clause: Clause, point: Assignment) -> bool:
    """Value of a clause at a total point (residual states included)."""
    if clause.state is ClauseState.TRUE:
        return True
    if clause.state is ClauseState.FALSE:
        return False
    return any(point.satisfies(lit) for lit in clause.literals)


def falsified_ids(f: CnfFormula, point: Assignment) -> list[int]:
    return sorted(cid for cid, c in f.clauses.items() if not clause_status(c, point))


def formula_value(f: CnfFormula, point: Assignment) -> bool:
    return all(clause_status(c, point) for c in f.clauses.values())


def _require_point(f: CnfFormula, p: Assignment) -> None:
    missing = f.vars() - set(p)
    if missing:
        raise ValueError("point leaves variables %s unassigned" % sorted(missing))


# -- truth tables -----------------------------------------------------------


def _var_masks(order: tuple[int, ...]) -> dict[int, int]:
    total = 1 << len(order)
    masks: dict[int, int] = {}
    for j, v in enumerate(order):
        stride = 1 << j
        m = ((1 << stride) - 1) << stride
        width = stride << 1
        while width < total:
            m |= m << width
            width <<= 1
        masks[v] = m
    return masks


def _truth_table(
    clauses: list[Clause], order: tuple[int, ...], fixed: Assignment
) -> int:
    """Big-int table of the conjunction over assignments to ``order``.

    Literals on ``fixed`` variables are constant-folded; every other clause
    variable must appear in ``order``.
    """
    full = (1 << (1 << len(order))) - 1
    masks = _var_masks(order)
    table = full
    for clause in clauses:
        if clause.state is ClauseState.TRUE:
            continue
        if clause.state is ClauseState.FALSE:
            return 0
        cm = 0
        satisfied = False
        for lit in clause.literals:
            v = lit_var(lit)
            if fixed.satisfies(lit):
                satisfied = True
                break
            if fixed.falsifies(lit):
                continue
            if v not in masks:
                raise ValueError("variable %d neither ordered nor fixed" % v)
            cm |= masks[v] if lit > 0 else (full ^ masks[v])
        if satisfied:
            continue
        table &= cm
        if table == 0:
            return 0
    return table


def _fold_exists_high(table: int, n_total: int, n_keep: int) -> int:
    """OR-project away the highest-order variables down to ``n_keep``."""
    n = n_total
    while n > n_keep:
        half = 1 << (n - 1)
        table = (table & ((1 << half) - 1)) | (table >> half)
        n -= 1
    return table


def _exists_models(
    prob: EcnfProblem, q: Assignment, drop: frozenset[int] = frozenset()
) -> tuple[tuple[int, ...], int]:
    """Table over the unassigned free variables of ``exists X [F minus drop]``
    cofactored by ``q`` (computed by constant folding, not cofactor objects)."""
    f = prob.formula
    fvars = f.vars()
    y_order = tuple(sorted(v for v in fvars & prob.y_vars if v not in q))
    x_order = tuple(sorted(v for v in fvars & prob.x_vars if v not in q))
    clauses = [c for cid, c in f.clauses.items() if cid not in drop]
    table = _truth_table(clauses, y_order + x_order, q)
    return y_order, _fold_exists_high(table, len(y_order) + len(x_order), len(y_order))


def _index_to_assignment(order: tuple[int, ...], idx: int) -> Assignment:
    return Assignment({v: (idx >> j) & 1 for j, v in enumerate(order)})


# -- operations -------------------------------------------------------------


def qe_by_enumeration(
    prob: EcnfProblem, limit: int = DEFAULT_ORACLE_LIMIT
) -> CnfFormula:
    """Truth-table projection of the quantified formula onto its free
    variables, in canonical form: one full-width clause per falsifying
    assignment of the free variables (deliberately unminimized)."""
    f = prob.formula
    _check_limit(len(f.vars()), limit)
    y_order, models = _exists_models(prob, Assignment())
    clause_lits: list[list[int]] = []
    for idx in range(1 << len(y_order)):
        if not (models >> idx) & 1:
            lits = [(-v if (idx >> j) & 1 else v) for j, v in enumerate(y_order)]
            clause_lits.append(lits)
    return CnfFormula.from_lists(clause_lits, num_vars=f.num_vars)


def is_z_boundary_point(p: Assignment, f: CnfFormula, z: frozenset[int]) -> bool:
    """All four defining conditions: z nonempty, the point falsifies the
    formula, every falsified clause touches z, and no proper subset of z
    retains that covering property."""
    _require_point(f, p)
    if not z:
        return False
    falsified = [f.clauses[cid] for cid in falsified_ids(f, p)]
    if not falsified:
        return False
    if any(not (c.vars() & z) for c in falsified):
        return False
    # Covering is monotone in z, so minimality only needs the maximal
    # proper subsets: each member must be the sole z-contact of some clause.
    for zi in z:
        if not any(c.vars() & z <= {zi} for c in falsified):
            return False
    return True


def is_removable(p: Assignment, prob: EcnfProblem, x_prime: frozenset[int]) -> bool:
    """True iff no reassignment of the ``x_prime`` variables inside ``p``
    satisfies the formula (flip-search criterion for removability)."""
    f = prob.formula
    _require_point(f, p)
    if not x_prime <= prob.x_vars:
        raise ValueError("x_prime must be a subset of the quantified variables")
    falsified = [f.clauses[cid] for cid in falsified_ids(f, p)]
    if not falsified or any(not (c.vars() & x_prime) for c in falsified):
        raise NotBoundaryPointError(
            "point is not a boundary point for any z inside x_prime"
        )
    flips = tuple(sorted(x_prime & f.vars()))
    for idx in range(1 << len(flips)):
        trial = dict(p)
        for j, v in enumerate(flips):
            trial[v] = (idx >> j) & 1
        if formula_value(f, Assignment(trial)):
            return False
    return True


def is_redundant_set(
    g: frozenset[int],
    prob: EcnfProblem,
    q: Assignment,
    limit: int = DEFAULT_ORACLE_LIMIT,
) -> RedundancyVerdict:
    """Decide whether dropping the clauses ``g`` preserves the quantified
    formula in the subspace ``q``; on failure, return a removable boundary
    point falsifying only clauses of ``g`` as the witness."""
    f = prob.formula
    _check_limit(len(f.vars()), limit)
    g = frozenset(g)
    for cid in g:
        if cid not in f.clauses:
            raise ValueError("clause %d not in formula" % cid)
        clause = f.clauses[cid]
        satisfied = clause.state is ClauseState.TRUE or any(
            q.satisfies(lit) for lit in clause.literals
        )
        if not satisfied and not prob.is_x_clause(clause):
            raise ValueError("clause %d is not an X-clause in the subspace" % cid)
    y_order, with_g = _exists_models(prob, q)
    _, without_g = _exists_models(prob, q, drop=g)
    if with_g == without_g:
        return RedundancyVerdict(True)
    # Dropping clauses only adds models, so any difference has the reduced
    # formula satisfiable where the full one is not.
    diff = without_g & ~with_g
    y_idx = (diff & -diff).bit_length() - 1
    y_assign = _index_to_assignment(y_order, y_idx)
    fvars = f.vars()
    x_free = tuple(sorted(v for v in fvars & prob.x_vars if v not in q))
    kept = [c for cid, c in f.clauses.items() if cid not in g]
    base = dict(q)
    base.update(y_assign)
    witness = None
    for idx in range(1 << len(x_free)):
        trial = dict(base)
        for j, v in enumerate(x_free):
            trial[v] = (idx >> j) & 1
        for v in fvars:
            trial.setdefault(v, 0)
        cand = Assignment(trial)
        if all(clause_status(c, cand) for c in kept):
            witness = cand
            break
    if witness is None:
        raise AssertionError("projection disagreement without a witness point")
    return RedundancyVerdict(False, witness)


def _x_removable_at(
    prob: EcnfProblem, point: Assignment, fixed: Assignment
) -> bool:
    """Removability of ``point`` in the formula cofactored by ``fixed``,
    by flip-search over every quantified variable left free by ``fixed``."""
    f = prob.formula
    flips = tuple(sorted(v for v in f.vars() & prob.x_vars if v not in fixed))
    live = [c for c in f.clauses.values() if not any(fixed.satisfies(l) for l in c.literals)]
    for idx in range(1 << len(flips)):
        trial = dict(point)
        for j, v in enumerate(flips):
            trial[v] = (idx >> j) & 1
        t = Assignment(trial)
        if all(clause_status(c, t) for c in live):
            return False
    return True


def is_virtually_redundant(
    c: int,
    prob: EcnfProblem,
    q: Assignment,
    limit: int = DEFAULT_ORACLE_LIMIT,
) -> bool:
    """Weakened redundancy of clause ``c`` in the subspace ``q``.

    Collect every point that falsifies only ``c`` in the cofactored formula
    and is removable there; the clause is virtually redundant when no such
    point exists (regular redundancy) or when each one stops being removable
    in some enclosing subspace obtained by dropping quantified bindings of
    ``q`` (the free bindings always stay).
    """
    f = prob.formula
    _check_limit(len(f.vars()), limit)
    if c not in f.clauses:
        raise ValueError("clause %d not in formula" % c)
    fvars = f.vars()
    target = f.clauses[c]
    if target.state is ClauseState.NORMAL and any(
        q.satisfies(lit) for lit in target.literals
    ):
        return True  # satisfied residual, trivially redundant
    live = {
        cid: cl
        for cid, cl in f.clauses.items()
        if not (
            cl.state is ClauseState.TRUE
            or any(q.satisfies(lit) for lit in cl.literals)
        )
    }
    free = tuple(sorted(fvars - set(q)))
    bad_points: list[Assignment] = []
    for idx in range(1 << len(free)):
        merged = dict(q)
        for j, v in enumerate(free):
            merged[v] = (idx >> j) & 1
        point = Assignment(merged)
        fals = [cid for cid, cl in live.items() if not clause_status(cl, point)]
        if fals != [c]:
            continue
        if _x_removable_at(prob, point, q):
            bad_points.append(point)
    if not bad_points:
        return True
    x_bound = tuple(sorted(set(q) & prob.x_vars))
    if not x_bound:
        return False
    for point in bad_points:
        rescued = False
        for k in range(1, len(x_bound) + 1):
            for dropped in combinations(x_bound, k):
                r = q.without(dropped)
                if not _x_removable_at(prob, point, r):
                    rescued = True
                    break
            if rescued:
                break
        if not rescued:
            return False
    return True


def equiv_quantified(
    candidate: CnfFormula,
    prob: EcnfProblem,
    limit: int = DEFAULT_ORACLE_LIMIT,
) -> bool:
    return equiv_counterexample(candidate, prob, limit) is None


def equiv_counterexample(
    candidate: CnfFormula,
    prob: EcnfProblem,
    limit: int = DEFAULT_ORACLE_LIMIT,
) -> Assignment | None:
    """Free-variable assignment on which the candidate disagrees with the
    quantified formula, or None when they are equivalent."""
    cvars = candidate.vars()
    if not cvars <= prob.y_vars:
        raise ValueError("candidate mentions quantified variables")
    fvars = prob.formula.vars()
    _check_limit(len(fvars | cvars), limit)
    y_order = tuple(sorted((fvars & prob.y_vars) | cvars))
    x_order = tuple(sorted(fvars & prob.x_vars))
    table = _truth_table(
        list(prob.formula.clauses.values()), y_order + x_order, Assignment()
    )
    projected = _fold_exists_high(table, len(y_order) + len(x_order), len(y_order))
    cand_table = _truth_table(list(candidate.clauses.values()), y_order, Assignment())
    diff = projected ^ cand_table
    if diff == 0:
        return None
    idx = (diff & -diff).bit_length() - 1
    return _index_to_assignment(y_order, idx)
