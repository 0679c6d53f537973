"""Clause, formula and assignment substrate for existentially quantified CNF.

Literals are DIMACS-style signed integers: ``v`` is the positive literal of
variable ``v >= 1`` and ``-v`` its negation.  Clauses carry a stable integer
id that survives cofactoring; a clause satisfied under an assignment becomes
a ``TRUE``-state residual (it stays in the formula rather than being deleted,
because redundancy bookkeeping wants satisfied clauses present-and-redundant),
and a clause whose literals are all falsified becomes a ``FALSE``-state
residual.

Everything in this module is immutable after construction and all operations
are pure functions, so shared inputs may be used concurrently.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from enum import Enum


class TautologyError(ValueError):
    """A clause contains both polarities of the same variable."""


class NotResolvableError(ValueError):
    """The two operands cannot be resolved on the requested variable."""


class VarNotInClauseError(ValueError):
    """The requested variable does not occur in the clause."""


class IncompatibleAssignmentsError(ValueError):
    """Two assignments bind a shared variable to opposite values."""


def lit_var(lit: int) -> int:
    return abs(lit)


def lit_sign(lit: int) -> int:
    """Value of the variable that satisfies the literal (1 for positive)."""
    return 1 if lit > 0 else 0


def neg(lit: int) -> int:
    return -lit


class ClauseState(Enum):
    NORMAL = "normal"
    TRUE = "true"
    FALSE = "false"


@dataclass(frozen=True)
class Clause:
    """An id-carrying disjunction of literals, or a true/false residual.

    ``literals`` is kept sorted by variable index with no duplicate
    variables; a clause with both polarities of a variable is rejected.
    ``TRUE`` and ``FALSE`` residuals carry no literals.
    """

    id: int
    literals: tuple[int, ...]
    state: ClauseState = ClauseState.NORMAL

    def __post_init__(self) -> None:
        if self.state is not ClauseState.NORMAL:
            if self.literals:
                raise ValueError("true/false residuals carry no literals")
            return
        lits = tuple(sorted(set(self.literals), key=abs))
        seen: set[int] = set()
        for lit in lits:
            v = lit_var(lit)
            if v < 1:
                raise ValueError("variable indices are 1-based")
            if v in seen:
                raise TautologyError(
                    "clause %d has both polarities of variable %d" % (self.id, v)
                )
            seen.add(v)
        if not lits:
            object.__setattr__(self, "state", ClauseState.FALSE)
        object.__setattr__(self, "literals", lits)

    def vars(self) -> frozenset[int]:
        return frozenset(lit_var(lit) for lit in self.literals)

    def lit_on(self, var: int) -> int | None:
        for lit in self.literals:
            if lit_var(lit) == var:
                return lit
        return None

    def same_literals(self, other: "Clause") -> bool:
        return self.literals == other.literals

    def is_true(self) -> bool:
        return self.state is ClauseState.TRUE

    def is_false(self) -> bool:
        return self.state is ClauseState.FALSE

    def __repr__(self) -> str:
        if self.is_true():
            body = "T"
        elif self.is_false():
            body = "F"
        else:
            body = " ".join(str(lit) for lit in self.literals)
        return f"Clause({self.id}: {body})"


def true_clause(cid: int) -> Clause:
    return Clause(cid, (), ClauseState.TRUE)


def false_clause(cid: int) -> Clause:
    return Clause(cid, (), ClauseState.FALSE)


class Assignment(Mapping[int, int]):
    """An immutable partial mapping of variables to bits.

    Supports the set-style algebra used throughout: subset test, union of
    compatible assignments, compatibility test, and resolution on a single
    clashing variable.  A total assignment over a formula's variables is a
    "point" of that formula.
    """

    __slots__ = ("_bind", "_hash")

    def __init__(self, bindings: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        items = bindings.items() if isinstance(bindings, Mapping) else bindings
        bind: dict[int, int] = {}
        for var, bit in items:
            if var < 1:
                raise ValueError("variable indices are 1-based")
            if bit not in (0, 1):
                raise ValueError("bindings take bit values 0 or 1")
            if bind.get(var, bit) != bit:
                raise IncompatibleAssignmentsError(
                    "variable %d bound to both values" % var
                )
            bind[var] = bit
        self._bind = dict(sorted(bind.items()))
        self._hash: int | None = None

    def __getitem__(self, var: int) -> int:
        return self._bind[var]

    def __iter__(self) -> Iterator[int]:
        return iter(self._bind)

    def __len__(self) -> int:
        return len(self._bind)

    def value(self, var: int) -> int | None:
        return self._bind.get(var)

    def issubset(self, other: "Assignment") -> bool:
        return all(other.value(v) == b for v, b in self._bind.items())

    def compatible(self, other: "Assignment") -> bool:
        small, big = (self, other) if len(self) <= len(other) else (other, self)
        return all(big.value(v) in (None, b) for v, b in small.items())

    def union(self, other: "Assignment") -> "Assignment":
        if not self.compatible(other):
            raise IncompatibleAssignmentsError("union of incompatible assignments")
        merged = dict(self._bind)
        merged.update(other._bind)
        return Assignment(merged)

    def assign(self, var: int, bit: int) -> "Assignment":
        return self.union(Assignment({var: bit}))

    def without(self, drop: Iterable[int]) -> "Assignment":
        dropped = set(drop)
        return Assignment({v: b for v, b in self._bind.items() if v not in dropped})

    def restrict(self, keep: Iterable[int]) -> "Assignment":
        kept = set(keep)
        return Assignment({v: b for v, b in self._bind.items() if v in kept})

    def satisfies(self, lit: int) -> bool:
        return self._bind.get(lit_var(lit)) == lit_sign(lit)

    def falsifies(self, lit: int) -> bool:
        val = self._bind.get(lit_var(lit))
        return val is not None and val != lit_sign(lit)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Assignment):
            return NotImplemented
        return self._bind == other._bind

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._bind.items()))
        return self._hash

    def __repr__(self) -> str:
        body = ",".join(f"{v}={b}" for v, b in self._bind.items())
        return f"Assignment({body})"


@dataclass(frozen=True)
class CnfFormula:
    """An id-indexed clause database over variables ``1..num_vars``."""

    clauses: dict[int, Clause]
    num_vars: int

    def __post_init__(self) -> None:
        for cid, clause in self.clauses.items():
            if cid != clause.id:
                raise ValueError("clause id %d stored under key %d" % (clause.id, cid))
            for v in clause.vars():
                if v > self.num_vars:
                    raise ValueError(
                        "variable %d exceeds declared universe %d" % (v, self.num_vars)
                    )

    @classmethod
    def from_lists(
        cls, clause_lits: Iterable[Iterable[int]], num_vars: int | None = None
    ) -> "CnfFormula":
        clauses: dict[int, Clause] = {}
        top = 0
        for i, lits in enumerate(clause_lits, start=1):
            c = Clause(i, tuple(lits))
            clauses[i] = c
            for v in c.vars():
                top = max(top, v)
        return cls(clauses, num_vars if num_vars is not None else top)

    def vars(self) -> frozenset[int]:
        out: set[int] = set()
        for clause in self.clauses.values():
            out.update(clause.vars())
        return frozenset(out)

    def next_id(self) -> int:
        return max(self.clauses, default=0) + 1

    def with_clause(self, clause: Clause) -> "CnfFormula":
        if clause.id in self.clauses:
            raise ValueError("clause id %d already present" % clause.id)
        new = dict(self.clauses)
        new[clause.id] = clause
        return CnfFormula(new, max(self.num_vars, *clause.vars(), 1))

    def without_clauses(self, drop: Iterable[int]) -> "CnfFormula":
        dropped = set(drop)
        return CnfFormula(
            {cid: c for cid, c in self.clauses.items() if cid not in dropped},
            self.num_vars,
        )

    def __iter__(self) -> Iterator[Clause]:
        return iter(self.clauses[cid] for cid in sorted(self.clauses))

    def __len__(self) -> int:
        return len(self.clauses)


@dataclass(frozen=True)
class EcnfProblem:
    """A CNF formula with its variables split into quantified X and free Y."""

    formula: CnfFormula
    x_vars: frozenset[int]
    y_vars: frozenset[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_vars", frozenset(self.x_vars))
        object.__setattr__(self, "y_vars", frozenset(self.y_vars))
        if self.x_vars & self.y_vars:
            raise ValueError("quantified and free variable sets overlap")
        missing = self.formula.vars() - self.x_vars - self.y_vars
        if missing:
            raise ValueError("variables %s are neither quantified nor free" % sorted(missing))

    def is_x_clause(self, clause: Clause) -> bool:
        return bool(clause.vars() & self.x_vars)

    def x_clause_ids(self) -> list[int]:
        return sorted(
            cid for cid, c in self.formula.clauses.items() if self.is_x_clause(c)
        )

    def with_formula(self, formula: CnfFormula) -> "EcnfProblem":
        return EcnfProblem(formula, self.x_vars, self.y_vars)


class Tautology:
    """Marker returned by ``resolve`` when the resolvent is tautological."""

    _instance: "Tautology | None" = None

    def __new__(cls) -> "Tautology":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "TAUTOLOGY"


TAUTOLOGY = Tautology()


def cofactor_clause(c: Clause, p: Assignment) -> Clause:
    """Residual of ``c`` under ``p``: TRUE if satisfied, else the falsified
    literals are removed (an empty residual is FALSE)."""
    if c.state is not ClauseState.NORMAL:
        return c
    kept = []
    for lit in c.literals:
        if p.satisfies(lit):
            return true_clause(c.id)
        if not p.falsifies(lit):
            kept.append(lit)
    if not kept:
        return false_clause(c.id)
    return Clause(c.id, tuple(kept))


def cofactor_formula(f: CnfFormula, p: Assignment) -> CnfFormula:
    """Cofactor every clause; satisfied clauses stay as TRUE residuals and
    every clause keeps its id."""
    return CnfFormula(
        {cid: cofactor_clause(c, p) for cid, c in f.clauses.items()}, f.num_vars
    )


def resolve(c1: Clause, c2: Clause, v: int) -> Clause | Tautology:
    """Resolvent of two clauses on ``v``.

    Raises :class:`NotResolvableError` when ``v`` is missing from either
    clause or carries the same polarity in both.  When some other variable
    also clashes, the resolvent would be tautological and the ``TAUTOLOGY``
    marker is returned instead of a clause; blocked-clause style scans treat
    such pairs as not resolvable.  The result carries the placeholder id -1
    until it is installed into a formula.
    """
    if c1.state is not ClauseState.NORMAL or c2.state is not ClauseState.NORMAL:
        raise ValueError("resolution requires normal-state clauses")
    l1 = c1.lit_on(v)
    l2 = c2.lit_on(v)
    if l1 is None or l2 is None:
        raise NotResolvableError("variable %d missing from an operand" % v)
    if l1 != -l2:
        raise NotResolvableError("same polarity of %d in both operands" % v)
    merged: dict[int, int] = {}
    for lit in c1.literals + c2.literals:
        var = lit_var(lit)
        if var == v:
            continue
        if merged.get(var, lit) != lit:
            return TAUTOLOGY
        merged[var] = lit
    return Clause(-1, tuple(merged.values()))


def resolvable(c1: Clause, c2: Clause, v: int) -> bool:
    """Opposite literals of ``v`` and no other clashing variable."""
    if c1.state is not ClauseState.NORMAL or c2.state is not ClauseState.NORMAL:
        return False
    l1 = c1.lit_on(v)
    l2 = c2.lit_on(v)
    if l1 is None or l2 is None or l1 != -l2:
        return False
    for lit in c1.literals:
        var = lit_var(lit)
        if var == v:
            continue
        other = c2.lit_on(var)
        if other is not None and other != lit:
            return False
    return True


def is_blocked(f: CnfFormula, c: Clause, v: int) -> bool:
    """True iff no normal-state clause of ``f`` is resolvable with ``c`` on
    ``v``.  True-state residuals are redundant and skipped."""
    if c.lit_on(v) is None:
        raise VarNotInClauseError("variable %d not in clause %d" % (v, c.id))
    for other in f.clauses.values():
        if other.id == c.id:
            continue
        if resolvable(c, other, v):
            return False
    return True


def resolve_assignments(q1: Assignment, q2: Assignment, v: int) -> Assignment:
    """Resolvent of two assignments clashing exactly on ``v``."""
    clashes = [w for w in q1 if q2.value(w) not in (None, q1[w])]
    if clashes != [v]:
        raise NotResolvableError(
            "assignments clash on %s, expected exactly [%d]" % (clashes, v)
        )
    merged = {w: b for w, b in q1.items() if w != v}
    for w, b in q2.items():
        if w != v:
            merged[w] = b
    return Assignment(merged)


def compatible(q1: Assignment, q2: Assignment) -> bool:
    """True iff no shared variable is bound to opposite values."""
    return q1.compatible(q2)
