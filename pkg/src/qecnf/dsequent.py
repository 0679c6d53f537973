"""Dependency sequents with order constraints.

A dependency sequent (D-sequent) ``(q, H) -> C`` records that clause ``C``
is redundant in the quantified formula inside the subspace fixed by the
partial assignment ``q``, for every version of the formula that still
contains the clauses of ``H``.  ``q`` is the *conditional* and ``H`` the
*order constraint*: the clauses of ``H`` may only be proved redundant after
``C``, so a recorded sequent stays applicable exactly while none of them has
been dropped.  A sequent whose constraint contains no quantified clause is
*robust* (nothing that the solver ever drops can invalidate it); otherwise it
is *fragile* and may only be re-used where it is consistent with the sequents
already in force.

Consistency of a set of sequents means pairwise-compatible conditionals plus
the existence of a total proof order for the mentioned clauses, i.e. the
relation "target before its constraint members" is acyclic.
"""

from __future__ import annotations

import heapq
from collections import OrderedDict
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, replace

from .cnf import (
    Assignment,
    EcnfProblem,
    IncompatibleAssignmentsError,
    lit_sign,
    lit_var,
    resolvable,
    resolve_assignments,
)


class NotSatisfyingError(ValueError):
    """The binding does not satisfy the clause."""


class NoImplicationError(ValueError):
    """The residual of the premise clause does not imply the target's."""


class IncompleteCoverError(ValueError):
    """The premises do not cover the clauses resolvable with the target."""


class InconsistentPremisesError(ValueError):
    """The premise sequents admit no common proof order."""


class IncompatibleConditionalsError(ValueError):
    """Premise conditionals bind a shared variable to opposite values."""


class TargetMismatchError(ValueError):
    """Join operands target different clauses."""


class FormulaTagMismatchError(ValueError):
    """Operands were derived against different formula versions."""


class TagNotExtensionError(ValueError):
    """The requested re-tagging does not extend the derivation formula."""


class NotInConstraintError(ValueError):
    """The substituted clause is not in the order constraint."""


class InconsistentPairError(ValueError):
    """The two sequents do not form a consistent set."""


class PreconditionViolatedError(ValueError):
    """The relaxation preconditions do not hold for the given set."""


@dataclass(frozen=True)
class DSequent:
    conditional: Assignment
    order_constraint: frozenset[int]
    target: int
    formula_tag: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "order_constraint", frozenset(self.order_constraint))
        if self.target in self.order_constraint:
            raise ValueError("target clause inside its own order constraint")

    def mentions(self, var: int) -> bool:
        return var in self.conditional

    def __repr__(self) -> str:
        cond = ",".join(f"{v}={b}" for v, b in self.conditional.items())
        h = ",".join(str(i) for i in sorted(self.order_constraint))
        return f"DSequent(({cond}),{{{h}}})->{self.target} @tag{self.formula_tag}"


def is_robust(ds: DSequent, prob: EcnfProblem) -> bool:
    """Robust iff no constraint member is a quantified clause."""
    for cid in ds.order_constraint:
        clause = prob.formula.clauses.get(cid)
        if clause is not None and prob.is_x_clause(clause):
            return False
    return True


# -- consistency ------------------------------------------------------------


def _pairwise_compatible(dseqs: Sequence[DSequent]) -> bool:
    merged: dict[int, int] = {}
    for ds in dseqs:
        for var, bit in ds.conditional.items():
            if merged.setdefault(var, bit) != bit:
                return False
    return True


def _acyclic(dseqs: Sequence[DSequent]) -> bool:
    # Edge target -> h for every constraint member: a total proof order
    # exists iff this relation has no cycle.
    edges: dict[int, set[int]] = {}
    nodes: set[int] = set()
    for ds in dseqs:
        nodes.add(ds.target)
        nodes.update(ds.order_constraint)
        edges.setdefault(ds.target, set()).update(ds.order_constraint)
    indeg = {n: 0 for n in nodes}
    for outs in edges.values():
        for n in outs:
            indeg[n] += 1
    queue = [n for n, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        n = queue.pop()
        seen += 1
        for m in edges.get(n, ()):
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    return seen == len(nodes)


def check_consistent(dseqs: Iterable[DSequent]) -> bool:
    """Pairwise-compatible conditionals and an acyclic proof order."""
    seq = list(dseqs)
    return _pairwise_compatible(seq) and _acyclic(seq)


# -- atomic constructors ----------------------------------------------------


def atomic_first_kind(
    prob: EcnfProblem, c: int, v: int, b: int, formula_tag: int = 0
) -> DSequent:
    """A clause satisfied by a single binding is redundant there, with no
    order constraint; always robust."""
    clause = prob.formula.clauses[c]
    if not prob.is_x_clause(clause):
        raise ValueError("clause %d has no quantified variable" % c)
    lit = clause.lit_on(v)
    if lit is None or lit_sign(lit) != b:
        raise NotSatisfyingError("binding %d=%d does not satisfy clause %d" % (v, b, c))
    return DSequent(Assignment({v: b}), frozenset(), c, formula_tag)


def atomic_second_kind(
    prob: EcnfProblem, q: Assignment, b: int, c: int, formula_tag: int = 0
) -> DSequent:
    """Implication under the subspace: if every surviving literal of clause
    ``b`` also occurs in clause ``c``, then ``c`` is redundant while ``b``
    stays present.  The constraint always records ``b``; the sequent is
    fragile exactly when ``b`` is a quantified clause."""
    if b == c:
        raise ValueError("premise and target must be distinct clauses")
    b_clause = prob.formula.clauses[b]
    c_clause = prob.formula.clauses[c]
    c_live = [lit for lit in c_clause.literals if not q.falsifies(lit)]
    if any(q.satisfies(lit) for lit in c_clause.literals):
        raise NoImplicationError("target clause %d is satisfied in the subspace" % c)
    if not any(lit_var(lit) in prob.x_vars for lit in c_live):
        raise NoImplicationError(
            "residual of clause %d has no quantified variable" % c
        )
    if any(q.satisfies(lit) for lit in b_clause.literals):
        raise NoImplicationError("premise clause %d is satisfied in the subspace" % b)
    b_live = [lit for lit in b_clause.literals if not q.falsifies(lit)]
    if not set(b_live) <= set(c_live):
        raise NoImplicationError(
            "residual of clause %d does not imply residual of clause %d" % (b, c)
        )
    return DSequent(q, frozenset({b}), c, formula_tag)


def atomic_third_kind(
    prob: EcnfProblem,
    c: int,
    v: int,
    premises: Sequence[DSequent],
    formula_tag: int = 0,
) -> DSequent:
    """Blocked-clause redundancy: once every clause resolvable with ``c`` on
    the quantified variable ``v`` is redundant in the joint subspace of the
    premises, ``c`` itself is redundant there.  The conditional is the union
    of the premise conditionals and the constraint the union of their
    constraints."""
    clause = prob.formula.clauses[c]
    if v not in prob.x_vars:
        raise ValueError("variable %d is not quantified" % v)
    if clause.lit_on(v) is None:
        raise ValueError("variable %d not in clause %d" % (v, c))
    resolvable_ids = sorted(
        other.id
        for other in prob.formula.clauses.values()
        if other.id != c and resolvable(clause, other, v)
    )
    premise_targets = sorted(ds.target for ds in premises)
    if premise_targets != resolvable_ids:
        raise IncompleteCoverError(
            "premises cover %s but clauses %s resolve with %d on %d"
            % (premise_targets, resolvable_ids, c, v)
        )
    q = Assignment()
    for ds in premises:
        try:
            q = q.union(ds.conditional)
        except IncompatibleAssignmentsError as exc:
            raise IncompatibleConditionalsError(str(exc)) from exc
    if v in q:
        raise IncompatibleConditionalsError(
            "premise conditionals assign the blocking variable %d" % v
        )
    if not check_consistent(premises):
        raise InconsistentPremisesError("premises admit no common proof order")
    h = frozenset().union(*(ds.order_constraint for ds in premises)) if premises else frozenset()
    return DSequent(q, h, c, formula_tag)


# -- derived constructors ---------------------------------------------------


def join(s1: DSequent, s2: DSequent, v: int) -> DSequent:
    """Merge sequents for the same clause from the two sides of a variable:
    resolve the conditionals on ``v`` and take the union of the constraints
    (the union makes the result's constraint stronger than either parent's).
    """
    if s1.target != s2.target:
        raise TargetMismatchError(
            "targets %d and %d differ" % (s1.target, s2.target)
        )
    if s1.formula_tag != s2.formula_tag:
        raise FormulaTagMismatchError(
            "tags %d and %d differ; align first" % (s1.formula_tag, s2.formula_tag)
        )
    q = resolve_assignments(s1.conditional, s2.conditional, v)
    return DSequent(q, s1.order_constraint | s2.order_constraint, s1.target, s1.formula_tag)


def align(
    s: DSequent,
    extended_tag: int,
    r: frozenset[int] = frozenset(),
    r_implied: bool = True,
) -> DSequent:
    """Re-tag a sequent to a formula extended with implied clauses ``r``.

    Purely a metadata operation: adding implied clauses never invalidates a
    recorded redundancy.  The caller vouches that the extension consists of
    implied clauses; anything else is rejected.
    """
    if not r_implied:
        raise TagNotExtensionError("extension clauses are not marked implied")
    if extended_tag < s.formula_tag:
        raise TagNotExtensionError(
            "tag %d does not extend tag %d" % (extended_tag, s.formula_tag)
        )
    if extended_tag == s.formula_tag:
        return s
    return replace(s, formula_tag=extended_tag)


def substitute(s1: DSequent, s2: DSequent) -> DSequent:
    """Discharge one constraint member: replace ``s2.target`` inside
    ``s1``'s constraint by ``s2``'s own constraint, widening the conditional
    to the union.  Requires the pair to be consistent."""
    if s1.formula_tag != s2.formula_tag:
        raise FormulaTagMismatchError(
            "tags %d and %d differ; align first" % (s1.formula_tag, s2.formula_tag)
        )
    if s2.target not in s1.order_constraint:
        raise NotInConstraintError(
            "clause %d not in the order constraint of the target sequent" % s2.target
        )
    if not check_consistent([s1, s2]):
        raise InconsistentPairError("the pair admits no common proof order")
    q = s1.conditional.union(s2.conditional)
    h = (s1.order_constraint - {s2.target}) | s2.order_constraint
    return DSequent(q, h, s1.target, s1.formula_tag)


def relax_constraint(dseqs: Sequence[DSequent], i: int, m: int) -> DSequent:
    """Remove clause ``m`` from the constraint of the ``i``-th sequent
    without leaving any other foreign clause behind.

    Works by repeated substitution, always discharging the foreign clause
    that comes last in a proof order of the set; the resulting conditional
    stays between the original one and its union with the conditionals of
    the sequents from ``m`` onward.  The set must be consistent, have one
    sequent per target, and have constraints closed over its targets.
    """
    seq = list(dseqs)
    if not 0 <= i < len(seq):
        raise PreconditionViolatedError("index %d out of range" % i)
    by_target: dict[int, DSequent] = {}
    for ds in seq:
        if ds.target in by_target:
            raise PreconditionViolatedError("duplicate target %d" % ds.target)
        by_target[ds.target] = ds
    for ds in seq:
        if not ds.order_constraint <= by_target.keys():
            raise PreconditionViolatedError(
                "constraint of %d not closed over the set's targets" % ds.target
            )
    if not check_consistent(seq):
        raise PreconditionViolatedError("the set is not consistent")
    s = seq[i]
    if m not in s.order_constraint:
        raise PreconditionViolatedError(
            "clause %d not in the constraint of sequent %d" % (m, i)
        )
    pi = _topological_index(seq)
    goal = s.order_constraint - {m}
    current = substitute(s, by_target[m])
    while True:
        foreign = current.order_constraint - goal
        if not foreign:
            return current
        r = max(foreign, key=lambda cid: (pi[cid], cid))
        current = substitute(current, by_target[r])


def _topological_index(dseqs: Sequence[DSequent]) -> dict[int, int]:
    """A proof order of the set's clauses as a rank map (targets before
    their constraint members, ties broken by clause id)."""
    edges: dict[int, set[int]] = {}
    nodes: set[int] = set()
    for ds in dseqs:
        nodes.add(ds.target)
        nodes.update(ds.order_constraint)
        edges.setdefault(ds.target, set()).update(ds.order_constraint)
    indeg = {n: 0 for n in nodes}
    for outs in edges.values():
        for n in outs:
            indeg[n] += 1
    heap = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    rank: dict[int, int] = {}
    while heap:
        n = heapq.heappop(heap)
        rank[n] = len(rank)
        for u in edges.get(n, ()):
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(heap, u)
    if len(rank) != len(nodes):
        raise PreconditionViolatedError("the set admits no proof order")
    return rank


# -- active set -------------------------------------------------------------


class ActiveSet:
    """The sequents currently in force on a branch: at most one per target,
    pairwise-compatible conditionals, and an acyclic proof order, enforced on
    every insertion."""

    def __init__(self) -> None:
        self._dseqs: dict[int, DSequent] = {}
        self._merged: dict[int, tuple[int, int]] = {}  # var -> (bit, refcount)

    def __contains__(self, target: int) -> bool:
        return target in self._dseqs

    def __len__(self) -> int:
        return len(self._dseqs)

    def __iter__(self) -> Iterator[DSequent]:
        return iter(self._dseqs[t] for t in sorted(self._dseqs))

    def get(self, target: int) -> DSequent | None:
        return self._dseqs.get(target)

    def targets(self) -> list[int]:
        return sorted(self._dseqs)

    def values(self) -> list[DSequent]:
        return [self._dseqs[t] for t in sorted(self._dseqs)]

    def copy(self) -> "ActiveSet":
        out = ActiveSet()
        out._dseqs = dict(self._dseqs)
        out._merged = dict(self._merged)
        return out

    def compatible_with(self, ds: DSequent) -> bool:
        return all(
            self._merged.get(var, (bit, 0))[0] == bit
            for var, bit in ds.conditional.items()
        )

    def would_accept(self, ds: DSequent) -> bool:
        return self.compatible_with(ds) and self.cycle_members(ds) is None

    def cycle_members(self, ds: DSequent) -> set[int] | None:
        """Constraint members of ``ds`` from which the existing proof-order
        edges lead back to its target, or None when insertion stays acyclic."""
        bad: set[int] = set()
        for start in ds.order_constraint:
            stack = [start]
            seen = set()
            while stack:
                node = stack.pop()
                if node == ds.target:
                    bad.add(start)
                    break
                if node in seen:
                    continue
                seen.add(node)
                entry = self._dseqs.get(node)
                if entry is not None:
                    stack.extend(entry.order_constraint)
        return bad or None

    def try_insert(self, ds: DSequent) -> bool:
        if ds.target in self._dseqs:
            raise ValueError("target %d already has an active sequent" % ds.target)
        if not self.would_accept(ds):
            return False
        self._dseqs[ds.target] = ds
        for var, bit in ds.conditional.items():
            prev = self._merged.get(var)
            self._merged[var] = (bit, 1 if prev is None else prev[1] + 1)
        return True

    def remove(self, target: int) -> DSequent:
        ds = self._dseqs.pop(target)
        for var in ds.conditional:
            bit, count = self._merged[var]
            if count == 1:
                del self._merged[var]
            else:
                self._merged[var] = (bit, count - 1)
        return ds

    def verify(self) -> None:
        """Full re-check of the invariants (debug hook)."""
        if not check_consistent(self.values()):
            raise AssertionError("active set violates consistency")


# -- persistent store -------------------------------------------------------


class DSequentStore:
    """Bounded collection of sequents kept for re-use.

    Lookup by target clause returns only entries whose conditional is
    contained in the query subspace.  Eviction is least-recently-used and
    prefers dropping fragile entries before robust ones.
    """

    def __init__(self, capacity: int = 100_000) -> None:
        self.capacity = capacity
        self._robust: OrderedDict[tuple, DSequent] = OrderedDict()
        self._fragile: OrderedDict[tuple, DSequent] = OrderedDict()

    @staticmethod
    def _key(ds: DSequent) -> tuple:
        return (
            ds.target,
            tuple(ds.conditional.items()),
            tuple(sorted(ds.order_constraint)),
        )

    def __len__(self) -> int:
        return len(self._robust) + len(self._fragile)

    def entries(self) -> list[DSequent]:
        return list(self._robust.values()) + list(self._fragile.values())

    def add(self, ds: DSequent, robust: bool) -> None:
        book = self._robust if robust else self._fragile
        key = self._key(ds)
        if key in self._robust or key in self._fragile:
            other = self._robust if key in self._robust else self._fragile
            other.move_to_end(key)
            return
        book[key] = ds
        while len(self) > self.capacity:
            victim = self._fragile if self._fragile else self._robust
            victim.popitem(last=False)

    def lookup(self, target: int, q: Assignment) -> list[DSequent]:
        """Entries for ``target`` applicable inside ``q``, robust entries
        first, then most recently stored first."""
        hits: list[DSequent] = []
        for book in (self._robust, self._fragile):
            found = [
                ds
                for ds in book.values()
                if ds.target == target and ds.conditional.issubset(q)
            ]
            hits.extend(reversed(found))
        return hits

    def touch(self, ds: DSequent) -> None:
        key = self._key(ds)
        for book in (self._robust, self._fragile):
            if key in book:
                book.move_to_end(key)
                return

    def dumps(self) -> str:
        lines = []
        for ds in self.entries():
            parts = ["d", str(ds.target), "q"]
            parts += [f"{v}={b}" for v, b in ds.conditional.items()]
            parts.append("h")
            parts += [str(cid) for cid in sorted(ds.order_constraint)]
            parts += ["tag", str(ds.formula_tag)]
            lines.append(" ".join(parts))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def loads(cls, text: str, capacity: int = 100_000) -> "DSequentStore":
        store = cls(capacity)
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            toks = line.split()
            try:
                if toks[0] != "d":
                    raise ValueError("expected leading 'd'")
                target = int(toks[1])
                if toks[2] != "q":
                    raise ValueError("expected 'q' section")
                pos = 3
                bindings = {}
                while pos < len(toks) and toks[pos] != "h":
                    var, bit = toks[pos].split("=")
                    bindings[int(var)] = int(bit)
                    pos += 1
                if pos >= len(toks) or toks[pos] != "h":
                    raise ValueError("expected 'h' section")
                pos += 1
                h = set()
                while pos < len(toks) and toks[pos] != "tag":
                    h.add(int(toks[pos]))
                    pos += 1
                if pos + 1 >= len(toks) or toks[pos] != "tag":
                    raise ValueError("expected trailing 'tag'")
                tag = int(toks[pos + 1])
            except (ValueError, IndexError) as exc:
                raise ValueError("store line %d malformed: %s" % (lineno, raw)) from exc
            ds = DSequent(Assignment(bindings), frozenset(h), target, tag)
            # Robustness is formula-dependent; loaded entries go to the
            # fragile book, which only affects eviction preference.
            store.add(ds, robust=False)
        return store
