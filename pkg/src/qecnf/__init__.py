"""Quantifier elimination for existentially quantified propositional CNF.

The engine proves quantified clauses redundant subspace by subspace,
recording each proof as a re-usable dependency sequent with an explicit
order constraint, and emits a quantifier-free formula over the free
variables.  A brute-force enumeration oracle certifies results at desk
scale.
"""

from .cnf import (
    Assignment,
    Clause,
    ClauseState,
    CnfFormula,
    EcnfProblem,
    IncompatibleAssignmentsError,
    NotResolvableError,
    TAUTOLOGY,
    TautologyError,
    Tautology,
    VarNotInClauseError,
    cofactor_clause,
    cofactor_formula,
    compatible,
    is_blocked,
    resolvable,
    resolve,
    resolve_assignments,
)
from .dsequent import (
    ActiveSet,
    DSequent,
    DSequentStore,
    FormulaTagMismatchError,
    IncompatibleConditionalsError,
    IncompleteCoverError,
    InconsistentPairError,
    InconsistentPremisesError,
    NoImplicationError,
    NotInConstraintError,
    NotSatisfyingError,
    PreconditionViolatedError,
    TagNotExtensionError,
    TargetMismatchError,
    align,
    atomic_first_kind,
    atomic_second_kind,
    atomic_third_kind,
    check_consistent,
    is_robust,
    join,
    relax_constraint,
    substitute,
)
from .oracle import (
    DEFAULT_ORACLE_LIMIT,
    NotBoundaryPointError,
    OracleLimitError,
    RedundancyVerdict,
    equiv_counterexample,
    equiv_quantified,
    is_redundant_set,
    is_removable,
    is_virtually_redundant,
    is_z_boundary_point,
    qe_by_enumeration,
)
from .qdimacs import ParseError, UniversalNotSupportedError, parse_qdimacs
from .solver import (
    ResourceLimitError,
    SolveResult,
    SolverOptions,
    SolverStats,
    solve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
