"""Copositive-side tests: the cones K^(t), DNN checks and the DPS bridge.

K^(t) holds the symmetric A for which ||x||^(2t) (x o x)^T A (x o x) is a sum
of squares. The polynomial only has even exponents, so its Gram matrix splits
into one block per parity class of the monomials (exponents mod 2).

Cone membership here is closed-cone membership: a Marginal margin counts as
a member.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import defaultdict
from fractions import Fraction
from typing import TYPE_CHECKING, Optional

import numpy as np
from pydantic import BaseModel, computed_field
from scipy import sparse

from dpskit.elimination import LinearEquation, solve_equalities
from dpskit.enums import Hierarchy, Regime, SolveStatus, Verdict
from dpskit.exceptions import (
    DimensionMismatchError,
    InconsistentModelError,
    ParameterError,
)
from dpskit.hermitian import HermitianMatrix, RealSymmetric, is_psd
from dpskit.patterns import add, exponents, mod2, multinomial, unit
from dpskit.relax import (
    Target,
    build_bose_template,
    check_membership,
    extra_values,
    objective_in_free,
    to_lmi,
)
from dpskit.sdp import (
    LmiBlock,
    LmiProblem,
    SolveReport,
    SolverOptions,
    solve_feasibility,
    solve_objective,
)
from dpskit.states import TripleXYZ, rho_from_triple
from dpskit.util import PATTERN_ATOL

if TYPE_CHECKING:  # pragma: no cover
    from collections.abc import Iterable, Sequence

    import numpy.typing as npt

    from dpskit.types import ExponentVec, RealArray

    SymmetricLike = RealSymmetric | npt.ArrayLike

logging.basicConfig()
logger = logging.getLogger(__name__)

BRUTE_MAX_N = 6

HORN = (
    (1, -1, 1, 1, -1),
    (-1, 1, -1, 1, 1),
    (1, -1, 1, -1, 1),
    (1, 1, -1, 1, -1),
    (-1, 1, 1, -1, 1),
)


def horn_matrix() -> RealSymmetric:
    """Return the 5 x 5 Horn matrix, copositive but not in K^(0)."""
    return RealSymmetric(np.array(HORN, dtype=float))


def as_symmetric(a: SymmetricLike) -> RealArray:
    """Return the entries of `a` as a float array, validated symmetric."""
    if isinstance(a, RealSymmetric):
        return a.entries
    return RealSymmetric(np.asarray(a, dtype=float)).entries


def cone_verdict(report: SolveReport) -> Verdict:
    """Fold a Marginal verdict into Feasible for closed-cone membership."""
    if report.verdict is Verdict.MARGINAL:
        return Verdict.FEASIBLE
    return report.verdict if report.verdict is not None else Verdict.INFEASIBLE


def is_dnn(x: SymmetricLike, atol: float = PATTERN_ATOL) -> bool:
    """Return True if X is PSD and entrywise nonnegative."""
    entries = as_symmetric(x)
    return bool(np.all(entries >= -atol)) and is_psd(RealSymmetric(entries))


def completely_positive_gram(vectors: npt.ArrayLike) -> RealSymmetric:
    """Return V^T V for nonnegative columns V, a completely positive matrix."""
    v = np.asarray(vectors, dtype=float)
    if np.any(v < 0):
        msg = "completely positive factors must be entrywise nonnegative"
        raise ParameterError(msg)
    return RealSymmetric(v.T @ v)


# K^(0): A = P + N


def k0_problem(a: SymmetricLike) -> LmiProblem:
    """Return the LMI of A = P + N, P PSD and N entrywise nonnegative.

    The unknowns are the upper triangle of P; N = A - P sits on one diagonal
    block.
    """
    entries = as_symmetric(a)
    n = entries.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    rows, cols, vals = [], [], []
    for k, (i, j) in enumerate(pairs):
        for r, c in {(i, j), (j, i)}:
            rows.append(r * n + c)
            cols.append(k)
            vals.append(1.0)
    psd_block = LmiBlock(
        np.zeros((n, n)),
        sparse.csc_matrix((vals, (rows, cols)), shape=(n * n, len(pairs))),
        "P",
    )
    size = len(pairs)
    diag = np.arange(size)
    nonneg_block = LmiBlock(
        np.diag([entries[i, j] for i, j in pairs]),
        sparse.csc_matrix(
            (-np.ones(size), (diag * size + diag, diag)),
            shape=(size * size, size),
        ),
        "N",
    )
    return LmiProblem(num_vars=size, blocks=(psd_block, nonneg_block))


def k0_report(
    a: SymmetricLike, opts: SolverOptions | None = None
) -> SolveReport:
    """Solve the K^(0) decomposition in margin form."""
    return solve_feasibility(k0_problem(a), opts)


def k0_membership(
    a: SymmetricLike, opts: SolverOptions | None = None
) -> Verdict:
    """Decide A in K^(0), the PSD-plus-nonnegative cone."""
    return cone_verdict(k0_report(a, opts))


# K^(t): Gram matrices of ||x||^(2t) (x o x)^T A (x o x)


def kt_coefficients(a: SymmetricLike, t: int) -> dict[ExponentVec, float]:
    """Return the coefficients of ||x||^(2t) (x o x)^T A (x o x).

    Keys are the exponents eta of x^(2 eta); every other monomial is zero.
    """
    entries = as_symmetric(a)
    n = entries.shape[0]
    coefs: dict[ExponentVec, float] = defaultdict(float)
    for mu in exponents(n, t):
        weight = multinomial(mu)
        for i, j in itertools.product(range(n), repeat=2):
            if entries[i, j]:
                coefs[add(mu, unit(n, i), unit(n, j))] += weight * entries[i, j]
    return dict(coefs)


def parity_classes(n: int, degree: int) -> list[list[ExponentVec]]:
    """Group the monomials of `degree` by exponent parity."""
    groups: dict[ExponentVec, list[ExponentVec]] = defaultdict(list)
    for gamma in exponents(n, degree):
        groups[mod2(gamma)].append(gamma)
    return [groups[key] for key in sorted(groups)]


def gram_problem(
    classes: Sequence[Sequence[ExponentVec]], targets: dict[ExponentVec, float]
) -> LmiProblem:
    """Return the LMI of a Gram matrix matching `targets`.

    `targets` maps eta to the coefficient of x^(2 eta); products x^g x^h of
    the same parity class with g + h odd somewhere are matched to zero.
    """
    unknowns: list[tuple[int, int, int]] = []
    terms: dict[ExponentVec, dict[int, float]] = defaultdict(dict)
    for b, basis in enumerate(classes):
        indices = range(len(basis))
        for p, q in itertools.combinations_with_replacement(indices, 2):
            k = len(unknowns)
            unknowns.append((b, p, q))
            terms[add(basis[p], basis[q])][k] = 1.0 if p == q else 2.0
    equations = []
    for delta, coefficients in terms.items():
        rhs = 0.0
        if all(d % 2 == 0 for d in delta):
            rhs = targets.get(tuple(d // 2 for d in delta), 0.0)
        label = f"x^{list(delta)}"
        equations.append(LinearEquation(coefficients, rhs, None, label))
    solution = solve_equalities(len(unknowns), equations)
    blocks = []
    for b, basis in enumerate(classes):
        size = len(basis)
        rows, cols = [], []
        for k, (owner, p, q) in enumerate(unknowns):
            if owner != b:
                continue
            for r, c in {(p, q), (q, p)}:
                rows.append(r * size + c)
                cols.append(k)
        phi = sparse.csr_matrix(
            (np.ones(len(rows)), (rows, cols)),
            shape=(size * size, len(unknowns)),
        )
        constant = (phi @ solution.offset).reshape(size, size)
        coefficients = sparse.csc_matrix(phi @ solution.basis)
        blocks.append(LmiBlock(constant, coefficients, f"class {b}"))
    return LmiProblem(num_vars=solution.num_free, blocks=tuple(blocks))


def kt_report(
    a: SymmetricLike, t: int, opts: SolverOptions | None = None
) -> SolveReport:
    """Solve the K^(t) Gram LMI in margin form."""
    if t < 0:
        msg = f"level t must be nonnegative, got {t}"
        raise ParameterError(msg)
    entries = as_symmetric(a)
    n = entries.shape[0]
    try:
        problem = gram_problem(
            parity_classes(n, t + 2), kt_coefficients(entries, t)
        )
    except InconsistentModelError:
        return SolveReport(
            status=SolveStatus.INCONSISTENT,
            verdict=Verdict.INFEASIBLE,
            margin=math.inf,
        )
    return solve_feasibility(problem, opts)


def kt_membership(
    a: SymmetricLike, t: int, opts: SolverOptions | None = None
) -> Verdict:
    """Decide A in K^(t)."""
    return cone_verdict(kt_report(a, t, opts))


# brute-force copositivity


def simplex_grid(n: int, depth: int) -> RealArray:
    """Return the points of the simplex with denominators up to `depth`."""
    points: set[tuple[Fraction, ...]] = set()
    for d in range(1, depth + 1):
        for bars in itertools.combinations(range(d + n - 1), n - 1):
            edges = (-1, *bars, d + n - 1)
            counts = [edges[k + 1] - edges[k] - 1 for k in range(n)]
            points.add(tuple(Fraction(c, d) for c in counts))
    return np.array(sorted(points), dtype=float)


def copositive_brute_oracle(a: SymmetricLike, grid_depth: int) -> float:
    """Return the minimum of x^T A x over the rational simplex grid.

    An upper bound on the true simplex minimum, for n up to 6.
    """
    entries = as_symmetric(a)
    n = entries.shape[0]
    if n > BRUTE_MAX_N:
        msg = f"the brute-force oracle handles n <= {BRUTE_MAX_N}, got {n}"
        raise ParameterError(msg)
    if grid_depth < 1:
        msg = f"grid depth must be positive, got {grid_depth}"
        raise ParameterError(msg)
    grid = simplex_grid(n, grid_depth)
    values = np.einsum("ki,ij,kj->k", grid, entries, grid)
    return float(values.min())


# the DPS~ bridge


def bridge_state(x: SymmetricLike) -> HermitianMatrix:
    """Return rho_(X,X)^T_B, the LDUI triple (X, Diag(diag X), X)."""
    entries = as_symmetric(x)
    diagonal = np.diag(np.diag(entries))
    return rho_from_triple(TripleXYZ(entries, diagonal, entries))


class WitnessCheck(BaseModel):
    """One supplied witness C on the (K^(t-1))* side."""

    in_cone: bool
    pairing: float

    @computed_field  # type: ignore[prop-decorator]
    @property
    def separates(self) -> bool:
        """Return True if C certifies X outside (K^(t-1))*."""
        return self.in_cone and self.pairing < -PATTERN_ATOL


class BridgeReport(BaseModel):
    """Both sides of the DPS~(t) and (K^(t-1))* correspondence."""

    t: int
    dps_verdict: Verdict
    dps_margin: Optional[float]
    dnn: Optional[bool] = None
    witnesses: list[WitnessCheck] = []

    @computed_field  # type: ignore[prop-decorator]
    @property
    def consistent(self) -> bool:
        """Return True if no checked implication is violated."""
        member = self.dps_verdict is not Verdict.INFEASIBLE
        if self.dnn is not None and self.dnn != member:
            return False
        return not (member and any(w.separates for w in self.witnesses))


def dps_cp_bridge_check(
    x: SymmetricLike,
    t: int,
    witnesses: Iterable[SymmetricLike] = (),
    opts: SolverOptions | None = None,
) -> BridgeReport:
    """Compare DPS~(t) membership of rho_(X,X)^T_B with the cone side.

    At t = 1 the cone side is the DNN test. For larger t each witness C is
    tested for C in K^(t-1) and paired with X.
    """
    if t < 1:
        msg = f"level t must be at least 1, got {t}"
        raise ParameterError(msg)
    entries = as_symmetric(x)
    report = check_membership(
        bridge_state(entries),
        t,
        regime=Regime.LDUI,
        hierarchy=Hierarchy.BOSE,
        opts=opts,
    )
    checks = [
        WitnessCheck(
            in_cone=kt_membership(c, t - 1, opts) is Verdict.FEASIBLE,
            pairing=float(np.sum(as_symmetric(c) * entries)),
        )
        for c in witnesses
    ]
    return BridgeReport(
        t=t,
        dps_verdict=cone_verdict(report),
        dps_margin=report.margin,
        dnn=is_dnn(entries) if t == 1 else None,
        witnesses=checks,
    )


# counterexample search


class SearchResult(BaseModel):
    """Outcome of min <C, X> over rho_(X,X)^T_B in DPS~(t)."""

    status: SolveStatus
    objective: float
    x: list[list[float]] = []
    report: SolveReport


def _pair_names(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


def search_objective(
    c: SymmetricLike,
    t: int = 2,
    n: int | None = None,
    opts: SolverOptions | None = None,
) -> SearchResult:
    """Minimize <C, X> subject to rho_(X,X)^T_B in DPS~(t).

    The state entries are linear in X, so X enters the LDUI-reduced moment
    model as extra unknowns of the partial-trace equalities.
    """
    entries = as_symmetric(c)
    size = entries.shape[0]
    if n is not None and n != size:
        msg = f"C is {size} x {size}, expected n={n}"
        raise DimensionMismatchError(msg)
    pairs = _pair_names(size)
    position = {pair: k for k, pair in enumerate(pairs)}

    def targets(row: int, col: int) -> Target:
        if row != col:
            return 0j, {}
        i, k = divmod(row, size)
        return 0j, {position[(min(i, k), max(i, k))]: 1.0 + 0j}

    model = build_bose_template(
        size, t, targets, [f"X[{i},{j}]" for i, j in pairs], ldui_filter=True
    )
    cost = np.zeros(model.num_unknowns)
    for (i, j), k in position.items():
        cost[model.extra_offset + k] = entries[i, j] * (1.0 if i == j else 2.0)
    free_cost, offset = objective_in_free(model, cost)
    report = solve_objective(to_lmi(model), free_cost, opts)
    if report.status is SolveStatus.UNBOUNDED:
        return SearchResult(
            status=report.status, objective=-math.inf, report=report
        )
    values = extra_values(model, report.solution)
    x = np.zeros((size, size))
    for (i, j), k in position.items():
        x[i, j] = x[j, i] = values[k]
    objective = float(report.objective or 0.0) + offset
    logger.debug(
        "search objective %.3e after %d iterations",
        objective,
        report.iterations,
    )
    return SearchResult(
        status=report.status, objective=objective, x=x.tolist(), report=report
    )
