"""Solve sparse linear equalities by pivot substitution.

The partial-trace and kernel equalities of a model are eliminated before the
LMI is handed to the solver: every pivot unknown is written as an affine
function of the unknowns that stay free, u = u0 + T z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy import sparse

from dpskit.exceptions import InconsistentModelError

if TYPE_CHECKING:  # pragma: no cover
    from collections.abc import Iterable

    import numpy.typing as npt

    from dpskit.types import RealArray

DROP_RTOL = 1e-10
RESIDUAL_RTOL = 1e-9
# a preferred pivot is kept while its coefficient is at least this share of
# the largest
PIVOT_SHARE = 0.1


@dataclass
class LinearEquation:
    """sum_k coefficients[k] * u_k = rhs, with an optional preferred pivot."""

    coefficients: dict[int, float]
    rhs: float = 0.0
    pivot: Optional[int] = None
    label: str = ""

    @property
    def scale(self) -> float:
        """Return the largest magnitude among the coefficients and rhs."""
        values = [abs(c) for c in self.coefficients.values()]
        return max([abs(self.rhs), *values], default=0.0)


@dataclass(frozen=True, eq=False)
class AffineSolution:
    """Every unknown as u = offset + basis @ z over the free unknowns."""

    num_unknowns: int
    offset: RealArray
    basis: sparse.csr_matrix
    free: tuple[int, ...]
    pivots: tuple[int, ...] = field(default=())
    dropped: int = 0

    @property
    def num_free(self) -> int:
        """Return the number of free unknowns z."""
        return len(self.free)

    def evaluate(self, z: npt.ArrayLike) -> RealArray:
        """Return all unknowns for the free values `z`."""
        return self.offset + self.basis @ np.asarray(z, dtype=float)


@dataclass
class _Expression:
    const: float
    terms: dict[int, float]


class _Eliminator:
    """Incremental elimination keeping every pivot in terms of free unknowns."""

    def __init__(self, num_unknowns: int) -> None:
        self.num_unknowns = num_unknowns
        self.exprs: dict[int, _Expression] = {}
        self.users: dict[int, set[int]] = {}
        self.order: list[int] = []
        self.dropped = 0

    def _substitute(self, pivot: int, expr: _Expression) -> None:
        """Replace `pivot` by `expr` in every stored expression using it."""
        for user in self.users.pop(pivot, set()):
            target = self.exprs[user]
            coef = target.terms.pop(pivot)
            target.const += coef * expr.const
            for j, c in expr.terms.items():
                value = target.terms.get(j, 0.0) + coef * c
                if value == 0.0:
                    target.terms.pop(j, None)
                    self.users[j].discard(user)
                else:
                    target.terms[j] = value
                    self.users.setdefault(j, set()).add(user)

    def add(self, equation: LinearEquation) -> None:
        scale = max(1.0, equation.scale)
        rhs = equation.rhs
        terms: dict[int, float] = {}
        for k, coef in equation.coefficients.items():
            expr = self.exprs.get(k)
            if expr is None:
                terms[k] = terms.get(k, 0.0) + coef
                continue
            rhs -= coef * expr.const
            for j, c in expr.terms.items():
                terms[j] = terms.get(j, 0.0) + coef * c
        terms = {k: c for k, c in terms.items() if abs(c) > DROP_RTOL * scale}
        if not terms:
            if abs(rhs) > RESIDUAL_RTOL * scale:
                label = equation.label or "?"
                msg = f"equation {label} leaves residual {rhs:.3e}"
                raise InconsistentModelError(msg)
            self.dropped += 1
            return
        pivot = max(terms, key=lambda k: (abs(terms[k]), -k))
        preferred = equation.pivot
        if preferred is not None and abs(
            terms.get(preferred, 0.0)
        ) >= PIVOT_SHARE * abs(terms[pivot]):
            pivot = preferred
        coef = terms.pop(pivot)
        expr = _Expression(rhs / coef, {k: -c / coef for k, c in terms.items()})
        self._substitute(pivot, expr)
        self.exprs[pivot] = expr
        for j in expr.terms:
            self.users.setdefault(j, set()).add(pivot)
        self.order.append(pivot)

    def solution(self) -> AffineSolution:
        free = tuple(k for k in range(self.num_unknowns) if k not in self.exprs)
        column = {k: i for i, k in enumerate(free)}
        offset = np.zeros(self.num_unknowns)
        rows: list[int] = list(free)
        cols: list[int] = list(range(len(free)))
        vals: list[float] = [1.0] * len(free)
        for k in self.order:
            expr = self.exprs[k]
            offset[k] = expr.const
            for j, c in expr.terms.items():
                rows.append(k)
                cols.append(column[j])
                vals.append(c)
        basis = sparse.csr_matrix(
            (vals, (rows, cols)), shape=(self.num_unknowns, len(free))
        )
        return AffineSolution(
            num_unknowns=self.num_unknowns,
            offset=offset,
            basis=basis,
            free=free,
            pivots=tuple(self.order),
            dropped=self.dropped,
        )


def solve_equalities(
    num_unknowns: int, equations: Iterable[LinearEquation]
) -> AffineSolution:
    """Eliminate `equations` and return the affine parametrization.

    Redundant equations are dropped when their residual vanishes; a
    contradictory one raises InconsistentModelError.
    """
    eliminator = _Eliminator(num_unknowns)
    for equation in equations:
        eliminator.add(equation)
    return eliminator.solution()
