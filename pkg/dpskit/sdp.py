"""Block-diagonal LMI solver.

Problems are posed in the form

    minimize  b.y   subject to  S = F0 + sum_i y_i F_i >= 0   (block-diagonal)

with primal counterpart  maximize -<F0, X>  s.t.  <F_i, X> = b_i, X >= 0.
They are solved by an infeasible-start Mehrotra predictor-corrector method
with Nesterov-Todd scaling. Membership queries use the margin form
`min lambda s.t. B_k(y) + lambda I >= 0, lambda >= cap`, whose optimum
lambda* doubles as a robustness measure.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Optional

import numpy as np
from pydantic import BaseModel, Field
from scipy import linalg, sparse

from dpskit.config import get_settings
from dpskit.enums import SolverEvent, SolveStatus, Verdict
from dpskit.exceptions import (
    DimensionMismatchError,
    NotHermitianError,
    NumericalFailure,
)
from dpskit.util import SYMMETRIZED_ATOL, log_event

if TYPE_CHECKING:  # pragma: no cover
    from collections.abc import Sequence

    import numpy.typing as npt

    from dpskit.types import RealArray

logging.basicConfig()
logger = logging.getLogger(__name__)

# float budget for the scratch arrays of one Schur assembly chunk
SCHUR_BUDGET = 1 << 22
STALL_STEP = 1e-10
STALL_LIMIT = 3
MAX_BACKTRACK = 30


@dataclass(frozen=True, eq=False)
class LmiBlock:
    """One real symmetric affine block B(y) = F0 + sum_i y_i F_i.

    `coefficients` has one column per problem variable holding the row-major
    vectorization of F_i.
    """

    constant: RealArray
    coefficients: sparse.csc_matrix
    label: str = ""

    def __post_init__(self) -> None:
        """Check shapes and symmetry, then freeze the data."""
        constant = np.array(self.constant, dtype=float)
        if constant.ndim != 2 or len(set(constant.shape)) != 1:  # noqa: PLR2004
            msg = f"block constant must be square, got {constant.shape}"
            raise DimensionMismatchError(msg)
        size = constant.shape[0]
        if size < 1:
            msg = "blocks must have dimension at least 1"
            raise DimensionMismatchError(msg)
        coeffs = sparse.csc_matrix(self.coefficients, dtype=float)
        if coeffs.shape[0] != size * size:
            msg = f"coefficients need {size * size} rows, got {coeffs.shape[0]}"
            raise DimensionMismatchError(msg)
        transposed = coeffs[_transpose_index(size), :]
        scale = max(1.0, abs(coeffs).max() if coeffs.nnz else 0.0)
        const_scale = max(1.0, np.max(np.abs(constant)))
        skew = np.max(np.abs(constant - constant.T))
        if skew > SYMMETRIZED_ATOL * const_scale or (
            coeffs.nnz
            and abs(coeffs - transposed).max() > SYMMETRIZED_ATOL * scale
        ):
            msg = f"block {self.label!r} is not symmetric"
            raise NotHermitianError(msg)
        constant = (constant + constant.T) / 2
        constant.setflags(write=False)
        object.__setattr__(self, "constant", constant)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def size(self) -> int:
        """Return the block dimension."""
        return int(self.constant.shape[0])

    @property
    def num_vars(self) -> int:
        """Return the number of variables the block is affine in."""
        return int(self.coefficients.shape[1])

    def evaluate(self, y: npt.ArrayLike) -> RealArray:
        """Return B(y)."""
        values = self.coefficients @ np.asarray(y, dtype=float)
        return self.constant + values.reshape(self.size, self.size)

    @classmethod
    def from_dense(
        cls,
        constant: npt.ArrayLike,
        matrices: Sequence[npt.ArrayLike],
        label: str = "",
    ) -> LmiBlock:
        """Build a block from a dense constant and dense F_i."""
        const = np.asarray(constant, dtype=float)
        size = const.shape[0]
        columns = [
            np.asarray(m, dtype=float).reshape(size * size) for m in matrices
        ]
        coeffs = (
            sparse.csc_matrix(np.column_stack(columns))
            if columns
            else sparse.csc_matrix((size * size, 0))
        )
        return cls(const, coeffs, label)


@dataclass(frozen=True, eq=False)
class LmiProblem:
    """A block-diagonal LMI in `num_vars` free real variables.

    `objective` is the cost vector c of the objective form; feasibility
    problems leave it as None.
    """

    num_vars: int
    blocks: tuple[LmiBlock, ...]
    objective: Optional[RealArray] = None

    def __post_init__(self) -> None:
        """Check that every block uses the same variables."""
        for block in self.blocks:
            if block.num_vars != self.num_vars:
                msg = (
                    f"block {block.label!r} has {block.num_vars} variables, "
                    f"problem has {self.num_vars}"
                )
                raise DimensionMismatchError(msg)
        if self.objective is not None:
            cost = np.asarray(self.objective, dtype=float).reshape(-1)
            if cost.shape[0] != self.num_vars:
                msg = (
                    f"objective has length {cost.shape[0]}, "
                    f"expected {self.num_vars}"
                )
                raise DimensionMismatchError(msg)
            object.__setattr__(self, "objective", cost)

    @property
    def block_sizes(self) -> list[int]:
        """Return the block dimensions."""
        return [block.size for block in self.blocks]

    def cost(self) -> RealArray:
        """Return the objective vector, zeros for feasibility problems."""
        if self.objective is None:
            return np.zeros(self.num_vars)
        return self.objective

    def min_eigenvalues(self, y: npt.ArrayLike) -> list[float]:
        """Return the smallest eigenvalue of every block at `y`."""
        return [
            float(linalg.eigvalsh(block.evaluate(y), subset_by_index=[0, 0])[0])
            for block in self.blocks
        ]


class SolverOptions(BaseModel):
    """Interior-point settings."""

    tol: float = Field(default=1e-7, gt=0)
    gap_tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=200, ge=1)
    lambda_cap: float = -1.0
    step_fraction: float = Field(default=0.95, gt=0, lt=1)
    verbose: bool = False

    @classmethod
    def from_settings(cls, **overrides: Any) -> SolverOptions:  # noqa: ANN401
        """Return options from the environment, explicit overrides winning."""
        settings = get_settings()
        values = {
            "tol": settings.tol,
            "gap_tol": settings.gap_tol,
            "max_iter": settings.max_iter,
            "lambda_cap": settings.lambda_cap,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class SolveReport(BaseModel):
    """Outcome of one solve."""

    status: SolveStatus
    verdict: Optional[Verdict] = None
    margin: Optional[float] = None
    objective: Optional[float] = None
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    gap: float = 0.0
    block_min_eigenvalues: list[float] = Field(default_factory=list)
    seconds: float = 0.0
    solution: list[float] = Field(default_factory=list, repr=False)


def classify(margin: float, tol: float) -> Verdict:
    """Map a margin lambda* to a verdict."""
    if margin <= -tol:
        return Verdict.FEASIBLE
    if margin >= tol:
        return Verdict.INFEASIBLE
    return Verdict.MARGINAL


def _transpose_index(size: int) -> np.ndarray:
    """Return the permutation of vec(M) that yields vec(M^T)."""
    idx = np.arange(size * size).reshape(size, size)
    return idx.T.reshape(-1)


def _vec_identity(size: int) -> sparse.csc_matrix:
    rows = np.arange(size) * (size + 1)
    return sparse.csc_matrix(
        (np.ones(size), (rows, np.zeros(size, dtype=int))),
        shape=(size * size, 1),
    )


# interior-point core


@dataclass
class _BlockData:
    """Per-block data restricted to the variables the block touches."""

    size: int
    constant: RealArray
    active: np.ndarray
    coeffs: sparse.csc_matrix
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    indptr: np.ndarray

    @classmethod
    def build(
        cls, constant: RealArray, coefficients: sparse.csc_matrix
    ) -> _BlockData:
        coefficients = sparse.csc_matrix(coefficients)
        coefficients.eliminate_zeros()
        coefficients.sort_indices()
        counts = np.diff(coefficients.indptr)
        active = np.flatnonzero(counts)
        coeffs = coefficients[:, active]
        size = constant.shape[0]
        return cls(
            size=size,
            constant=np.asarray(constant, dtype=float),
            active=active,
            coeffs=coeffs,
            rows=coeffs.indices // size,
            cols=coeffs.indices % size,
            values=coeffs.data,
            indptr=coeffs.indptr,
        )

    def linear(self, y: RealArray) -> RealArray:
        if not len(self.active):
            return np.zeros((self.size, self.size))
        return (self.coeffs @ y[self.active]).reshape(self.size, self.size)

    def adjoint(self, mat: RealArray) -> RealArray:
        return self.coeffs.T @ mat.reshape(-1)

    def schur(self, w: RealArray) -> RealArray:
        """Return <F_i, W F_j W> over the active variables."""
        count = len(self.active)
        if not count:
            return np.zeros((0, 0))
        nnz = len(self.values)
        dense_cost = self.size**2 * count * (2 * self.size + count)
        if nnz * nnz <= dense_cost:
            return self._schur_pairs(w)
        return self._schur_dense(w)

    def _schur_pairs(self, w: RealArray) -> RealArray:
        count = len(self.active)
        out = np.zeros((count, count))
        starts = self.indptr[:-1]
        limit = max(1, SCHUR_BUDGET // len(self.values))
        column = 0
        while column < count:
            stop = column + 1
            while (
                stop < count
                and self.indptr[stop + 1] - self.indptr[column] <= limit
            ):
                stop += 1
            lo, hi = self.indptr[column], self.indptr[stop]
            pair = (
                np.outer(self.values[lo:hi], self.values)
                * w[np.ix_(self.rows[lo:hi], self.rows)]
                * w[np.ix_(self.cols[lo:hi], self.cols)]
            )
            by_col = np.add.reduceat(pair, starts, axis=1)
            out[column:stop] = np.add.reduceat(
                by_col, self.indptr[column:stop] - lo, axis=0
            )
            column = stop
        return out

    def _schur_dense(self, w: RealArray) -> RealArray:
        count = len(self.active)
        size = self.size
        out = np.zeros((count, count))
        step = max(1, SCHUR_BUDGET // (size * size))
        for start in range(0, count, step):
            stop = min(count, start + step)
            chunk = self.coeffs[:, start:stop].toarray().reshape(size, size, -1)
            left = np.tensordot(w, chunk, axes=(1, 0))
            scaled = np.tensordot(left, w, axes=(1, 0)).transpose(0, 2, 1)
            out[:, start:stop] = self.coeffs.T @ scaled.reshape(size * size, -1)
        return out


@dataclass
class _Iterate:
    y: RealArray
    x: list[RealArray]
    s: list[RealArray]


@dataclass
class _Result:
    status: SolveStatus
    y: RealArray
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    objective: float


@dataclass
class _Scaling:
    """Nesterov-Todd scaling G of one block.

    G^-1 X G^-T = G^T S G = diag(sigma).
    """

    chol_x: RealArray
    chol_s: RealArray
    g: RealArray
    g_inv: RealArray
    w: RealArray
    sigma: RealArray

    @classmethod
    def nesterov_todd(cls, x: RealArray, s: RealArray) -> _Scaling:
        chol_x = linalg.cholesky(x, lower=True)
        chol_s = linalg.cholesky(s, lower=True)
        _, sigma, vt = linalg.svd(chol_s.T @ chol_x)
        root = np.sqrt(sigma)
        g = (chol_x @ vt.T) / root
        x_inv = linalg.solve_triangular(chol_x, np.eye(len(sigma)), lower=True)
        g_inv = root[:, None] * (vt @ x_inv)
        return cls(chol_x, chol_s, g, g_inv, g @ g.T, sigma)

    def corrector(
        self, target: float, dx: RealArray, ds: RealArray
    ) -> RealArray:
        """Return the scaled Mehrotra target for the centering `target`."""
        d_x = self.g_inv @ dx @ self.g_inv.T
        d_s = self.g.T @ ds @ self.g
        r_mu = 2 * target * np.eye(len(self.sigma)) - 2 * np.diag(self.sigma**2)
        r_mu -= d_x @ d_s + d_s @ d_x
        return r_mu / (self.sigma[:, None] + self.sigma[None, :])


def _inner(a: list[RealArray], b: list[RealArray]) -> float:
    return float(sum(np.vdot(u, v) for u, v in zip(a, b)))


def _max_step(chol: RealArray, direction: RealArray) -> float:
    """Return the largest alpha with L L^T + alpha D >= 0 (inf if unbounded)."""
    half = linalg.solve_triangular(chol, direction, lower=True)
    scaled = linalg.solve_triangular(chol, half.T, lower=True)
    smallest = float(
        linalg.eigvalsh((scaled + scaled.T) / 2, subset_by_index=[0, 0])[0]
    )
    return -1.0 / smallest if smallest < 0 else math.inf


def _factor(matrix: RealArray) -> Callable[[RealArray], RealArray]:
    try:
        factor = linalg.cho_factor(matrix)
    except linalg.LinAlgError:
        return lambda rhs: linalg.lstsq(matrix, rhs)[0]
    return lambda rhs: linalg.cho_solve(factor, rhs)


class _Ipm:
    """Infeasible-start primal-dual path following for `min b.y, S >= 0`."""

    def __init__(
        self,
        constants: Sequence[RealArray],
        coefficients: Sequence[sparse.csc_matrix],
        cost: RealArray,
        opts: SolverOptions,
    ) -> None:
        self.blocks = [
            _BlockData.build(c, a) for c, a in zip(constants, coefficients)
        ]
        self.cost = np.asarray(cost, dtype=float)
        self.opts = opts
        self.m = len(self.cost)
        used = np.zeros(self.m, dtype=bool)
        for block in self.blocks:
            used[block.active] = True
        self.used = np.flatnonzero(used)
        self.dim = sum(block.size for block in self.blocks)
        self.f0_norm = math.sqrt(
            sum(np.sum(b.constant**2) for b in self.blocks)
        )
        self.b_norm = float(np.linalg.norm(self.cost))

    def _start(self) -> _Iterate:
        dim = self.dim
        col_norms = np.zeros(self.m)
        for block in self.blocks:
            col_norms[block.active] += np.asarray(
                block.coeffs.multiply(block.coeffs).sum(axis=0)
            ).reshape(-1)
        col_norms = np.sqrt(col_norms)
        ratio = (1 + np.abs(self.cost)) / (1 + col_norms)
        xi = max(10.0, math.sqrt(dim), float(np.max(ratio, initial=0.0)) * dim)
        eta = max(
            10.0,
            math.sqrt(dim),
            self.f0_norm,
            float(np.max(col_norms, initial=0.0)),
        )
        return _Iterate(
            y=np.zeros(self.m),
            x=[xi * np.eye(b.size) for b in self.blocks],
            s=[eta * np.eye(b.size) for b in self.blocks],
        )

    def _linear(self, y: RealArray) -> list[RealArray]:
        return [block.linear(y) for block in self.blocks]

    def _adjoint(self, mats: list[RealArray]) -> RealArray:
        out = np.zeros(self.m)
        for block, mat in zip(self.blocks, mats):
            out[block.active] += block.adjoint(mat)
        return out

    def _residuals(
        self, it: _Iterate
    ) -> tuple[RealArray, list[RealArray], float, float, float, float]:
        rp = self.cost - self._adjoint(it.x)
        lin = self._linear(it.y)
        rd = [b.constant + l - s for b, l, s in zip(self.blocks, lin, it.s)]
        dual_obj = float(self.cost @ it.y)
        primal_obj = -sum(
            float(np.vdot(b.constant, x)) for b, x in zip(self.blocks, it.x)
        )
        pinf = float(np.linalg.norm(rp)) / (1 + self.b_norm)
        dinf = math.sqrt(sum(float(np.sum(r**2)) for r in rd)) / (
            1 + self.f0_norm
        )
        gap = abs(dual_obj - primal_obj) / (1 + abs(dual_obj) + abs(primal_obj))
        return rp, rd, pinf, dinf, gap, dual_obj

    def _scaling(self, it: _Iterate) -> list[_Scaling] | None:
        try:
            return [_Scaling.nesterov_todd(x, s) for x, s in zip(it.x, it.s)]
        except linalg.LinAlgError:
            return None

    def _schur_solver(
        self, scaling: list[_Scaling]
    ) -> Callable[[RealArray], RealArray]:
        schur = np.zeros((self.m, self.m))
        for block, sc in zip(self.blocks, scaling):
            if len(block.active):
                schur[np.ix_(block.active, block.active)] += block.schur(sc.w)
        return _factor(schur[np.ix_(self.used, self.used)])

    def _direction(
        self,
        h: list[RealArray],
        scaling: list[_Scaling],
        residuals: tuple[RealArray, list[RealArray]],
        solve: Callable[[RealArray], RealArray],
    ) -> tuple[RealArray, list[RealArray], list[RealArray]]:
        """Return (dy, dX, dS) for the scaled complementarity target `h`."""
        rp, rd = residuals
        target = [sc.g @ hk @ sc.g.T for sc, hk in zip(scaling, h)]
        rhs = (
            self._adjoint(
                [t - sc.w @ r @ sc.w for t, sc, r in zip(target, scaling, rd)]
            )
            - rp
        )
        dy = np.zeros(self.m)
        if len(self.used):
            dy[self.used] = solve(rhs[self.used])
        ds = [r + lin for r, lin in zip(rd, self._linear(dy))]
        dx = [t - sc.w @ d @ sc.w for t, sc, d in zip(target, scaling, ds)]
        return dy, [(d + d.T) / 2 for d in dx], ds

    def _steps(
        self, scaling: list[_Scaling], dx: list[RealArray], ds: list[RealArray]
    ) -> tuple[float, float]:
        frac = self.opts.step_fraction
        primal = min(_max_step(sc.chol_x, d) for sc, d in zip(scaling, dx))
        dual = min(_max_step(sc.chol_s, d) for sc, d in zip(scaling, ds))
        return min(1.0, frac * primal), min(1.0, frac * dual)

    def solve(self) -> _Result:
        opts = self.opts
        it = self._start()
        stalls = 0
        for iteration in range(opts.max_iter):
            rp, rd, pinf, dinf, gap, dual_obj = self._residuals(it)
            stats = (pinf, dinf, gap, dual_obj)
            if max(pinf, dinf, gap) <= opts.gap_tol:
                return _Result(SolveStatus.OPTIMAL, it.y, iteration, *stats)
            scaling = self._scaling(it)
            if scaling is None:
                return _Result(SolveStatus.STALLED, it.y, iteration, *stats)
            solve = self._schur_solver(scaling)
            mu = _inner(it.x, it.s) / self.dim

            # predictor
            dy, dx, ds = self._direction(
                [-np.diag(sc.sigma) for sc in scaling], scaling, (rp, rd), solve
            )
            ap, ad = self._steps(scaling, dx, ds)
            x_aff = [x + ap * d for x, d in zip(it.x, dx)]
            s_aff = [s + ad * d for s, d in zip(it.s, ds)]
            affine_mu = max(_inner(x_aff, s_aff), 0.0) / self.dim
            centering = min(1.0, (affine_mu / mu) ** 3)

            # corrector
            h = [
                sc.corrector(centering * mu, dxk, dsk)
                for sc, dxk, dsk in zip(scaling, dx, ds)
            ]
            dy, dx, ds = self._direction(h, scaling, (rp, rd), solve)
            ap, ad = self._steps(scaling, dx, ds)
            advanced = _advance(it, dy, dx, ds, ap, ad)
            if advanced is None:
                return _Result(SolveStatus.STALLED, it.y, iteration, *stats)
            it, ap, ad = advanced
            if opts.verbose:
                log_event(
                    logger,
                    SolverEvent.ITERATION,
                    msg=(
                        f"it={iteration} pinf={pinf:.2e} dinf={dinf:.2e} "
                        f"gap={gap:.2e} mu={mu:.2e}"
                    ),
                )
            stalls = stalls + 1 if max(ap, ad) < STALL_STEP else 0
            if stalls >= STALL_LIMIT:
                return _Result(SolveStatus.STALLED, it.y, iteration, *stats)

        rp, rd, pinf, dinf, gap, dual_obj = self._residuals(it)
        if max(pinf, dinf, gap) <= opts.gap_tol:
            final = (pinf, dinf, gap, dual_obj)
            return _Result(SolveStatus.OPTIMAL, it.y, opts.max_iter, *final)
        log_event(
            logger,
            SolverEvent.ITERATION_LIMIT,
            msg=f"gap={gap:.2e}",
            level=logging.WARNING,
        )
        report = SolveReport(
            status=SolveStatus.STALLED,
            iterations=opts.max_iter,
            primal_residual=pinf,
            dual_residual=dinf,
            gap=gap,
            objective=dual_obj,
            solution=it.y.tolist(),
        )
        msg = f"no convergence in {opts.max_iter} iterations"
        raise NumericalFailure(msg, report)


def _advance(
    it: _Iterate,
    dy: RealArray,
    dx: list[RealArray],
    ds: list[RealArray],
    ap: float,
    ad: float,
) -> tuple[_Iterate, float, float] | None:
    """Take the step, halving it while an iterate loses definiteness."""
    for _ in range(MAX_BACKTRACK):
        x = [xk + ap * d for xk, d in zip(it.x, dx)]
        s = [sk + ad * d for sk, d in zip(it.s, ds)]
        try:
            for mat in (*x, *s):
                linalg.cholesky(mat, lower=True)
        except linalg.LinAlgError:
            ap, ad = ap / 2, ad / 2
            continue
        return _Iterate(y=it.y + ad * dy, x=x, s=s), ap, ad
    return None


def _report(
    problem: LmiProblem,
    result: _Result,
    y: RealArray,
    started: float,
    **fields: Any,  # noqa: ANN401
) -> SolveReport:
    eigenvalues = problem.min_eigenvalues(y) if problem.blocks else []
    return SolveReport(
        status=result.status,
        iterations=result.iterations,
        primal_residual=result.primal_residual,
        dual_residual=result.dual_residual,
        gap=result.gap,
        block_min_eigenvalues=eigenvalues,
        seconds=time.perf_counter() - started,
        solution=y.tolist(),
        **fields,
    )


def _require_optimal(report: SolveReport) -> None:
    """Raise NumericalFailure unless the solve converged.

    A stalled iterate gets no verdict; its margin and residuals ride on the
    error.
    """
    if report.status is SolveStatus.OPTIMAL:
        return
    log_event(
        logger,
        SolverEvent.STALLED,
        msg=f"gap={report.gap:.2e} iterations={report.iterations}",
        level=logging.WARNING,
    )
    msg = (
        f"solver stalled after {report.iterations} iterations "
        f"(gap={report.gap:.2e})"
    )
    raise NumericalFailure(msg, report)


def margin_problem(problem: LmiProblem, cap: float = -1.0) -> LmiProblem:
    """Return the margin form of `problem` as an objective problem.

    lambda I is appended to every block as a last variable, a 1x1 block
    [lambda - cap] bounds it below and the objective is lambda.
    """
    m = problem.num_vars
    blocks = [
        LmiBlock(
            block.constant,
            sparse.hstack(
                [block.coefficients, _vec_identity(block.size)], format="csc"
            ),
            block.label,
        )
        for block in problem.blocks
    ]
    cap_column = sparse.csc_matrix(
        (np.ones(1), (np.zeros(1, dtype=int), np.array([m]))), shape=(1, m + 1)
    )
    blocks.append(LmiBlock(np.array([[-cap]]), cap_column, "margin-cap"))
    cost = np.zeros(m + 1)
    cost[m] = 1.0
    return LmiProblem(num_vars=m + 1, blocks=tuple(blocks), objective=cost)


def solve_feasibility(
    problem: LmiProblem, opts: SolverOptions | None = None
) -> SolveReport:
    """Solve min lambda s.t. B_k(y) + lambda I >= 0, lambda >= cap.

    The verdict is Feasible for lambda* <= -tol, Infeasible for
    lambda* >= tol and Marginal in between.
    """
    opts = opts or SolverOptions.from_settings()
    started = time.perf_counter()
    log_event(
        logger,
        SolverEvent.SOLVE_BEGIN,
        msg=f"{problem.num_vars} variables, blocks {problem.block_sizes}",
        level=logging.DEBUG,
    )
    margin_form = margin_problem(problem, opts.lambda_cap)
    result = _Ipm(
        [b.constant for b in margin_form.blocks],
        [b.coefficients for b in margin_form.blocks],
        margin_form.cost(),
        opts,
    ).solve()
    margin = float(result.y[-1])
    y = result.y[:-1]
    _require_optimal(_report(problem, result, y, started, margin=margin))
    verdict = classify(margin, opts.tol)
    log_event(
        logger,
        SolverEvent.CONVERGED,
        msg=(
            f"margin={margin:.3e} verdict={verdict.name} "
            f"iterations={result.iterations}"
        ),
        level=logging.DEBUG,
    )
    return _report(problem, result, y, started, verdict=verdict, margin=margin)


def recession_problem(problem: LmiProblem) -> LmiProblem | None:
    """Return the homogeneous problem with c.d = -1 solved out.

    Returns None when the cost vector is zero.
    """
    cost = problem.cost()
    if not np.any(cost):
        return None
    pivot = int(np.argmax(np.abs(cost)))
    keep = np.delete(np.arange(problem.num_vars), pivot)
    ratios = sparse.csc_matrix(cost[keep] / cost[pivot]).reshape(1, -1)
    blocks = []
    for block in problem.blocks:
        coeffs = block.coefficients
        pivot_col = coeffs[:, pivot]
        reduced = sparse.csc_matrix(coeffs[:, keep] - pivot_col @ ratios)
        pivot_matrix = pivot_col.toarray().reshape(block.size, block.size)
        constant = -pivot_matrix / cost[pivot]
        blocks.append(LmiBlock(constant, reduced, block.label))
    return LmiProblem(num_vars=len(keep), blocks=tuple(blocks))


def solve_objective(
    problem: LmiProblem,
    cost: npt.ArrayLike | None = None,
    opts: SolverOptions | None = None,
) -> SolveReport:
    """Solve min c.y s.t. B_k(y) >= 0.

    A strictly feasible direction d of the recession cone with c.d < 0 is
    searched first with a margin solve; if one exists the report says
    UNBOUNDED and the objective is -inf.
    """
    opts = opts or SolverOptions.from_settings()
    started = time.perf_counter()
    if cost is not None:
        problem = LmiProblem(
            problem.num_vars, problem.blocks, np.asarray(cost, dtype=float)
        )
    c = problem.cost()
    used = np.zeros(problem.num_vars, dtype=bool)
    for block in problem.blocks:
        used[np.flatnonzero(np.diff(block.coefficients.indptr))] = True
    free_direction = bool(np.any(c[~used]))
    recession = recession_problem(problem)
    if free_direction or (
        recession is not None
        and solve_feasibility(recession, opts).verdict is Verdict.FEASIBLE
    ):
        log_event(
            logger, SolverEvent.UNBOUNDED, msg="objective unbounded below"
        )
        return SolveReport(
            status=SolveStatus.UNBOUNDED,
            objective=-math.inf,
            seconds=time.perf_counter() - started,
        )
    result = _Ipm(
        [b.constant for b in problem.blocks],
        [b.coefficients for b in problem.blocks],
        c,
        opts,
    ).solve()
    report = _report(
        problem, result, result.y, started, objective=result.objective
    )
    _require_optimal(report)
    return report
