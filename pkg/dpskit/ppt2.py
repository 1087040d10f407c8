"""PPT-squared experiment on LDOI maps.

An LDOI triple (X, Y, Z) is the Choi matrix of the map

    Phi(M) = Diag(X diag(M)) + Y0 o M + Z0 o M^T,

Y0 and Z0 being Y and Z with zeroed diagonals. Composing two such maps gives
another LDOI map whose triple is computed by `compose`. The experiment builds
PPT factors that are entangled, composes them pairwise and asks the DPS
hierarchy for a separability certificate of every composition.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from dpskit.client import cached_membership
from dpskit.config import get_settings
from dpskit.enums import ExperimentEvent, Regime, Verdict
from dpskit.exceptions import (
    DimensionMismatchError,
    NumericalFailure,
    ParameterError,
)
from dpskit.hermitian import HermitianMatrix, basis_outer
from dpskit.sdp import SolverOptions
from dpskit.states import TripleXYZ, project, rho_from_triple
from dpskit.util import format_real, log_event

if TYPE_CHECKING:  # pragma: no cover
    import numpy.typing as npt

    from dpskit.types import ComplexArray

logging.basicConfig()
logger = logging.getLogger(__name__)

FACTOR_DIM = 4
CSV_COLUMNS = (
    "a",
    "i",
    "j",
    "t",
    "regime",
    "verdict",
    "margin",
    "seconds",
    "b",
)
MAX_RESAMPLES = 100


class ExperimentConfig(BaseModel):
    """Settings of one experiment run."""

    a_values: list[float] = Field(default_factory=lambda: [2.0, 3.0, 4.0])
    num_z: int = Field(default=5, ge=0)
    seed: int = 7
    max_t: int = Field(default=3, ge=1)
    regime: Regime = Regime.LDOI
    mixed: bool = False
    workers: Optional[int] = Field(default=None, ge=1)
    tol: Optional[float] = Field(default=None, gt=0)
    gap_tol: Optional[float] = Field(default=None, gt=0)
    max_iter: Optional[int] = Field(default=None, ge=1)

    @field_validator("a_values")
    @classmethod
    def _check_a(cls, values: list[float]) -> list[float]:
        if any(a <= 1 for a in values):
            msg = "every a must exceed 1"
            raise ValueError(msg)
        return values

    @field_validator("regime")
    @classmethod
    def _check_regime(cls, regime: Regime) -> Regime:
        if regime is Regime.LDUI:
            msg = "the experiment runs in the generic, ldoi or cldui regime"
            raise ValueError(msg)
        return regime

    def solver_options(self) -> SolverOptions:
        """Return solver options with this config's overrides applied."""
        return SolverOptions.from_settings(
            tol=self.tol, gap_tol=self.gap_tol, max_iter=self.max_iter
        )


# Choi maps


def _off_diagonal(m: ComplexArray) -> ComplexArray:
    return m - np.diag(np.diag(m))


def apply_choi_map(t: TripleXYZ, m: npt.ArrayLike) -> ComplexArray:
    """Apply the LDOI map of `t` to the n x n matrix `m`."""
    mat = np.asarray(m, dtype=np.complex128)
    if mat.shape != (t.n, t.n):
        msg = f"expected a {t.n} x {t.n} matrix, got {mat.shape}"
        raise DimensionMismatchError(msg)
    return (
        np.diag(t.X @ np.diag(mat))
        + _off_diagonal(t.Y) * mat
        + _off_diagonal(t.Z) * mat.T
    )


def choi_matrix(
    phi: Callable[[ComplexArray], ComplexArray], n: int
) -> HermitianMatrix:
    """Return sum_rs phi(e_r e_s*) (x) e_r e_s*, registers [n, n]."""
    choi = np.zeros((n * n, n * n), dtype=np.complex128)
    for r, s in itertools.product(range(n), repeat=2):
        unit = basis_outer(n, r, s)
        choi += np.kron(phi(unit), unit)
    return HermitianMatrix(choi, (n, n))


def compose(t1: TripleXYZ, t2: TripleXYZ) -> TripleXYZ:
    """Return the triple of the map Phi_t1 after Phi_t2.

    The diagonals of Y and Z are reset to diag(X1 X2).
    """
    if t1.n != t2.n:
        msg = f"cannot compose triples of sizes {t1.n} and {t2.n}"
        raise DimensionMismatchError(msg)
    x = t1.X @ t2.X
    diag = np.diag(np.diag(x))
    y = t1.Y * t2.Y + t1.Z * t2.Z.T
    z = t1.Y * t2.Z + t1.Z * t2.Y.T
    return TripleXYZ(x, _off_diagonal(y) + diag, _off_diagonal(z) + diag)


# test states


def x_matrix(a: float) -> np.ndarray:
    """Return the 4 x 4 X_a extending the 3 x 3 X of rho_{a, 1/a}."""
    inv = 1.0 / a
    return np.array(
        [
            [1.0, a, inv, 1.0],
            [inv, 1.0, a, 1.0],
            [a, inv, 1.0, 1.0],
            [1.0, 1.0, 1.0, 1.0],
        ]
    )


def random_gram(rng: np.random.Generator, n: int = FACTOR_DIM) -> np.ndarray:
    """Return the Gram matrix of n random unit vectors in R^n."""
    vectors = rng.standard_normal((n, n))
    vectors /= np.linalg.norm(vectors, axis=0)
    gram = vectors.T @ vectors
    np.fill_diagonal(gram, 1.0)
    return gram


@dataclass(frozen=True)
class Factor:
    """One PPT factor (X_a, J, Z[index])."""

    a: float
    index: int
    triple: TripleXYZ


@dataclass(frozen=True)
class FactorSet:
    """The generated factors and how many Z draws were rejected."""

    factors: tuple[Factor, ...]
    resampled: int

    def __len__(self) -> int:
        """Return the number of factors."""
        return len(self.factors)


def _is_ppt(triple: TripleXYZ, opts: SolverOptions) -> bool:
    """Return True unless the level-one test rejects the factor.

    A solve that fails counts as a rejection.
    """
    rho = rho_from_triple(triple, normalize=True)
    try:
        report = cached_membership(rho, 1, regime=Regime.LDOI, opts=opts)
    except NumericalFailure as exc:
        log_event(
            logger,
            ExperimentEvent.FACTOR_RESAMPLED,
            msg=str(exc),
            level=logging.WARNING,
        )
        return False
    return report.verdict is not Verdict.INFEASIBLE


def gen_test_states(cfg: ExperimentConfig) -> FactorSet:
    """Generate the factors (X_a, J, Z[i]) of the experiment.

    Every Z is checked against all a; a Z that makes some factor fail the
    level-one test (Infeasible, Marginal is accepted) is drawn again.
    """
    rng = np.random.default_rng(cfg.seed)
    opts = cfg.solver_options()
    ones = np.ones((FACTOR_DIM, FACTOR_DIM))
    zs: list[np.ndarray] = []
    resampled = 0
    while len(zs) < cfg.num_z:
        z = random_gram(rng)
        candidates = (TripleXYZ(x_matrix(a), ones, z) for a in cfg.a_values)
        if all(_is_ppt(triple, opts) for triple in candidates):
            zs.append(z)
            continue
        resampled += 1
        log_event(
            logger,
            ExperimentEvent.FACTOR_RESAMPLED,
            msg=f"draw {len(zs)}",
            level=logging.DEBUG,
        )
        if resampled > MAX_RESAMPLES:
            msg = f"gave up after {resampled} rejected Z draws"
            raise ParameterError(msg)
    factors = tuple(
        Factor(a, i, TripleXYZ(x_matrix(a), ones, z))
        for a in cfg.a_values
        for i, z in enumerate(zs, start=1)
    )
    return FactorSet(factors, resampled)


def composed_pairs(
    factors: FactorSet, *, mixed: bool = False
) -> list[tuple[Factor, Factor]]:
    """Return the factor pairs to compose.

    Same-a pairs use i <= j since the factors commute; mixed pairs take
    every (i, j) for a < b.
    """
    pairs = [
        (f, g)
        for f, g in itertools.combinations_with_replacement(factors.factors, 2)
        if f.a == g.a and f.index <= g.index
    ]
    if mixed:
        pairs.extend(
            (f, g)
            for f, g in itertools.product(factors.factors, repeat=2)
            if f.a < g.a
        )
    return pairs


# the experiment


class ExperimentRow(BaseModel):
    """One solve of the experiment."""

    a: float
    b: float
    i: int
    j: int
    t: int
    regime: Regime
    verdict: Optional[Verdict]
    margin: Optional[float]
    seconds: float

    @property
    def sort_key(self) -> tuple[float, float, int, int, int]:
        """Return the deterministic output order."""
        return (self.a, self.b, self.i, self.j, self.t)

    def csv_fields(self) -> list[str]:
        """Return the CSV cells in CSV_COLUMNS order."""
        return [
            format_real(self.a),
            str(self.i),
            str(self.j),
            str(self.t),
            self.regime.value,
            self.verdict.name.lower() if self.verdict is not None else "error",
            format_real(self.margin) if self.margin is not None else "",
            format_real(self.seconds),
            format_real(self.b),
        ]


class ExperimentReport(BaseModel):
    """All rows of one run, sorted by (a, b, i, j, t)."""

    config: ExperimentConfig
    factors: int
    resampled: int
    rows: list[ExperimentRow]

    def to_csv(self) -> str:
        """Return the rows as CSV text with a header."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(row.csv_fields() for row in self.rows)
        return buffer.getvalue()

    def write_csv(self, path: str | Path) -> Path:
        """Write the CSV to `path` and return the path."""
        target = Path(path)
        target.write_text(self.to_csv(), encoding="utf-8")
        return target


def _solve_row(
    pair: tuple[Factor, Factor],
    t: int,
    cfg: ExperimentConfig,
    opts: SolverOptions,
) -> ExperimentRow:
    first, second = pair
    rho = rho_from_triple(compose(first.triple, second.triple), normalize=True)
    if cfg.regime is Regime.CLDUI:
        rho = project(rho, Regime.CLDUI)
    fields = {
        "a": first.a,
        "b": second.a,
        "i": first.index,
        "j": second.index,
        "t": t,
        "regime": cfg.regime,
    }
    started = time.perf_counter()
    try:
        report = cached_membership(rho, t, regime=cfg.regime, opts=opts)
    except NumericalFailure as exc:
        log_event(
            logger,
            ExperimentEvent.ROW_FAILED,
            msg=str(exc),
            key=str(fields),
            level=logging.WARNING,
        )
        best = exc.report
        return ExperimentRow(
            **fields,
            verdict=None,
            margin=best.margin if best is not None else None,
            seconds=time.perf_counter() - started,
        )
    log_event(
        logger,
        ExperimentEvent.ROW_DONE,
        msg=f"{report.verdict.name if report.verdict is not None else '?'}",
        key=str(fields),
        level=logging.DEBUG,
    )
    return ExperimentRow(
        **fields,
        verdict=report.verdict,
        margin=report.margin,
        seconds=report.seconds,
    )


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Solve every composed pair at every level t = 1..cfg.max_t.

    Rows are independent and run in a worker pool; the output order does not
    depend on completion order.
    """
    log_event(
        logger,
        ExperimentEvent.RUN_BEGIN,
        msg=f"regime={cfg.regime.value} max_t={cfg.max_t}",
    )
    factors = gen_test_states(cfg)
    opts = cfg.solver_options()
    jobs = [
        (pair, t)
        for pair in composed_pairs(factors, mixed=cfg.mixed)
        for t in range(1, cfg.max_t + 1)
    ]
    def solve_job(job: tuple[tuple[Factor, Factor], int]) -> ExperimentRow:
        return _solve_row(job[0], job[1], cfg, opts)

    workers = cfg.workers or get_settings().workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(solve_job, jobs))
    else:
        rows = [solve_job(job) for job in jobs]
    rows.sort(key=lambda row: row.sort_key)
    log_event(logger, ExperimentEvent.RUN_DONE, msg=f"{len(rows)} rows")
    return ExperimentReport(
        config=cfg,
        factors=len(factors),
        resampled=factors.resampled,
        rows=rows,
    )


class SummaryRow(BaseModel):
    """Mean solve time and verdict counts of one (regime, t)."""

    regime: Regime
    t: int
    count: int
    mean_seconds: float
    feasible: int
    infeasible: int
    marginal: int
    errors: int


def summary(report: ExperimentReport) -> list[SummaryRow]:
    """Aggregate a report by (regime, t)."""
    groups: dict[tuple[Regime, int], list[ExperimentRow]] = {}
    for row in report.rows:
        groups.setdefault((row.regime, row.t), []).append(row)
    return [
        SummaryRow(
            regime=regime,
            t=t,
            count=len(rows),
            mean_seconds=float(np.mean([row.seconds for row in rows])),
            feasible=sum(row.verdict is Verdict.FEASIBLE for row in rows),
            infeasible=sum(row.verdict is Verdict.INFEASIBLE for row in rows),
            marginal=sum(row.verdict is Verdict.MARGINAL for row in rows),
            errors=sum(row.verdict is None for row in rows),
        )
        for (regime, t), rows in sorted(
            groups.items(), key=lambda item: (item[0][0].value, item[0][1])
        )
    ]
