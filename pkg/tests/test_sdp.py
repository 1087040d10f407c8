"""Test the block-diagonal LMI solver."""

import math

import numpy as np
import pytest

from dpskit.config import get_settings
from dpskit.enums import SolveStatus, Verdict
from dpskit.exceptions import (
    DimensionMismatchError,
    NotHermitianError,
    NumericalFailure,
)
from dpskit.sdp import (
    LmiBlock,
    LmiProblem,
    SolverOptions,
    classify,
    margin_problem,
    solve_feasibility,
    solve_objective,
)

pytestmark = pytest.mark.unit

E01 = [[0.0, 1.0], [1.0, 0.0]]


def _problem(*blocks: LmiBlock) -> LmiProblem:
    return LmiProblem(num_vars=blocks[0].num_vars, blocks=blocks)


def test_constant_indefinite_block_is_infeasible() -> None:
    """diag(1, -1) with no variables has lambda* = 1."""
    block = LmiBlock.from_dense(np.diag([1.0, -1.0]), [])
    report = solve_feasibility(_problem(block))
    assert report.status is SolveStatus.OPTIMAL
    assert report.margin == pytest.approx(1.0, abs=1e-6)
    assert report.verdict is Verdict.INFEASIBLE


def test_strictly_feasible_block_hits_the_cap() -> None:
    """A positive definite constant drives lambda down to the cap."""
    block = LmiBlock.from_dense(np.diag([2.0, 3.0]), [])
    report = solve_feasibility(_problem(block), SolverOptions(lambda_cap=-1.0))
    assert report.margin == pytest.approx(-1.0, abs=1e-6)
    assert report.verdict is Verdict.FEASIBLE


def test_feasibility_with_a_variable() -> None:
    """[[1, y], [y, 1]] and [[y - 2]] cannot both be PSD."""
    first = LmiBlock.from_dense(np.eye(2), [E01])
    second = LmiBlock.from_dense([[-2.0]], [[[1.0]]])
    report = solve_feasibility(_problem(first, second))
    # best compromise: y = 1.5 gives eigenvalues -0.5 on both blocks
    assert report.margin == pytest.approx(0.5, abs=1e-5)
    assert report.verdict is Verdict.INFEASIBLE
    assert len(report.block_min_eigenvalues) == 2


def test_boundary_problem_is_marginal() -> None:
    """diag(y, -y) is PSD only at y = 0, so lambda* = 0."""
    block = LmiBlock.from_dense(np.zeros((2, 2)), [np.diag([1.0, -1.0])])
    report = solve_feasibility(_problem(block))
    assert report.margin == pytest.approx(0.0, abs=1e-6)
    assert report.verdict is Verdict.MARGINAL


def test_objective_problem() -> None:
    """min y s.t. [[1, y], [y, 1]] >= 0 is -1."""
    block = LmiBlock.from_dense(np.eye(2), [E01])
    report = solve_objective(_problem(block), [1.0])
    assert report.status is SolveStatus.OPTIMAL
    assert report.objective == pytest.approx(-1.0, abs=1e-6)
    assert report.solution[0] == pytest.approx(-1.0, abs=1e-5)


def test_objective_unbounded() -> None:
    """min -y s.t. [[y]] >= 0 has no lower bound."""
    block = LmiBlock.from_dense(np.zeros((1, 1)), [[[1.0]]])
    report = solve_objective(_problem(block), [-1.0])
    assert report.status is SolveStatus.UNBOUNDED
    assert report.objective == -math.inf


def test_objective_unbounded_in_unused_variable() -> None:
    """A variable outside every block with nonzero cost is unbounded."""
    block = LmiBlock.from_dense(np.eye(1), [[[0.0]]])
    report = solve_objective(_problem(block), [1.0])
    assert report.status is SolveStatus.UNBOUNDED


def test_iteration_limit_raises() -> None:
    """One iteration is never enough; the best iterate rides on the error."""
    block = LmiBlock.from_dense(np.eye(2), [E01])
    with pytest.raises(NumericalFailure) as exc:
        solve_objective(_problem(block), [1.0], SolverOptions(max_iter=1))
    assert exc.value.report is not None
    assert exc.value.report.status is SolveStatus.STALLED


def test_stalled_solve_raises_without_a_verdict(monkeypatch) -> None:
    """Tiny steps end the solve; the unconverged iterate gets no verdict."""
    monkeypatch.setattr("dpskit.sdp.STALL_STEP", 10.0)
    first = LmiBlock.from_dense(np.eye(2), [E01])
    second = LmiBlock.from_dense([[-2.0]], [[[1.0]]])
    with pytest.raises(NumericalFailure) as exc:
        solve_feasibility(_problem(first, second))
    report = exc.value.report
    assert report is not None
    assert report.status is SolveStatus.STALLED
    assert report.verdict is None
    assert report.margin is not None
    assert report.gap > SolverOptions().gap_tol


def test_stalled_objective_solve_raises(monkeypatch) -> None:
    """Objective solves refuse a stalled iterate too."""
    monkeypatch.setattr("dpskit.sdp.STALL_STEP", 10.0)
    block = LmiBlock.from_dense(np.eye(2), [E01])
    with pytest.raises(NumericalFailure):
        solve_objective(_problem(block), [1.0])


def _random_symmetric(rng: np.random.Generator, size: int) -> np.ndarray:
    g = rng.standard_normal((size, size))
    return (g + g.T) / 2


def _box(num_vars: int, radius: float) -> LmiBlock:
    """Keep every y_i within [-radius, radius]."""
    matrices = []
    for i in range(num_vars):
        f = np.zeros((2 * num_vars, 2 * num_vars))
        f[i, i], f[num_vars + i, num_vars + i] = 1.0, -1.0
        matrices.append(f)
    return LmiBlock.from_dense(radius * np.eye(2 * num_vars), matrices, "box")


def _random_lmi(
    rng: np.random.Generator, *, strictly_feasible: bool
) -> list[tuple[np.ndarray, list[np.ndarray]]]:
    """Two blocks in three variables, optionally built around a point."""
    y0 = rng.uniform(-1.0, 1.0, 3)
    blocks = []
    for size in (3, 4):
        fs = [_random_symmetric(rng, size) for _ in range(3)]
        f0 = _random_symmetric(rng, size)
        if strictly_feasible:
            g = rng.standard_normal((size, size))
            f0 = g @ g.T + np.eye(size) - sum(
                y * f for y, f in zip(y0, fs, strict=True)
            )
        blocks.append((f0, fs))
    return blocks


def _lmi(blocks: list, rotations: list | None = None) -> LmiProblem:
    dense = []
    for k, (f0, fs) in enumerate(blocks):
        q = np.eye(len(f0)) if rotations is None else rotations[k]
        dense.append(
            LmiBlock.from_dense(q @ f0 @ q.T, [q @ f @ q.T for f in fs])
        )
    return _problem(*dense, _box(3, 10.0))


def test_strictly_feasible_lmis_are_feasible(rng) -> None:
    """Blocks built positive definite around a point are accepted."""
    for _ in range(50):
        blocks = _random_lmi(rng, strictly_feasible=True)
        report = solve_feasibility(_lmi(blocks))
        assert report.verdict is Verdict.FEASIBLE
        assert report.margin < -0.5


def test_margin_is_invariant_under_rotations(rng) -> None:
    """Conjugating each block by an orthogonal matrix keeps lambda*."""
    for _ in range(10):
        blocks = _random_lmi(rng, strictly_feasible=False)
        rotations = [
            np.linalg.qr(rng.standard_normal((len(f0), len(f0))))[0]
            for f0, _ in blocks
        ]
        plain = solve_feasibility(_lmi(blocks))
        rotated = solve_feasibility(_lmi(blocks, rotations))
        assert plain.verdict is rotated.verdict
        assert plain.margin == pytest.approx(rotated.margin, abs=1e-6)


def test_margin_problem_shape() -> None:
    """The margin form adds lambda and a cap block."""
    block = LmiBlock.from_dense(np.eye(2), [E01])
    margin = margin_problem(_problem(block), cap=-2.0)
    assert margin.num_vars == 2
    assert margin.block_sizes == [2, 1]
    assert margin.cost().tolist() == [0.0, 1.0]
    assert margin.blocks[1].evaluate([0.0, -2.0])[0, 0] == pytest.approx(0.0)


def test_block_validation() -> None:
    """Asymmetric data and mismatched variable counts are refused."""
    with pytest.raises(NotHermitianError):
        LmiBlock.from_dense([[1.0, 2.0], [0.0, 1.0]], [])
    with pytest.raises(DimensionMismatchError):
        LmiBlock.from_dense(np.zeros((0, 0)), [])
    one = LmiBlock.from_dense(np.eye(1), [[[1.0]]])
    two = LmiBlock.from_dense(np.eye(1), [[[1.0]], [[2.0]]])
    with pytest.raises(DimensionMismatchError):
        LmiProblem(num_vars=1, blocks=(one, two))


def test_classify() -> None:
    """The Marginal band is (-tol, tol)."""
    assert classify(-1e-3, 1e-7) is Verdict.FEASIBLE
    assert classify(1e-3, 1e-7) is Verdict.INFEASIBLE
    assert classify(5e-8, 1e-7) is Verdict.MARGINAL


def test_options_from_settings(monkeypatch) -> None:
    """Environment settings feed the defaults, explicit overrides win."""
    monkeypatch.setenv("DPSKIT_TOL", "1e-5")
    monkeypatch.setenv("DPSKIT_MAX_ITER", "77")
    get_settings.cache_clear()
    opts = SolverOptions.from_settings(max_iter=None, gap_tol=1e-6)
    assert opts.tol == 1e-5
    assert opts.max_iter == 77
    assert opts.gap_tol == 1e-6
