"""Dense Hermitian matrices with tensor-register bookkeeping.

Partial traces and partial transposes act on registers, the factors of a
tensor product space C^{d_1} x ... x C^{d_k}. A matrix carries the list of its
register sizes; operations that need a factorization fail fast when the list
is missing instead of guessing one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import TYPE_CHECKING

import numpy as np
from scipy import linalg

from dpskit.exceptions import (
    DimensionMismatchError,
    NotHermitianError,
    RegisterError,
)
from dpskit.util import HERMITIAN_ATOL, PSD_RTOL

if TYPE_CHECKING:  # pragma: no cover
    from collections.abc import Iterable, Sequence

    import numpy.typing as npt

    from dpskit.types import ComplexArray, RealArray


def _square(entries: npt.ArrayLike, dtype: type) -> np.ndarray:
    array = np.array(entries, dtype=dtype)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:  # noqa: PLR2004
        msg = f"expected a square matrix, got shape {array.shape}"
        raise DimensionMismatchError(msg)
    if array.shape[0] == 0:
        msg = "matrix dimension must be positive"
        raise DimensionMismatchError(msg)
    return array


def _check_registers(registers: Sequence[int], dim: int) -> tuple[int, ...]:
    regs = tuple(int(r) for r in registers)
    if any(r < 1 for r in regs):
        msg = f"register sizes must be positive, got {regs}"
        raise RegisterError(msg)
    if regs and reduce(lambda a, b: a * b, regs, 1) != dim:
        msg = f"registers {regs} do not factor dimension {dim}"
        raise RegisterError(msg)
    return regs


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """A dense complex Hermitian matrix.

    The constructor symmetrizes, M <- (M + M*)/2, and rejects input whose
    anti-Hermitian part exceeds 1e-8 in max-norm.
    """

    entries: ComplexArray
    registers: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        """Validate, symmetrize and freeze the entries."""
        array = _square(self.entries, np.complex128)
        deviation = float(np.max(np.abs(array - array.conj().T)))
        if deviation > HERMITIAN_ATOL:
            msg = f"matrix is not Hermitian (deviation {deviation:.3g})"
            raise NotHermitianError(msg)
        array = (array + array.conj().T) / 2
        array.setflags(write=False)
        object.__setattr__(self, "entries", array)
        object.__setattr__(
            self, "registers", _check_registers(self.registers, len(array))
        )

    @property
    def dim(self) -> int:
        """Return the matrix dimension."""
        return int(self.entries.shape[0])

    @property
    def is_real(self) -> bool:
        """Return True if every entry has zero imaginary part."""
        return not np.any(self.entries.imag)

    @property
    def trace(self) -> float:
        """Return the (real) trace."""
        return float(np.trace(self.entries).real)

    def scaled(self, factor: float) -> HermitianMatrix:
        """Return `factor` times this matrix, same registers."""
        return HermitianMatrix(self.entries * factor, self.registers)

    def normalized(self) -> HermitianMatrix:
        """Return the matrix divided by its trace."""
        trace = self.trace
        if trace == 0:
            msg = "cannot trace-normalize a matrix with zero trace"
            raise DimensionMismatchError(msg)
        return self.scaled(1.0 / trace)

    def with_registers(self, registers: Sequence[int]) -> HermitianMatrix:
        """Return the same entries under new register metadata."""
        return HermitianMatrix(self.entries, tuple(registers))

    def allclose(self, other: HermitianMatrix, atol: float = 1e-10) -> bool:
        """Return True if both matrices agree entrywise within `atol`."""
        return self.dim == other.dim and bool(
            np.allclose(self.entries, other.entries, atol=atol, rtol=0)
        )

    def __repr__(self) -> str:
        """Return a short description."""
        return f"HermitianMatrix(dim={self.dim}, registers={self.registers})"


@dataclass(frozen=True, eq=False)
class RealSymmetric:
    """A dense real symmetric matrix."""

    entries: RealArray

    def __post_init__(self) -> None:
        """Validate, symmetrize and freeze the entries."""
        array = _square(self.entries, np.float64)
        deviation = float(np.max(np.abs(array - array.T)))
        if deviation > HERMITIAN_ATOL:
            msg = f"matrix is not symmetric (deviation {deviation:.3g})"
            raise NotHermitianError(msg)
        array = (array + array.T) / 2
        array.setflags(write=False)
        object.__setattr__(self, "entries", array)

    @property
    def dim(self) -> int:
        """Return the matrix dimension."""
        return int(self.entries.shape[0])

    def __repr__(self) -> str:
        """Return a short description."""
        return f"RealSymmetric(dim={self.dim})"


def _require_registers(m: HermitianMatrix) -> tuple[int, ...]:
    if not m.registers:
        msg = "operation needs register metadata, none was given"
        raise RegisterError(msg)
    return m.registers


def _register_set(indices: Iterable[int], count: int) -> list[int]:
    chosen = sorted(set(indices))
    for index in chosen:
        if not 0 <= index < count:
            msg = f"register index {index} out of range 0..{count - 1}"
            raise RegisterError(msg)
    return chosen


def kron(a: HermitianMatrix, b: HermitianMatrix) -> HermitianMatrix:
    """Return a (x) b with concatenated register metadata.

    A side without registers counts as a single register of its dimension.
    """
    regs_a = a.registers or (a.dim,)
    regs_b = b.registers or (b.dim,)
    return HermitianMatrix(np.kron(a.entries, b.entries), regs_a + regs_b)


def partial_trace(
    m: HermitianMatrix, traced_registers: Iterable[int]
) -> HermitianMatrix:
    """Trace out the given registers (0-based) and keep the rest in order."""
    regs = _require_registers(m)
    traced = set(_register_set(traced_registers, len(regs)))
    count = len(regs)
    tensor = m.entries.reshape(regs + regs)
    rows = list(range(count))
    cols = [count + k if k not in traced else k for k in range(count)]
    kept = [k for k in range(count) if k not in traced]
    out = [rows[k] for k in kept] + [cols[k] for k in kept]
    reduced = np.einsum(tensor, rows + cols, out)
    kept_regs = tuple(regs[k] for k in kept)
    dim = int(np.prod(kept_regs)) if kept_regs else 1
    return HermitianMatrix(reduced.reshape(dim, dim), kept_regs)


def partial_transpose(
    m: HermitianMatrix, transposed_registers: Iterable[int]
) -> HermitianMatrix:
    """Transpose the given registers (0-based), leave the others alone."""
    regs = _require_registers(m)
    chosen = _register_set(transposed_registers, len(regs))
    count = len(regs)
    axes = list(range(2 * count))
    for k in chosen:
        axes[k], axes[count + k] = axes[count + k], axes[k]
    tensor = m.entries.reshape(regs + regs).transpose(axes)
    return HermitianMatrix(tensor.reshape(m.dim, m.dim), regs)


def permute_registers(
    m: HermitianMatrix, order: Sequence[int]
) -> HermitianMatrix:
    """Reorder the registers: register `order[k]` becomes register k."""
    regs = _require_registers(m)
    if sorted(order) != list(range(len(regs))):
        msg = f"{list(order)} is not a permutation of the registers"
        raise RegisterError(msg)
    count = len(regs)
    axes = list(order) + [count + k for k in order]
    tensor = m.entries.reshape(regs + regs).transpose(axes)
    new_regs = tuple(regs[k] for k in order)
    return HermitianMatrix(tensor.reshape(m.dim, m.dim), new_regs)


def real_embedding(m: HermitianMatrix) -> RealSymmetric:
    """Return [[Re M, -Im M], [Im M, Re M]].

    The embedding is PSD iff M is, with every eigenvalue of M doubled.
    """
    re, im = m.entries.real, m.entries.imag
    return RealSymmetric(np.block([[re, -im], [im, re]]))


def min_eigenvalue(m: HermitianMatrix | RealSymmetric) -> float:
    """Return the smallest eigenvalue, computed on the real embedding."""
    real = m if isinstance(m, RealSymmetric) else real_embedding(m)
    return float(linalg.eigvalsh(real.entries, subset_by_index=[0, 0])[0])


def psd_threshold(m: HermitianMatrix | RealSymmetric) -> float:
    """Return the (negative) eigenvalue floor used for PSD acceptance."""
    return -PSD_RTOL * (1.0 + float(np.linalg.norm(m.entries)))


def is_psd(m: HermitianMatrix | RealSymmetric) -> bool:
    """Return True if `m` passes the repo-wide PSD threshold."""
    return min_eigenvalue(m) >= psd_threshold(m)


def kernel_basis(m: HermitianMatrix, rtol: float = 1e-9) -> ComplexArray:
    """Return an orthonormal basis (columns) of the numerical kernel of `m`.

    Eigenvalues with absolute value at most rtol * max(1, ||m||_2) count as
    zero. Real matrices get a real basis.
    """
    values, vectors = linalg.eigh(m.entries.real if m.is_real else m.entries)
    scale = max(1.0, float(np.max(np.abs(values))))
    mask = np.abs(values) <= rtol * scale
    return np.ascontiguousarray(vectors[:, mask])


def basis_outer(n: int, i: int, j: int) -> ComplexArray:
    """Return the matrix unit e_i e_j^T of size n."""
    unit = np.zeros((n, n), dtype=np.complex128)
    unit[i, j] = 1.0
    return unit
