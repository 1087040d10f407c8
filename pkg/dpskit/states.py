"""Structured bipartite states: LDOI triples, projections and witnesses.

States live on C^n (x) C^n with the basis vector e_i (x) e_j at row i*n + j.
An LDOI state is zero outside three patterns and is stored as the triple
(X, Y, Z) with X_ij = rho[ij, ij], Y_ij = rho[ii, jj] and Z_ij = rho[ij, ji].
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from pydantic import BaseModel, computed_field

from dpskit.enums import Regime
from dpskit.exceptions import (
    DiagonalMismatchError,
    DimensionMismatchError,
    NotHermitianError,
    NotLDOIError,
    ParameterError,
    RegisterError,
)
from dpskit.hermitian import HermitianMatrix, is_psd
from dpskit.util import HERMITIAN_ATOL, PATTERN_ATOL

if TYPE_CHECKING:  # pragma: no cover
    import numpy.typing as npt

    from dpskit.types import ComplexArray, RealArray


def _as_square(values: npt.ArrayLike, dtype: type, name: str) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:  # noqa: PLR2004
        msg = f"{name} must be square, got shape {array.shape}"
        raise DimensionMismatchError(msg)
    return array


def _as_hermitian(values: npt.ArrayLike, name: str) -> ComplexArray:
    array = _as_square(values, np.complex128, name)
    if np.max(np.abs(array - array.conj().T), initial=0.0) > HERMITIAN_ATOL:
        msg = f"{name} is not Hermitian"
        raise NotHermitianError(msg)
    return (array + array.conj().T) / 2


def _as_real(values: npt.ArrayLike, name: str) -> RealArray:
    array = _as_square(values, np.complex128, name)
    if np.max(np.abs(array.imag), initial=0.0) > HERMITIAN_ATOL:
        msg = f"{name} must be real"
        raise DimensionMismatchError(msg)
    return np.ascontiguousarray(array.real)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TripleXYZ:
    """The three n x n matrices holding every entry of an LDOI state.

    `diag(X) == diag(Y) == diag(Z)` is checked to PATTERN_ATOL and then made
    exact by copying the diagonal of X into Y and Z.
    """

    X: RealArray
    Y: ComplexArray
    Z: ComplexArray

    def __post_init__(self) -> None:
        """Validate shapes, Hermiticity and the shared diagonal."""
        x = _as_real(self.X, "X")
        y = _as_hermitian(self.Y, "Y")
        z = _as_hermitian(self.Z, "Z")
        if not x.shape == y.shape == z.shape:
            msg = f"triple shapes differ: {x.shape}, {y.shape}, {z.shape}"
            raise DimensionMismatchError(msg)
        diag = np.diag(x)
        if max(
            np.max(np.abs(np.diag(y) - diag)), np.max(np.abs(np.diag(z) - diag))
        ) > PATTERN_ATOL:
            msg = "diag(X), diag(Y) and diag(Z) must coincide"
            raise DiagonalMismatchError(msg)
        np.fill_diagonal(y, diag)
        np.fill_diagonal(z, diag)
        object.__setattr__(self, "X", _frozen(x))
        object.__setattr__(self, "Y", _frozen(y))
        object.__setattr__(self, "Z", _frozen(z))

    @property
    def n(self) -> int:
        """Return the local dimension."""
        return int(self.X.shape[0])

    @property
    def is_real(self) -> bool:
        """Return True if Y and Z have no imaginary part."""
        return not (np.any(self.Y.imag) or np.any(self.Z.imag))

    def scaled(self, factor: float) -> TripleXYZ:
        """Return the triple of `factor` times the state."""
        return TripleXYZ(self.X * factor, self.Y * factor, self.Z * factor)

    def allclose(self, other: TripleXYZ, atol: float = 1e-10) -> bool:
        """Return True if all three matrices agree within `atol`."""
        return self.n == other.n and all(
            np.allclose(mine, theirs, atol=atol, rtol=0)
            for mine, theirs in (
                (self.X, other.X),
                (self.Y, other.Y),
                (self.Z, other.Z),
            )
        )

    def __repr__(self) -> str:
        """Return a short description."""
        return f"TripleXYZ(n={self.n})"


@dataclass(frozen=True, eq=False)
class WitnessPair:
    """A pair (S, T), S real and T Hermitian, defining a CLDUI witness."""

    S: RealArray
    T: ComplexArray

    def __post_init__(self) -> None:
        """Validate shapes."""
        s = _as_real(self.S, "S")
        t = _as_hermitian(self.T, "T")
        if s.shape != t.shape:
            msg = f"S and T shapes differ: {s.shape}, {t.shape}"
            raise DimensionMismatchError(msg)
        object.__setattr__(self, "S", _frozen(s))
        object.__setattr__(self, "T", _frozen(t))

    @property
    def n(self) -> int:
        """Return the local dimension."""
        return int(self.S.shape[0])


class PcpReport(BaseModel):
    """Necessary conditions for a triple to lie in TCP_n.

    Any False flag certifies non-membership.
    """

    x_nonnegative: bool
    y_psd: bool
    z_psd: bool
    y_bounded: bool
    z_bounded: bool

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        """Return True if every check holds."""
        return all(
            (
                self.x_nonnegative,
                self.y_psd,
                self.z_psd,
                self.y_bounded,
                self.z_bounded,
            )
        )


def bipartite_dim(rho: HermitianMatrix) -> int:
    """Return n for a state with registers [n, n]."""
    regs = rho.registers
    if len(regs) != 2 or regs[0] != regs[1]:  # noqa: PLR2004
        msg = f"expected registers [n, n], got {list(regs)}"
        raise RegisterError(msg)
    return regs[0]


def _index_grids(n: int) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return i, j


def support_mask(n: int, regime: Regime) -> np.ndarray:
    """Return the boolean n^2 x n^2 support pattern of `regime`.

    CLDUI keeps rho[ij, ij] and rho[ii, jj], LDUI keeps rho[ij, ij] and
    rho[ij, ji], LDOI keeps the union and GENERIC keeps everything.
    """
    if regime is Regime.GENERIC:
        return np.ones((n * n, n * n), dtype=bool)
    mask = np.zeros((n * n, n * n), dtype=bool)
    i, j = _index_grids(n)
    mask[i * n + j, i * n + j] = True
    if regime in (Regime.CLDUI, Regime.LDOI):
        mask[i * n + i, j * n + j] = True
    if regime in (Regime.LDUI, Regime.LDOI):
        mask[i * n + j, j * n + i] = True
    return mask


def rho_from_triple(
    t: TripleXYZ, *, normalize: bool = False
) -> HermitianMatrix:
    """Return the LDOI state of `t`, registers [n, n]."""
    n = t.n
    rho = np.zeros((n * n, n * n), dtype=np.complex128)
    i, j = _index_grids(n)
    rho[i * n + i, j * n + j] = t.Y
    rho[i * n + j, j * n + i] = t.Z
    rho[i * n + j, i * n + j] = t.X
    state = HermitianMatrix(rho, (n, n))
    return state.normalized() if normalize else state


def rho_from_pair(
    x: npt.ArrayLike, y: npt.ArrayLike, *, normalize: bool = False
) -> HermitianMatrix:
    """Return the CLDUI state of the pair (X, Y), i.e. Z = Diag(diag X)."""
    x_arr = _as_real(x, "X")
    triple = TripleXYZ(x_arr, y, np.diag(np.diag(x_arr)))
    return rho_from_triple(triple, normalize=normalize)


def triple_from_rho(
    rho: HermitianMatrix, atol: float = PATTERN_ATOL
) -> TripleXYZ:
    """Read the triple off an LDOI state.

    Raises NotLDOIError if an entry outside the LDOI pattern exceeds `atol`.
    """
    n = bipartite_dim(rho)
    off = np.abs(rho.entries[~support_mask(n, Regime.LDOI)])
    if off.size and float(off.max()) > atol:
        msg = f"entry of size {float(off.max()):.3g} outside the LDOI pattern"
        raise NotLDOIError(msg)
    i, j = _index_grids(n)
    x = rho.entries[i * n + j, i * n + j]
    if np.max(np.abs(x.imag)) > atol:
        msg = "X entries must be real"
        raise NotLDOIError(msg)
    y = rho.entries[i * n + i, j * n + j]
    z = rho.entries[i * n + j, j * n + i]
    return TripleXYZ(x.real, y, z)


def project(rho: HermitianMatrix, regime: Regime) -> HermitianMatrix:
    """Project `rho` onto the states invariant under `regime`.

    The projection is exact support masking.
    """
    n = bipartite_dim(rho)
    return HermitianMatrix(
        np.where(support_mask(n, regime), rho.entries, 0), rho.registers
    )


def _group_phases(n: int, regime: Regime) -> np.ndarray:
    """Return the diagonal unitaries of the finite averaging group."""
    if regime is Regime.LDOI:
        return np.array(
            list(itertools.product((1.0, -1.0), repeat=n)), dtype=np.complex128
        )
    omega = np.exp(2j * np.pi / 3)
    roots = (1.0, omega, omega**2)
    return np.array(
        [(*phases, 1.0) for phases in itertools.product(roots, repeat=n - 1)],
        dtype=np.complex128,
    )


def group_average(rho: HermitianMatrix, regime: Regime) -> HermitianMatrix:
    """Average `rho` over a finite group whose average equals the projection.

    CLDUI and LDUI use the phases {1, w, w^2} (w a cube root of unity) on the
    first n - 1 diagonal positions; LDOI uses all 2^n sign matrices. Slow by
    construction, for cross-checking `project`.
    """
    n = bipartite_dim(rho)
    if regime is Regime.GENERIC:
        return rho
    weights = np.zeros((n * n, n * n), dtype=np.complex128)
    phases = _group_phases(n, regime)
    for u in phases:
        second = u if regime is Regime.LDUI else u.conj()
        v = np.kron(u, second)
        weights += np.outer(v, v.conj())
    weights /= len(phases)
    return HermitianMatrix(rho.entries * weights, rho.registers)


def swap_index(n: int) -> np.ndarray:
    """Return the permutation i*n + j -> j*n + i of the swap operator."""
    i, j = _index_grids(n)
    return (j * n + i).reshape(-1)


def is_bose_symmetric(rho: HermitianMatrix, atol: float = PATTERN_ATOL) -> bool:
    """Return True if rho F = rho, F the swap of the two registers."""
    n = bipartite_dim(rho)
    swapped = rho.entries[:, swap_index(n)]
    return bool(np.allclose(swapped, rho.entries, atol=atol, rtol=0))


def witness_matrix(w: WitnessPair) -> HermitianMatrix:
    """Return the CLDUI matrix M_{S,T}.

    M[ij, ij] = S_ij (plus T_ii on the diagonal) and M[ii, jj] = T_ij, so that
    <M, rho_(X,Y)> = <S, X> + <T, Y> with <A, B> = Re Tr(A* B).
    """
    n = w.n
    m = np.zeros((n * n, n * n), dtype=np.complex128)
    i, j = _index_grids(n)
    m[i * n + i, j * n + j] = w.T
    m[i * n + j, i * n + j] += w.S
    return HermitianMatrix(m, (n, n))


def inner(
    a: HermitianMatrix | np.ndarray, b: HermitianMatrix | np.ndarray
) -> float:
    """Return Re Tr(a* b)."""
    a_arr = a.entries if isinstance(a, HermitianMatrix) else np.asarray(a)
    b_arr = b.entries if isinstance(b, HermitianMatrix) else np.asarray(b)
    return float(np.real(np.vdot(a_arr, b_arr)))


def pcp_necessary_checks(t: TripleXYZ, atol: float = PATTERN_ATOL) -> PcpReport:
    """Evaluate the cheap necessary conditions for membership in TCP_n."""
    bound = t.X * t.X.T
    off = ~np.eye(t.n, dtype=bool)
    return PcpReport(
        x_nonnegative=bool(np.all(t.X >= -atol)),
        y_psd=is_psd(HermitianMatrix(t.Y)),
        z_psd=is_psd(HermitianMatrix(t.Z)),
        y_bounded=bool(np.all((np.abs(t.Y) ** 2 - bound)[off] <= atol)),
        z_bounded=bool(np.all((np.abs(t.Z) ** 2 - bound)[off] <= atol)),
    )


def tcp_atom(x: npt.ArrayLike, y: npt.ArrayLike) -> TripleXYZ:
    """Return the triple of the LDOI projection of xx* (x) yy*."""
    xv = np.asarray(x, dtype=np.complex128)
    yv = np.asarray(y, dtype=np.complex128)
    xy = xv * yv
    xyc = xv * yv.conj()
    return TripleXYZ(
        np.outer(np.abs(xv) ** 2, np.abs(yv) ** 2),
        np.outer(xy, xy.conj()),
        np.outer(xyc, xyc.conj()),
    )


def family_rho_aap(
    a: float, a_prime: float, *, normalize: bool = False
) -> HermitianMatrix:
    """Return the CLDUI state rho_{a,a'} on C^3 (x) C^3.

    X has unit diagonal, a on the cyclic superdiagonal (12, 23, 31) and a' on
    the rest; Y is the all-ones matrix.
    """
    if a < 0 or a_prime < 0:
        msg = f"rho_aap needs a, a' >= 0, got {a}, {a_prime}"
        raise ParameterError(msg)
    x = np.array(
        [[1.0, a, a_prime], [a_prime, 1.0, a], [a, a_prime, 1.0]], dtype=float
    )
    return rho_from_pair(x, np.ones((3, 3)), normalize=normalize)


def circulant(n: int, off: float) -> RealArray:
    """Return the n x n matrix with unit diagonal and `off` elsewhere."""
    return (1.0 - off) * np.eye(n) + off * np.ones((n, n))


def family_rho_ab(
    a: float, b: float, n: int = 3, *, normalize: bool = False
) -> HermitianMatrix:
    """Return rho(a, b) = rho_(X(a), Y(b), X(a)) with X, Y circulant.

    For n = 3 it is PSD iff a >= 0 and -1/2 <= b <= 1, and separable iff
    -1/2 <= b and |b| <= a <= 1.
    """
    if n < 2:  # noqa: PLR2004
        msg = f"rho_ab needs n >= 2, got {n}"
        raise ParameterError(msg)
    x = circulant(n, a)
    triple = TripleXYZ(x, circulant(n, b), x)
    return rho_from_triple(triple, normalize=normalize)


def dicke_vector(n: int, i: int, j: int) -> ComplexArray:
    """Return the Dicke vector D_ij in C^n (x) C^n (0-based symbols)."""
    if not (0 <= i < n and 0 <= j < n):
        msg = f"symbols {i}, {j} out of range for n={n}"
        raise ParameterError(msg)
    vec = np.zeros(n * n, dtype=np.complex128)
    if i == j:
        vec[i * n + i] = 1.0
    else:
        vec[i * n + j] = vec[j * n + i] = 1 / np.sqrt(2)
    return vec


def dicke(
    n: int, i: int, j: int, *, normalize: bool = False
) -> HermitianMatrix:
    """Return the projector D_ij D_ij* (0-based symbols), registers [n, n]."""
    vec = dicke_vector(n, i, j)
    state = HermitianMatrix(np.outer(vec, vec.conj()), (n, n))
    return state.normalized() if normalize else state


def product_state(x: npt.ArrayLike, y: npt.ArrayLike) -> HermitianMatrix:
    """Return xx* (x) yy*."""
    xv = np.asarray(x, dtype=np.complex128)
    yv = np.asarray(y, dtype=np.complex128)
    vec = np.kron(xv, yv)
    return HermitianMatrix(np.outer(vec, vec.conj()), (len(xv), len(yv)))
