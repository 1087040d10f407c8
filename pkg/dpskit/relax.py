"""DPS and Bose-symmetric DPS membership problems as block-diagonal LMIs.

A model holds the moment variables L(x^p xbar^q) of a certificate, the PSD
blocks they fill and the partial-trace equalities that tie them to the state.
The equalities are eliminated when the model is built, so lowering a model
gives a pure LMI in the unknowns left free.

Kernel vectors of the state (and of its partial transpose) are forced into
the kernel of every certificate block. With face reduction on, the builders
add these as equalities and `to_lmi` compresses every block onto the
orthogonal complement, which keeps members on a face of the PSD cone
strictly inside the reduced cone.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property, partial
from typing import TYPE_CHECKING, Any, Callable, Optional

import numpy as np
from pydantic import BaseModel, computed_field
from scipy import linalg, sparse

from dpskit.config import get_settings
from dpskit.elimination import AffineSolution, LinearEquation, solve_equalities
from dpskit.enums import (
    Formalism,
    Hierarchy,
    Regime,
    SolverEvent,
    SolveStatus,
    Verdict,
)
from dpskit.exceptions import (
    DimensionMismatchError,
    InconsistentModelError,
    NotBoseSymmetricError,
    ParameterError,
    SupportMismatchError,
)
from dpskit.hermitian import (
    HermitianMatrix,
    kernel_basis,
    min_eigenvalue,
    partial_trace,
    partial_transpose,
    permute_registers,
    psd_threshold,
)
from dpskit.patterns import (
    Block,
    BlockLayout,
    add,
    alpha,
    bose_block_layout,
    bose_depths,
    bose_tensor_block_layout,
    canonical,
    exponents,
    is_real_key,
    moment_block_layout,
    multinomial,
    sequence_of,
    tensor_block_layout,
    unit,
)
from dpskit.sdp import (
    LmiBlock,
    LmiProblem,
    SolveReport,
    SolverOptions,
    solve_feasibility,
)
from dpskit.states import bipartite_dim, is_bose_symmetric, project
from dpskit.util import PATTERN_ATOL, log_event

if TYPE_CHECKING:  # pragma: no cover
    from collections.abc import Iterable, Sequence

    import numpy.typing as npt

    from dpskit.types import (
        BoseLabel,
        ComplexArray,
        ExponentVec,
        IntArray,
        MomentKey,
        OrbitVec,
        RealArray,
    )

logging.basicConfig()
logger = logging.getLogger(__name__)

# a partial-trace target: constant plus a combination of extra unknowns
Target = tuple[complex, dict[int, complex]]
# kernel vectors of one block depth, keyed by block label
KernelVectors = list[dict[Any, complex]]

TRACE_RTOL = 1e-6
IMAG_RTOL = 1e-13
# blocks up to this size are compressed with one Kronecker product
KRON_LIMIT = 48


@dataclass(frozen=True)
class MomentVar:
    """One canonical moment L(x^p xbar^q)."""

    key: MomentKey

    @property
    def real(self) -> bool:
        """Return True if the moment is real by conjugation symmetry."""
        return is_real_key(self.key)


@dataclass(frozen=True, eq=False)
class ModelBlock:
    """One PSD block: a sub-block of the layout at `shift`.

    `var_index[a, b]` is the variable of entry (a, b) and `conj[a, b]` says
    whether the entry holds its conjugate. `kernel` has orthonormal columns
    that every certificate must annihilate.
    """

    shift: int
    key: OrbitVec
    labels: tuple[Any, ...]
    var_index: IntArray
    conj: np.ndarray
    kernel: ComplexArray
    tensor_size: int

    @property
    def size(self) -> int:
        """Return the number of labels."""
        return len(self.labels)

    @property
    def reduced_size(self) -> int:
        """Return the size after compressing away the kernel."""
        return self.size - int(self.kernel.shape[1])

    @property
    def label(self) -> str:
        """Return a printable block name."""
        return f"shift={self.shift} key={list(self.key)}"


@dataclass(frozen=True, eq=False)
class DpsModel:
    """An assembled membership problem, immutable once built."""

    n: int
    t: int
    regime: Regime
    hierarchy: Hierarchy
    formalism: Formalism
    variables: tuple[MomentVar, ...]
    blocks: tuple[ModelBlock, ...]
    re_index: IntArray
    im_index: IntArray
    extra: tuple[str, ...]
    equations: tuple[LinearEquation, ...]
    solution: AffineSolution
    rho: Optional[HermitianMatrix]
    scale: float
    real: bool
    face_reduction: bool

    @cached_property
    def index(self) -> dict[MomentKey, int]:
        """Return the variable number of every canonical key."""
        return {var.key: k for k, var in enumerate(self.variables)}

    @property
    def extra_offset(self) -> int:
        """Return the unknown number of the first extra unknown."""
        return self.solution.num_unknowns - len(self.extra)

    @property
    def num_unknowns(self) -> int:
        """Return the number of real unknowns before elimination."""
        return self.solution.num_unknowns

    @property
    def block_sizes(self) -> list[int]:
        """Return the block sizes before face reduction."""
        return [block.size for block in self.blocks]

    @property
    def raw_sizes(self) -> Counter[int]:
        """Return the multiset of block sizes before orbit collapse."""
        return Counter(block.tensor_size for block in self.blocks)

    def unknown_name(self, k: int) -> str:
        """Return a readable name of unknown `k`."""
        if k >= self.extra_offset:
            return self.extra[k - self.extra_offset]
        matches = np.flatnonzero(self.re_index == k)
        if matches.size:
            return f"re{list(self.variables[matches[0]].key)}"
        var = int(np.flatnonzero(self.im_index == k)[0])
        return f"im{list(self.variables[var].key)}"


class _Unknowns:
    """Numbering of the real unknowns: Re parts, Im parts, then extras."""

    def __init__(
        self, keys: Sequence[MomentKey], *, real: bool, extra: int
    ) -> None:
        count = len(keys)
        self.index = {key: k for k, key in enumerate(keys)}
        self.re = np.arange(count, dtype=np.int64)
        self.im = np.full(count, -1, dtype=np.int64)
        cursor = count
        if not real:
            for k, key in enumerate(keys):
                if not is_real_key(key):
                    self.im[k] = cursor
                    cursor += 1
        self.extra_offset = cursor
        self.total = cursor + extra


class _ModelBuilder:
    """Collects blocks and equations of one model."""

    def __init__(self, n: int, t: int) -> None:
        self.n = n
        self.t = t
        self.keys: dict[MomentKey, int] = {}
        self.blocks: list[ModelBlock] = []

    def variable(self, key: MomentKey) -> int:
        found = self.keys.get(key)
        if found is None:
            found = self.keys[key] = len(self.keys)
        return found

    def add_block(
        self,
        shift: int,
        key: OrbitVec,
        labels: Sequence[Any],
        entry: Callable[[Any, Any], tuple[MomentKey, bool]],
        tensor_size: int | None = None,
    ) -> None:
        size = len(labels)
        var_index = np.empty((size, size), dtype=np.int64)
        conj = np.zeros((size, size), dtype=bool)
        for a, row in enumerate(labels):
            for b, col in enumerate(labels):
                moment, flipped = entry(row, col)
                var_index[a, b] = self.variable(moment)
                conj[a, b] = flipped
        self.blocks.append(
            ModelBlock(
                shift=shift,
                key=key,
                labels=tuple(labels),
                var_index=var_index,
                conj=conj,
                kernel=np.zeros((size, 0)),
                tensor_size=size if tensor_size is None else tensor_size,
            )
        )

    def add_layout(self, layout: BlockLayout[Any]) -> None:
        """Add every block of a moment layout."""
        for block in layout.blocks:
            self.add_block(layout.shift, block.key, block.labels, layout.entry)

    def add_tensor_block(
        self,
        layout: BlockLayout[Any],
        block: Block[Any],
        to_label: Callable[[Any], Any],
    ) -> None:
        """Add a tensor clique, collapsed to one row per moment label."""
        rows = block.labels
        labels = [to_label(row) for row in rows]
        entries = [[layout.entry(r, c) for c in rows] for r in rows]
        first: dict[Any, int] = {}
        for a, label in enumerate(labels):
            first.setdefault(label, a)
        for a, label in enumerate(labels):
            rep = first[label]
            if entries[a] != entries[rep]:
                msg = (
                    f"tensor rows {rows[a]} and {rows[rep]} share a label "
                    "but differ"
                )
                raise DimensionMismatchError(msg)
        ordered = sorted(first)
        reps = {label: first[label] for label in ordered}
        self.add_block(
            layout.shift,
            block.key,
            ordered,
            lambda r, c: entries[reps[r]][reps[c]],
            tensor_size=len(rows),
        )


def _normalize(rho: HermitianMatrix) -> tuple[HermitianMatrix, float]:
    trace = rho.trace
    if trace <= PATTERN_ATOL:
        return rho, 1.0
    return rho.scaled(1.0 / trace), trace


def _check_support(rho: HermitianMatrix, regime: Regime) -> None:
    if regime is Regime.GENERIC:
        return
    off = np.abs(rho.entries - project(rho, regime).entries)
    limit = PATTERN_ATOL * max(1.0, float(np.max(np.abs(rho.entries))))
    if float(off.max()) > limit:
        msg = (
            f"state has entries of size {float(off.max()):.3g} outside the "
            f"{regime.value} pattern"
        )
        raise SupportMismatchError(msg)


# partial-trace equalities


def _trace_equations(
    unknowns: _Unknowns,
    terms: dict[MomentKey, tuple[float, bool]],
    target: Target,
    pivot: MomentKey,
    label: str,
    *,
    diagonal: bool,
) -> list[LinearEquation]:
    """Split sum_k mult_k L_k = target into real and imaginary equalities.

    `terms` maps canonical keys to (multiplicity, conjugated).
    """
    const, extras = target
    registered = {key: v for key, v in terms.items() if key in unknowns.index}
    equations = []
    parts = [("re", np.real)]
    if not diagonal:
        parts.append(("im", np.imag))
    for part, take in parts:
        coefficients: dict[int, float] = {}
        for key, (mult, flipped) in registered.items():
            var = unknowns.index[key]
            if part == "re":
                coefficients[int(unknowns.re[var])] = mult
            elif unknowns.im[var] >= 0:
                coefficients[int(unknowns.im[var])] = -mult if flipped else mult
        for extra, coef in extras.items():
            value = float(take(coef))
            if value:
                coefficients[unknowns.extra_offset + extra] = -value
        rhs = float(take(const))
        if not coefficients:
            if not registered and abs(rhs) > PATTERN_ATOL:
                msg = (
                    f"moments of {label} are forced to zero but the state "
                    f"entry is {rhs:.3g}"
                )
                raise SupportMismatchError(msg)
            if abs(rhs) <= PATTERN_ATOL:
                continue
        preferred = None
        if pivot in unknowns.index:
            var = unknowns.index[pivot]
            index = unknowns.re if part == "re" else unknowns.im
            candidate = int(index[var])
            preferred = candidate if candidate >= 0 else None
        equations.append(
            LinearEquation(coefficients, rhs, preferred, f"{part}{label}")
        )
    return equations


def _dps_trace_terms(
    n: int, t: int, i: int, k: int, j: int, l: int, formalism: Formalism
) -> tuple[dict[MomentKey, tuple[float, bool]], MomentKey]:
    """Return the moments summing to rho[ik, jl] and the preferred pivot key."""
    terms: dict[MomentKey, tuple[float, bool]] = {}
    if formalism is Formalism.MOMENT:
        for mu in exponents(n, t - 1):
            p = unit(n, i) + add(unit(n, k), mu)
            q = unit(n, j) + add(unit(n, l), mu)
            key, flipped = canonical(p, q)
            terms[key] = (float(multinomial(mu)), flipped)
    else:
        for seq in itertools.product(range(n), repeat=t - 1):
            p = unit(n, i) + alpha((k, *seq), n)
            q = unit(n, j) + alpha((l, *seq), n)
            key, flipped = canonical(p, q)
            mult = terms.get(key, (0.0, flipped))[0]
            terms[key] = (mult + 1.0, flipped)
    star = tuple(t - 1 if m == 0 else 0 for m in range(n))
    pivot, _ = canonical(
        unit(n, i) + add(unit(n, k), star), unit(n, j) + add(unit(n, l), star)
    )
    return terms, pivot


def _bose_trace_terms(
    n: int, t: int, i: int, k: int, j: int, l: int, formalism: Formalism
) -> tuple[dict[MomentKey, tuple[float, bool]], MomentKey]:
    terms: dict[MomentKey, tuple[float, bool]] = {}
    if formalism is Formalism.MOMENT:
        for mu in exponents(n, t - 1):
            key, flipped = canonical(
                add(unit(n, i), unit(n, k), mu), add(unit(n, j), unit(n, l), mu)
            )
            terms[key] = (float(multinomial(mu)), flipped)
    else:
        for seq in itertools.product(range(n), repeat=t - 1):
            key, flipped = canonical(
                alpha((i, k, *seq), n), alpha((j, l, *seq), n)
            )
            mult = terms.get(key, (0.0, flipped))[0]
            terms[key] = (mult + 1.0, flipped)
    star = tuple(t - 1 if m == 0 else 0 for m in range(n))
    pivot, _ = canonical(
        add(unit(n, i), unit(n, k), star), add(unit(n, j), unit(n, l), star)
    )
    return terms, pivot


def _state_targets(rho: HermitianMatrix) -> Callable[[int, int], Target]:
    entries = rho.entries
    return lambda row, col: (complex(entries[row, col]), {})


# forced kernels


def _kernels(
    rho: HermitianMatrix, tol: float
) -> tuple[ComplexArray, ComplexArray]:
    """Return kernel bases of rho and of its partial transpose."""
    kernel_pt = kernel_basis(partial_transpose(rho, [1]), tol)
    return kernel_basis(rho, tol), kernel_pt


def _face_vectors(
    rho: HermitianMatrix,
    tol: float,
    vectors_at: Callable[[int, ComplexArray, ComplexArray], KernelVectors],
    depth_of: Callable[[int], int] | None = None,
) -> Callable[[int], KernelVectors]:
    """Bind the kernels of `rho` to a per-depth kernel vector builder.

    `depth_of` maps a block shift to the depth `vectors_at` expects.
    """
    kernel, kernel_pt = _kernels(rho, tol)

    def vectors(shift: int) -> KernelVectors:
        depth = shift if depth_of is None else depth_of(shift)
        return vectors_at(depth, kernel, kernel_pt)

    return vectors


def _dps_kernel_vectors(
    n: int, t: int, s: int, kernel: ComplexArray, kernel_pt: ComplexArray
) -> list[dict[Any, complex]]:
    """Return kernel vectors of the depth-s moment block, keyed by label."""
    vectors: list[dict[Any, complex]] = []
    if s < t:
        for w in kernel.T:
            for gamma in exponents(n, t - s - 1):
                for gamma_p in exponents(n, s):
                    vec: dict[Any, complex] = {}
                    for i0, k in itertools.product(range(n), repeat=2):
                        label = (i0, add(unit(n, k), gamma), gamma_p)
                        vec[label] = vec.get(label, 0) + w[i0 * n + k]
                    vectors.append(vec)
    if s >= 1:
        for w in kernel_pt.T:
            for gamma in exponents(n, t - s):
                for gamma_p in exponents(n, s - 1):
                    vec = {}
                    for i0, k in itertools.product(range(n), repeat=2):
                        label = (i0, gamma, add(unit(n, k), gamma_p))
                        vec[label] = vec.get(label, 0) + w[i0 * n + k]
                    vectors.append(vec)
    return vectors


def _bose_kernel_vectors(
    n: int, t: int, s: int, kernel: ComplexArray, kernel_pt: ComplexArray
) -> list[dict[Any, complex]]:
    """Return kernel vectors of the depth-s Bose block, keyed by label.

    Two untransposed registers carry ker rho, one of each kind carries
    ker rho^T_B and two transposed registers carry the conjugate of ker rho.
    """
    free = t + 1 - s
    vectors: list[dict[Any, complex]] = []

    def spread(w: ComplexArray, low: int, high: int, place: Callable) -> None:
        for gamma in exponents(n, high):
            for gamma_p in exponents(n, low):
                vec: dict[Any, complex] = {}
                for a, b in itertools.product(range(n), repeat=2):
                    label = place(a, b, gamma, gamma_p)
                    vec[label] = vec.get(label, 0) + w[a * n + b]
                vectors.append(vec)

    def untransposed(
        a: int, b: int, g: ExponentVec, gp: ExponentVec
    ) -> BoseLabel:
        return add(unit(n, a), unit(n, b), g), gp

    def mixed(a: int, b: int, g: ExponentVec, gp: ExponentVec) -> BoseLabel:
        return add(unit(n, a), g), add(unit(n, b), gp)

    def transposed(
        a: int, b: int, g: ExponentVec, gp: ExponentVec
    ) -> BoseLabel:
        return g, add(unit(n, a), unit(n, b), gp)

    if free >= 2:  # noqa: PLR2004
        for w in kernel.T:
            spread(w, s, free - 2, untransposed)
    if s >= 1 and free >= 1:
        for w in kernel_pt.T:
            spread(w, s - 1, free - 1, mixed)
    if s >= 2:  # noqa: PLR2004
        for w in kernel.T:
            spread(w.conj(), s - 2, free, transposed)
    return vectors


def _restrict(
    block: ModelBlock, vectors: Iterable[dict[Any, complex]]
) -> ComplexArray:
    """Return an orthonormal basis of the vectors restricted to `block`."""
    position = {label: a for a, label in enumerate(block.labels)}
    columns = []
    for vec in vectors:
        column = np.zeros(block.size, dtype=np.complex128)
        for label, value in vec.items():
            if label in position:
                column[position[label]] += value
        if np.linalg.norm(column) > PATTERN_ATOL:
            columns.append(column)
    if not columns:
        return np.zeros((block.size, 0))
    basis = linalg.orth(np.column_stack(columns))
    return basis.real if not np.any(basis.imag) else basis


def _kernel_equations(
    block: ModelBlock, unknowns: _Unknowns
) -> list[LinearEquation]:
    """Return the real equalities M u = 0 for the kernel columns u."""
    equations = []
    flat_var = block.var_index
    sign = np.where(block.conj, -1.0, 1.0)
    for u in block.kernel.T:
        for a in range(block.size):
            re_part: dict[int, float] = {}
            im_part: dict[int, float] = {}
            for b in range(block.size):
                if u[b] == 0:
                    continue
                var = int(flat_var[a, b])
                u_re, u_im = float(np.real(u[b])), float(np.imag(u[b]))
                re_unknown = int(unknowns.re[var])
                re_part[re_unknown] = re_part.get(re_unknown, 0.0) + u_re
                im_part[re_unknown] = im_part.get(re_unknown, 0.0) + u_im
                im_unknown = int(unknowns.im[var])
                if im_unknown >= 0:
                    # i * sign * u_b
                    sg = sign[a, b]
                    re_old = re_part.get(im_unknown, 0.0)
                    im_old = im_part.get(im_unknown, 0.0)
                    re_part[im_unknown] = re_old - sg * u_im
                    im_part[im_unknown] = im_old + sg * u_re
            for part, coefficients in (("re", re_part), ("im", im_part)):
                kept = {k: c for k, c in coefficients.items() if c != 0.0}
                if kept:
                    label = f"{part}-kernel {block.label} row {a}"
                    equations.append(LinearEquation(kept, 0.0, None, label))
    return equations


# assembly


def _finish(
    builder: _ModelBuilder,
    *,
    regime: Regime,
    hierarchy: Hierarchy,
    formalism: Formalism,
    pairs: Iterable[tuple[int, int, int, int]],
    terms_of: Callable[
        ..., tuple[dict[MomentKey, tuple[float, bool]], MomentKey]
    ],
    target_of: Callable[[int, int], Target],
    kernel_vectors: Callable[[int], KernelVectors] | None,
    rho: HermitianMatrix | None,
    scale: float,
    real: bool,
    extra: Sequence[str] = (),
) -> DpsModel:
    n, t = builder.n, builder.t
    keys = list(builder.keys)
    unknowns = _Unknowns(keys, real=real, extra=len(extra))
    equations: list[LinearEquation] = []
    for i, k, j, l in pairs:
        terms, pivot = terms_of(n, t, i, k, j, l, formalism)
        row, col = i * n + k, j * n + l
        equations.extend(
            _trace_equations(
                unknowns,
                terms,
                target_of(row, col),
                pivot,
                f"[{row},{col}]",
                diagonal=row == col,
            )
        )
    blocks = builder.blocks
    if kernel_vectors is not None:
        by_shift: dict[int, list[dict[Any, complex]]] = {}
        reduced = []
        for block in blocks:
            if block.shift not in by_shift:
                by_shift[block.shift] = kernel_vectors(block.shift)
            kernel = _restrict(block, by_shift[block.shift])
            reduced.append(
                ModelBlock(
                    block.shift,
                    block.key,
                    block.labels,
                    block.var_index,
                    block.conj,
                    kernel,
                    block.tensor_size,
                )
            )
        blocks = reduced
        for block in blocks:
            equations.extend(_kernel_equations(block, unknowns))
    solution = solve_equalities(unknowns.total, equations)
    model = DpsModel(
        n=n,
        t=t,
        regime=regime,
        hierarchy=hierarchy,
        formalism=formalism,
        variables=tuple(MomentVar(key) for key in keys),
        blocks=tuple(blocks),
        re_index=unknowns.re,
        im_index=unknowns.im,
        extra=tuple(extra),
        equations=tuple(equations),
        solution=solution,
        rho=rho,
        scale=scale,
        real=real,
        face_reduction=kernel_vectors is not None,
    )
    logger.debug(
        "built %s %s model: %d variables, %d free, blocks %s",
        hierarchy.value,
        formalism.value,
        len(keys),
        solution.num_free,
        model.block_sizes,
    )
    return model


def _resolve_flags(
    rho: HermitianMatrix, real: bool | None, face_reduction: bool | None
) -> tuple[bool, bool, float]:
    settings = get_settings()
    use_real = rho.is_real if real is None else real
    use_faces = (
        settings.face_reduction if face_reduction is None else face_reduction
    )
    return use_real, use_faces, settings.kernel_tol


def _check_level(t: int) -> None:
    if t < 1:
        msg = f"level t must be at least 1, got {t}"
        raise ParameterError(msg)


def _dps_pairs(n: int) -> Iterable[tuple[int, int, int, int]]:
    for i, k, j, l in itertools.product(range(n), repeat=4):
        if i * n + k <= j * n + l:
            yield i, k, j, l


def _bose_pairs(n: int) -> Iterable[tuple[int, int, int, int]]:
    for i, k, j, l in itertools.product(range(n), repeat=4):
        if i <= k and j <= l and i * n + k <= j * n + l:
            yield i, k, j, l


def build_dps_moment(
    rho: HermitianMatrix,
    t: int,
    regime: Regime = Regime.GENERIC,
    *,
    real: bool | None = None,
    face_reduction: bool | None = None,
) -> DpsModel:
    """Build the moment-form DPS^(t) model of `rho` under `regime`.

    The state is trace-normalized first and must have the support pattern of
    the regime.
    """
    _check_level(t)
    n = bipartite_dim(rho)
    _check_support(rho, regime)
    normalized, scale = _normalize(rho)
    use_real, use_faces, tol = _resolve_flags(rho, real, face_reduction)
    builder = _ModelBuilder(n, t)
    for layout in moment_block_layout(n, t, regime):
        builder.add_layout(layout)
    vectors = (
        _face_vectors(
            normalized,
            tol,
            partial(_dps_kernel_vectors, n, t),
            lambda shift: (t - shift) // 2,
        )
        if use_faces
        else None
    )
    return _finish(
        builder,
        regime=regime,
        hierarchy=Hierarchy.DPS,
        formalism=Formalism.MOMENT,
        pairs=_dps_pairs(n),
        terms_of=_dps_trace_terms,
        target_of=_state_targets(normalized),
        kernel_vectors=vectors,
        rho=normalized,
        scale=scale,
        real=use_real,
    )


def build_dps_tensor(
    rho: HermitianMatrix,
    t: int,
    regime: Regime = Regime.GENERIC,
    *,
    real: bool | None = None,
    face_reduction: bool | None = None,
) -> DpsModel:
    """Build DPS^(t) from the cliques of the full tensor certificate.

    Rows of one clique that carry the same moment label are identical by
    Bose symmetry and are collapsed, so the LMI matches the moment model
    while the raw clique sizes stay available in `raw_sizes`.
    """
    _check_level(t)
    n = bipartite_dim(rho)
    _check_support(rho, regime)
    normalized, scale = _normalize(rho)
    use_real, use_faces, tol = _resolve_flags(rho, real, face_reduction)
    builder = _ModelBuilder(n, t)
    for s in range(t + 1):
        layout = tensor_block_layout(n, t, s, regime)

        def to_label(row: tuple[int, ...], s: int = s) -> tuple[Any, ...]:
            return (row[0], alpha(row[1 + s :], n), alpha(row[1 : 1 + s], n))

        for block in layout.blocks:
            builder.add_tensor_block(layout, block, to_label)
    vectors = (
        _face_vectors(normalized, tol, partial(_dps_kernel_vectors, n, t))
        if use_faces
        else None
    )
    return _finish(
        builder,
        regime=regime,
        hierarchy=Hierarchy.DPS,
        formalism=Formalism.TENSOR,
        pairs=_dps_pairs(n),
        terms_of=_dps_trace_terms,
        target_of=_state_targets(normalized),
        kernel_vectors=vectors,
        rho=normalized,
        scale=scale,
        real=use_real,
    )


def _check_bose(rho: HermitianMatrix) -> None:
    if not is_bose_symmetric(rho):
        msg = "state is not invariant under swapping its registers"
        raise NotBoseSymmetricError(msg)


def build_dps_bose(
    rho: HermitianMatrix,
    t: int,
    *,
    ldui_filter: bool = False,
    real: bool | None = None,
    face_reduction: bool | None = None,
) -> DpsModel:
    """Build the Bose-symmetric DPS~(t) model of `rho`.

    One set of variables carries the moments L(x^d xbar^d') with
    |d| = |d'| = t + 1. With `ldui_filter` the moments with d != d' vanish
    and the blocks split by beta - beta'.
    """
    _check_level(t)
    n = bipartite_dim(rho)
    _check_bose(rho)
    regime = Regime.LDUI if ldui_filter else Regime.GENERIC
    _check_support(rho, regime)
    normalized, scale = _normalize(rho)
    use_real, use_faces, tol = _resolve_flags(rho, real, face_reduction)
    builder = _ModelBuilder(n, t)
    for layout in bose_block_layout(n, t, ldui_filter=ldui_filter):
        builder.add_layout(layout)
    vectors = (
        _face_vectors(normalized, tol, partial(_bose_kernel_vectors, n, t))
        if use_faces
        else None
    )
    return _finish(
        builder,
        regime=regime,
        hierarchy=Hierarchy.BOSE,
        formalism=Formalism.MOMENT,
        pairs=_bose_pairs(n),
        terms_of=_bose_trace_terms,
        target_of=_state_targets(normalized),
        kernel_vectors=vectors,
        rho=normalized,
        scale=scale,
        real=use_real,
    )


def build_dps_bose_tensor(
    rho: HermitianMatrix,
    t: int,
    *,
    ldui_filter: bool = False,
    real: bool | None = None,
    face_reduction: bool | None = None,
) -> DpsModel:
    """Build DPS~(t) from the partial transposes of a symmetric tensor."""
    _check_level(t)
    n = bipartite_dim(rho)
    _check_bose(rho)
    regime = Regime.LDUI if ldui_filter else Regime.GENERIC
    _check_support(rho, regime)
    normalized, scale = _normalize(rho)
    use_real, use_faces, tol = _resolve_flags(rho, real, face_reduction)
    builder = _ModelBuilder(n, t)
    for s in bose_depths(t):
        layout = bose_tensor_block_layout(n, t, s, ldui_filter=ldui_filter)

        def to_label(row: tuple[int, ...], s: int = s) -> tuple[Any, ...]:
            return (alpha(row[s:], n), alpha(row[:s], n))

        for block in layout.blocks:
            builder.add_tensor_block(layout, block, to_label)
    vectors = (
        _face_vectors(normalized, tol, partial(_bose_kernel_vectors, n, t))
        if use_faces
        else None
    )
    return _finish(
        builder,
        regime=regime,
        hierarchy=Hierarchy.BOSE,
        formalism=Formalism.TENSOR,
        pairs=_bose_pairs(n),
        terms_of=_bose_trace_terms,
        target_of=_state_targets(normalized),
        kernel_vectors=vectors,
        rho=normalized,
        scale=scale,
        real=use_real,
    )


def build_bose_template(
    n: int,
    t: int,
    targets: Callable[[int, int], Target],
    extra: Sequence[str],
    *,
    ldui_filter: bool = True,
    real: bool = True,
) -> DpsModel:
    """Build a DPS~(t) model whose state entries are affine in `extra`.

    `targets(row, col)` returns rho[row, col] as a constant plus a
    combination of extra unknowns. No face reduction is applied.
    """
    _check_level(t)
    builder = _ModelBuilder(n, t)
    for layout in bose_block_layout(n, t, ldui_filter=ldui_filter):
        builder.add_layout(layout)
    return _finish(
        builder,
        regime=Regime.LDUI if ldui_filter else Regime.GENERIC,
        hierarchy=Hierarchy.BOSE,
        formalism=Formalism.MOMENT,
        pairs=_bose_pairs(n),
        terms_of=_bose_trace_terms,
        target_of=targets,
        kernel_vectors=None,
        rho=None,
        scale=1.0,
        real=real,
        extra=extra,
    )


def build_model(
    rho: HermitianMatrix,
    t: int,
    *,
    regime: Regime = Regime.GENERIC,
    hierarchy: Hierarchy = Hierarchy.DPS,
    formalism: Formalism = Formalism.MOMENT,
    real: bool | None = None,
    face_reduction: bool | None = None,
) -> DpsModel:
    """Dispatch to the builder of `hierarchy` and `formalism`.

    The Bose hierarchy supports the GENERIC and LDUI regimes.
    """
    flags: dict[str, Any] = {"real": real, "face_reduction": face_reduction}
    if hierarchy is Hierarchy.DPS:
        moment = formalism is Formalism.MOMENT
        builder = build_dps_moment if moment else build_dps_tensor
        return builder(rho, t, regime, **flags)
    if regime not in (Regime.GENERIC, Regime.LDUI):
        msg = (
            "the Bose hierarchy takes the generic or ldui regime, "
            f"not {regime.value}"
        )
        raise ParameterError(msg)
    if formalism is Formalism.MOMENT:
        bose = build_dps_bose
    else:
        bose = build_dps_bose_tensor
    return bose(rho, t, ldui_filter=regime is Regime.LDUI, **flags)


# lowering to LMI data


def _entry_map(model: DpsModel, block: ModelBlock) -> sparse.csr_matrix:
    """Return the complex map from unknowns to the row-major vec of a block."""
    size = block.size
    flat = block.var_index.reshape(-1)
    rows = np.arange(size * size)
    re_cols = model.re_index[flat]
    im_cols = model.im_index[flat]
    has_im = im_cols >= 0
    phase = np.where(block.conj.reshape(-1), -1j, 1j)[has_im]
    ones = np.ones(size * size, dtype=np.complex128)
    return sparse.csr_matrix(
        (
            np.concatenate([ones, phase]),
            (
                np.concatenate([rows, rows[has_im]]),
                np.concatenate([re_cols, im_cols[has_im]]),
            ),
        ),
        shape=(size * size, model.num_unknowns),
    )


def _compress(
    basis: ComplexArray, constant: ComplexArray, coefficients: sparse.csc_matrix
) -> tuple[ComplexArray, sparse.csc_matrix]:
    """Return vec(V* M V) for the constant and every coefficient column."""
    size, reduced = basis.shape
    left = basis.conj().T
    const = (left @ constant.reshape(size, size) @ basis).reshape(-1)
    if size <= KRON_LIMIT:
        operator = np.kron(left, basis.T)
        coefs = (coefficients.T @ operator.T).T
        return const, sparse.csc_matrix(coefs)
    dense = np.zeros(
        (reduced * reduced, coefficients.shape[1]), dtype=np.complex128
    )
    for col in np.flatnonzero(np.diff(coefficients.indptr)):
        mat = coefficients[:, col].toarray().reshape(size, size)
        dense[:, col] = (left @ mat @ basis).reshape(-1)
    return const, sparse.csc_matrix(dense)


def _embed(
    size: int, constant: ComplexArray, coefficients: sparse.csc_matrix
) -> tuple[RealArray, sparse.csc_matrix]:
    """Return the real embedding [[Re, -Im], [Im, Re]] of block data."""
    mat = constant.reshape(size, size)
    const = np.block([[mat.real, -mat.imag], [mat.imag, mat.real]])
    coo = coefficients.tocoo()
    a, b = np.divmod(coo.row, size)
    wide = 2 * size
    top, bottom = a * wide, (size + a) * wide
    rows = np.concatenate(
        [top + b, top + size + b, bottom + b, bottom + size + b]
    )
    cols = np.tile(coo.col, 4)
    data = coo.data
    vals = np.concatenate([data.real, -data.imag, data.imag, data.real])
    embedded = sparse.csc_matrix(
        (vals, (rows, cols)), shape=(wide * wide, coefficients.shape[1])
    )
    embedded.eliminate_zeros()
    return const, embedded


def _lower(
    size: int,
    constant: ComplexArray,
    coefficients: sparse.csc_matrix,
    label: str,
) -> LmiBlock:
    coefficients = sparse.csc_matrix(coefficients)
    scale = max(
        1.0,
        float(np.max(np.abs(constant), initial=0.0)),
        float(np.max(np.abs(coefficients.data), initial=0.0)),
    )
    coefficients.data[np.abs(coefficients.data) <= 1e-15 * scale] = 0
    coefficients.eliminate_zeros()
    imag = max(
        float(np.max(np.abs(constant.imag), initial=0.0)),
        float(np.max(np.abs(coefficients.data.imag), initial=0.0)),
    )
    if imag <= IMAG_RTOL * scale:
        real_coefs = sparse.csc_matrix(
            (coefficients.data.real, coefficients.indices, coefficients.indptr),
            shape=coefficients.shape,
        )
        return LmiBlock(constant.real.reshape(size, size), real_coefs, label)
    const, embedded = _embed(size, constant, coefficients)
    return LmiBlock(const, embedded, label)


def to_lmi(model: DpsModel) -> LmiProblem:
    """Lower `model` to a real LMI in the free unknowns.

    Blocks with a forced kernel are compressed onto its complement; blocks
    compressed to nothing are dropped.
    """
    solution = model.solution
    blocks = []
    for block in model.blocks:
        phi = _entry_map(model, block)
        constant = phi @ solution.offset.astype(np.complex128)
        coefficients = sparse.csc_matrix(phi @ solution.basis)
        size = block.size
        if block.kernel.shape[1]:
            complement = linalg.null_space(block.kernel.conj().T)
            size = complement.shape[1]
            if size == 0:
                continue
            constant, coefficients = _compress(
                complement, constant, coefficients
            )
        constant = np.asarray(constant)
        blocks.append(_lower(size, constant, coefficients, block.label))
    return LmiProblem(num_vars=solution.num_free, blocks=tuple(blocks))


def reconstruct(model: DpsModel, y: npt.ArrayLike) -> ComplexArray:
    """Return the moments (normalized scale) for free values `y`."""
    values = model.solution.evaluate(y)
    moments = values[model.re_index].astype(np.complex128)
    has_im = model.im_index >= 0
    moments[has_im] += 1j * values[model.im_index[has_im]]
    return moments


def extra_values(model: DpsModel, y: npt.ArrayLike) -> RealArray:
    """Return the values of the extra unknowns for free values `y`."""
    return model.solution.evaluate(y)[model.extra_offset :]


def objective_in_free(
    model: DpsModel, cost: npt.ArrayLike
) -> tuple[RealArray, float]:
    """Rewrite c.u over all unknowns as c'.z + offset over the free ones."""
    c = np.asarray(cost, dtype=float)
    solution = model.solution
    free_cost = np.asarray(solution.basis.T @ c).reshape(-1)
    return free_cost, float(c @ solution.offset)


def check_membership(
    rho: HermitianMatrix,
    t: int,
    *,
    regime: Regime = Regime.GENERIC,
    hierarchy: Hierarchy = Hierarchy.DPS,
    formalism: Formalism = Formalism.MOMENT,
    real: bool | None = None,
    face_reduction: bool | None = None,
    opts: SolverOptions | None = None,
) -> SolveReport:
    """Decide membership of `rho` in the level-t hierarchy.

    Contradictory equalities mean no certificate exists; that is reported
    as Infeasible with an infinite margin.
    """
    try:
        model = build_model(
            rho,
            t,
            regime=regime,
            hierarchy=hierarchy,
            formalism=formalism,
            real=real,
            face_reduction=face_reduction,
        )
    except InconsistentModelError as exc:
        log_event(
            logger,
            SolverEvent.INCONSISTENT,
            msg=str(exc),
            level=logging.DEBUG,
        )
        return SolveReport(
            status=SolveStatus.INCONSISTENT,
            verdict=Verdict.INFEASIBLE,
            margin=math.inf,
        )
    return solve_feasibility(to_lmi(model), opts)


# certificates


def _tensor_indices(model: DpsModel) -> list[tuple[int, ...]]:
    return list(itertools.product(range(model.n), repeat=model.t + 1))


def _tensor_key(
    model: DpsModel, row: tuple[int, ...], col: tuple[int, ...]
) -> MomentKey:
    n = model.n
    if model.hierarchy is Hierarchy.BOSE:
        return alpha(row, n), alpha(col, n)
    return (
        unit(n, row[0]) + alpha(row[1:], n),
        unit(n, col[0]) + alpha(col[1:], n),
    )


def certificate_tensor(
    model: DpsModel, moments: npt.ArrayLike
) -> HermitianMatrix:
    """Expand moments into the full certificate on t + 1 registers."""
    values = np.asarray(moments, dtype=np.complex128)
    count = len(model.variables)
    if values.shape != (count,):
        msg = f"expected {count} moments, got shape {values.shape}"
        raise DimensionMismatchError(msg)
    indices = _tensor_indices(model)
    dim = len(indices)
    tensor = np.zeros((dim, dim), dtype=np.complex128)
    for a, row in enumerate(indices):
        for b, col in enumerate(indices):
            key, flipped = canonical(*_tensor_key(model, row, col))
            var = model.index.get(key)
            if var is not None:
                value = values[var]
                tensor[a, b] = value.conjugate() if flipped else value
    return HermitianMatrix(tensor, (model.n,) * (model.t + 1))


def moments_from_tensor(
    model: DpsModel, tensor: HermitianMatrix | npt.ArrayLike
) -> ComplexArray:
    """Read the model moments off a (Bose-symmetric) tensor certificate."""
    if isinstance(tensor, HermitianMatrix):
        entries = tensor.entries
    else:
        entries = np.asarray(tensor)
    n, t = model.n, model.t
    if entries.shape != (n ** (t + 1),) * 2:
        msg = f"tensor must be {n ** (t + 1)} square, got {entries.shape}"
        raise DimensionMismatchError(msg)
    weights = n ** np.arange(t, -1, -1)
    moments = np.zeros(len(model.variables), dtype=np.complex128)
    for k, var in enumerate(model.variables):
        p, q = var.key
        if model.hierarchy is Hierarchy.BOSE:
            row, col = sequence_of(p), sequence_of(q)
        else:
            row = (sequence_of(p[:n])[0], *sequence_of(p[n:]))
            col = (sequence_of(q[:n])[0], *sequence_of(q[n:]))
        a, b = int(np.dot(row, weights)), int(np.dot(col, weights))
        moments[k] = entries[a, b]
    return moments


def certificate_from_atoms(
    model: DpsModel,
    atoms: Iterable[tuple[float, npt.ArrayLike, npt.ArrayLike]],
) -> ComplexArray:
    """Return the moments of sum_l w_l x_l x_l* (x) y_l y_l*.

    Each y_l must be a unit vector so the partial traces reproduce the
    state; moments are divided by the model scale. Bose models read x_l
    only and need unit x_l.
    """
    n = model.n
    moments = np.zeros(len(model.variables), dtype=np.complex128)
    for weight, x, y in atoms:
        xs = np.asarray(x, dtype=np.complex128)
        ys = np.asarray(y, dtype=np.complex128)
        for k, var in enumerate(model.variables):
            p, q = var.key
            if model.hierarchy is Hierarchy.BOSE:
                value = np.prod(xs ** np.array(p)) * np.prod(
                    xs.conj() ** np.array(q)
                )
            else:
                value = (
                    np.prod(xs ** np.array(p[:n]))
                    * np.prod(xs.conj() ** np.array(q[:n]))
                    * np.prod(ys ** np.array(p[n:]))
                    * np.prod(ys.conj() ** np.array(q[n:]))
                )
            moments[k] += weight * value
    return moments / model.scale


class CertificateReport(BaseModel):
    """Checks run on a reconstructed certificate."""

    bose_symmetric: bool
    min_eigenvalues: list[float]
    psd: list[bool]
    trace_error: float
    trace_ok: bool
    kernel_error: float
    kernel_ok: bool
    violations: list[str]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        """Return True when no check failed."""
        return not self.violations


def _symmetry_error(
    tensor: HermitianMatrix, registers: Sequence[int]
) -> float:
    """Return the largest change under swapping `registers[0]` with the rest."""
    count = len(tensor.registers)
    worst = 0.0
    first = registers[0]
    for other in registers[1:]:
        order = list(range(count))
        order[first], order[other] = order[other], order[first]
        swapped = permute_registers(tensor, order)
        change = np.abs(swapped.entries - tensor.entries)
        worst = max(worst, float(np.max(change)))
    return worst


def verify_certificate(
    rho: HermitianMatrix, model: DpsModel, moments: npt.ArrayLike
) -> CertificateReport:
    """Check a certificate given as moments in normalized scale.

    The certificate is compared with rho / tr(rho).
    """
    normalized, _ = _normalize(rho)
    tensor = certificate_tensor(model, moments)
    n, t = model.n, model.t
    violations: list[str] = []
    bose = model.hierarchy is Hierarchy.BOSE
    symmetric_regs = list(range(t + 1)) if bose else list(range(1, t + 1))
    symmetry = 0.0
    if len(symmetric_regs) > 1:
        symmetry = _symmetry_error(tensor, symmetric_regs)
    largest = float(np.max(np.abs(tensor.entries)))
    bose_symmetric = symmetry <= PATTERN_ATOL * (1 + largest)
    if not bose_symmetric:
        violations.append(
            f"not symmetric under register swaps (error {symmetry:.3g})"
        )

    depths = bose_depths(t) if bose else range(t + 1)
    eigenvalues: list[float] = []
    psd: list[bool] = []
    for s in depths:
        registers = range(s) if bose else range(1, 1 + s)
        transposed = partial_transpose(tensor, registers)
        smallest = min_eigenvalue(transposed)
        eigenvalues.append(smallest)
        psd.append(smallest >= psd_threshold(transposed))
        if not psd[-1]:
            violations.append(
                f"partial transpose at depth {s} has eigenvalue "
                f"{smallest:.3g}"
            )

    reduced = partial_trace(tensor, range(2, t + 1)) if t > 1 else tensor
    scale = float(np.max(np.abs(normalized.entries)))
    trace_error = float(np.max(np.abs(reduced.entries - normalized.entries)))
    trace_ok = trace_error <= TRACE_RTOL * (1 + scale)
    if not trace_ok:
        violations.append(
            f"partial trace misses the state by {trace_error:.3g}"
        )

    kernel_error = 0.0
    rest = n ** (t - 1)
    blocks = tensor.entries.reshape(n * n, rest, n * n, rest)
    for w in kernel_basis(normalized, get_settings().kernel_tol).T:
        image = np.einsum("arbs,b->ars", blocks, w)
        kernel_error = max(kernel_error, float(np.max(np.abs(image))))
    kernel_ok = kernel_error <= TRACE_RTOL * (1 + scale)
    if not kernel_ok:
        violations.append(
            "kernel of the state is not propagated "
            f"(error {kernel_error:.3g})"
        )

    return CertificateReport(
        bose_symmetric=bose_symmetric,
        min_eigenvalues=eigenvalues,
        psd=psd,
        trace_error=trace_error,
        trace_ok=trace_ok,
        kernel_error=kernel_error,
        kernel_ok=kernel_ok,
        violations=violations,
    )


def dump_model(model: DpsModel) -> dict[str, Any]:
    """Return a JSON-ready description of variables, blocks and equalities."""
    return {
        "n": model.n,
        "t": model.t,
        "regime": model.regime.value,
        "hierarchy": model.hierarchy.value,
        "formalism": model.formalism.value,
        "real": model.real,
        "face_reduction": model.face_reduction,
        "scale": model.scale,
        "variables": [
            {"key": [list(part) for part in var.key], "real": var.real}
            for var in model.variables
        ],
        "blocks": [
            {
                "shift": block.shift,
                "key": list(block.key),
                "size": block.size,
                "reduced_size": block.reduced_size,
                "tensor_size": block.tensor_size,
                "labels": [
                    list(label) if isinstance(label, tuple) else label
                    for label in block.labels
                ],
            }
            for block in model.blocks
        ],
        "equations": [
            {
                "label": eq.label,
                "rhs": eq.rhs,
                "coefficients": {
                    model.unknown_name(k): c
                    for k, c in sorted(eq.coefficients.items())
                },
            }
            for eq in model.equations
        ],
        "free_unknowns": model.solution.num_free,
    }
