"""Index combinatorics for tensor and moment certificates.

Symbols are 0-based. A tensor row of a level-t certificate is a sequence
(i0, i1, ..., it) in [n]^{t+1}; a moment row is a label (i0, beta, beta') with
beta, beta' exponent vectors of length n. Every pattern graph handled here is
a disjoint union of cliques, so blocks are found by hashing a canonical key
rather than by graph search.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Generic, TypeVar

from pydantic import BaseModel

from dpskit.enums import Regime
from dpskit.exceptions import ParityError, RegisterError

if TYPE_CHECKING:  # pragma: no cover
    from collections.abc import Callable, Iterable, Sequence

    from dpskit.types import (
        BoseLabel,
        ExponentVec,
        MomentKey,
        MomentLabel,
        OrbitVec,
        TensorLabel,
    )

Label = TypeVar("Label", bound=tuple)  # type: ignore[type-arg]


def unit(n: int, i: int) -> ExponentVec:
    """Return the exponent vector e_i of length n."""
    vec = [0] * n
    vec[i] = 1
    return tuple(vec)


def alpha(seq: Iterable[int], n: int) -> ExponentVec:
    """Count how often each symbol 0..n-1 occurs in `seq`."""
    counts = [0] * n
    for symbol in seq:
        if not 0 <= symbol < n:
            msg = f"symbol {symbol} out of range 0..{n - 1}"
            raise RegisterError(msg)
        counts[symbol] += 1
    return tuple(counts)


def add(*vectors: ExponentVec) -> ExponentVec:
    """Return the entrywise sum."""
    return tuple(sum(parts) for parts in zip(*vectors))


def sub(a: ExponentVec, b: ExponentVec) -> ExponentVec:
    """Return a - b entrywise."""
    return tuple(x - y for x, y in zip(a, b))


def mod2(a: ExponentVec) -> ExponentVec:
    """Reduce entrywise modulo 2."""
    return tuple(x % 2 for x in a)


def sequence_of(vec: ExponentVec) -> tuple[int, ...]:
    """Return the sorted symbol sequence whose exponent vector is `vec`."""
    return tuple(
        symbol for symbol, count in enumerate(vec) for _ in range(count)
    )


@lru_cache(maxsize=512)
def exponents(n: int, weight: int) -> tuple[ExponentVec, ...]:
    """Return all exponent vectors of length n and given weight, sorted."""
    if weight < 0:
        return ()
    combos = itertools.combinations_with_replacement(range(n), weight)
    return tuple(sorted(alpha(combo, n) for combo in combos))


def multinomial(vec: ExponentVec) -> int:
    """Return |vec|! / prod(vec_k!)."""
    result = math.factorial(sum(vec))
    for count in vec:
        result //= math.factorial(count)
    return result


def canonical(p: ExponentVec, q: ExponentVec) -> tuple[MomentKey, bool]:
    """Canonicalize the monomial x^p xbar^q under conjugation.

    Return the lexicographically smaller of (p, q) and (q, p), and whether the
    conjugate was taken.
    """
    if q < p:
        return (q, p), True
    return (p, q), False


def is_real_key(key: MomentKey) -> bool:
    """Return True if the moment of `key` is real (self-conjugate key)."""
    return key[0] == key[1]


# tensor certificates


def clique_key(
    i0: int, seq: Sequence[int], s: int, regime: Regime, n: int
) -> OrbitVec:
    """Return the clique of tensor row (i0, seq) in the pattern of depth s.

    Two rows of the s-fold partially transposed certificate share a clique
    iff their keys are equal.
    """
    if regime is Regime.GENERIC:
        return ()
    head = unit(n, i0)
    prefix = alpha(seq[:s], n)
    rest = alpha(seq[s:], n)
    if regime is Regime.CLDUI:
        return sub(add(head, prefix), rest)
    if regime is Regime.LDUI:
        return sub(add(head, rest), prefix)
    return mod2(add(head, prefix, rest))


def swapped_entry(
    row: TensorLabel, col: TensorLabel, s: int
) -> tuple[TensorLabel, TensorLabel]:
    """Return the untransposed entry read by entry (row, col) at depth s.

    Transposing the first s B-registers swaps their symbols between the row
    and the column index.
    """
    b = 1 + s
    return (row[0], *col[1:b], *row[b:]), (col[0], *row[1:b], *col[b:])


def is_adjacent(
    row: TensorLabel, col: TensorLabel, s: int, regime: Regime, n: int
) -> bool:
    """Return True if (row, col) of the depth-s certificate can be nonzero.

    Direct definition: swap the s-prefixes and test the invariance condition
    of the regime on the untransposed entry.
    """
    if regime is Regime.GENERIC:
        return True
    r, c = swapped_entry(row, col, s)
    r_head, c_head = unit(n, r[0]), unit(n, c[0])
    r_tail, c_tail = alpha(r[1:], n), alpha(c[1:], n)
    if regime is Regime.CLDUI:
        return sub(r_head, r_tail) == sub(c_head, c_tail)
    if regime is Regime.LDUI:
        return add(r_head, r_tail) == add(c_head, c_tail)
    return all(x % 2 == 0 for x in add(r_head, r_tail, c_head, c_tail))


def tensor_entry_key(
    row: TensorLabel, col: TensorLabel, s: int, n: int
) -> MomentKey:
    """Return the (uncanonicalized) moment key of tensor entry (row, col)."""
    r, c = swapped_entry(row, col, s)
    return (
        unit(n, r[0]) + alpha(r[1:], n),
        unit(n, c[0]) + alpha(c[1:], n),
    )


def bose_tensor_entry_key(
    row: TensorLabel, col: TensorLabel, s: int, n: int
) -> MomentKey:
    """Return the moment key of entry (row, col) of a fully symmetric tensor."""
    r = (*col[:s], *row[s:])
    c = (*row[:s], *col[s:])
    return alpha(r, n), alpha(c, n)


# moment certificates


def dps_entry_key(row: MomentLabel, col: MomentLabel, n: int) -> MomentKey:
    """Return the key of entry (row, col) of a DPS moment matrix.

    Row (i0, b, b') and column (j0, c, c') meet at the moment
    x_i0 xbar_j0 y^(b + c') ybar^(b' + c).
    """
    i0, beta, beta_p = row
    j0, gamma, gamma_p = col
    return (
        unit(n, i0) + add(beta, gamma_p),
        unit(n, j0) + add(beta_p, gamma),
    )


def bose_entry_key(row: BoseLabel, col: BoseLabel) -> MomentKey:
    """Return the key of entry (row, col) of a Bose moment matrix."""
    beta, beta_p = row
    gamma, gamma_p = col
    return add(beta, gamma_p), add(beta_p, gamma)


def moment_sub_key(label: MomentLabel, regime: Regime, n: int) -> OrbitVec:
    """Return the sub-block of moment label (i0, beta, beta') under `regime`."""
    if regime is Regime.GENERIC:
        return ()
    i0, beta, beta_p = label
    head = unit(n, i0)
    if regime is Regime.CLDUI:
        return sub(add(head, beta_p), beta)
    if regime is Regime.LDUI:
        return sub(add(head, beta), beta_p)
    return mod2(add(head, beta, beta_p))


def bose_sub_key(label: BoseLabel, *, ldui_filter: bool) -> OrbitVec:
    """Return the sub-block of Bose label (beta, beta')."""
    if not ldui_filter:
        return ()
    beta, beta_p = label
    return sub(beta, beta_p)


def _check_shift(t: int, s_prime: int) -> None:
    if abs(s_prime) > t or (t - s_prime) % 2:
        msg = f"s'={s_prime} must satisfy |s'| <= t and s' = t mod 2 (t={t})"
        raise ParityError(msg)


def moment_basis_size(n: int, t: int, s_prime: int) -> int:
    """Return |I_{1,s'}| = n * C(n-1+(t-s')/2, n-1) * C(n-1+(t+s')/2, n-1)."""
    _check_shift(t, s_prime)
    low, high = (t - s_prime) // 2, (t + s_prime) // 2
    return n * math.comb(n - 1 + low, n - 1) * math.comb(n - 1 + high, n - 1)


@dataclass(frozen=True)
class Block(Generic[Label]):
    """One diagonal block: its key and its ordered basis labels."""

    key: OrbitVec
    labels: tuple[Label, ...]

    @property
    def size(self) -> int:
        """Return the number of basis labels."""
        return len(self.labels)


@dataclass(frozen=True)
class BlockLayout(Generic[Label]):
    """The blocks of one PSD constraint, ordered by key.

    `shift` is s' for moment layouts and the transpose depth s for tensor and
    Bose layouts.
    """

    n: int
    t: int
    shift: int
    regime: Regime
    blocks: tuple[Block[Label], ...]
    entry_key: Callable[[Label, Label], MomentKey] = field(repr=False)

    @property
    def size(self) -> int:
        """Return the total number of basis labels."""
        return sum(block.size for block in self.blocks)

    def sizes(self) -> Counter[int]:
        """Return the multiset of block sizes."""
        return Counter(block.size for block in self.blocks)

    def entry(self, row: Label, col: Label) -> tuple[MomentKey, bool]:
        """Return the canonical variable of (row, col) and its conj flag."""
        return canonical(*self.entry_key(row, col))


def _group(
    labels: Iterable[Label], key: Callable[[Label], OrbitVec]
) -> tuple[Block[Label], ...]:
    groups: dict[OrbitVec, list[Label]] = defaultdict(list)
    for label in labels:
        groups[key(label)].append(label)
    return tuple(Block(k, tuple(groups[k])) for k in sorted(groups))


def tensor_block_layout(
    n: int, t: int, s: int, regime: Regime
) -> BlockLayout[TensorLabel]:
    """Group [n]^{t+1} into the cliques of the depth-s pattern graph."""
    if not 0 <= s <= t:
        msg = f"transpose depth s={s} must lie in 0..{t}"
        raise ParityError(msg)
    rows = itertools.product(range(n), repeat=t + 1)
    return BlockLayout(
        n=n,
        t=t,
        shift=s,
        regime=regime,
        blocks=_group(rows, lambda r: clique_key(r[0], r[1:], s, regime, n)),
        entry_key=lambda r, c: tensor_entry_key(r, c, s, n),
    )


def moment_basis(
    n: int, t: int, s_prime: int, regime: Regime = Regime.GENERIC
) -> list[MomentLabel]:
    """Return the labels (i0, beta, beta') of I_{1,s'}.

    |beta| = (t+s')/2 and |beta'| = (t-s')/2. Labels are sorted by sub-block
    key of `regime`, then lexicographically.
    """
    _check_shift(t, s_prime)
    high = exponents(n, (t + s_prime) // 2)
    low = exponents(n, (t - s_prime) // 2)
    labels = [
        (i0, beta, beta_p)
        for i0 in range(n)
        for beta in high
        for beta_p in low
    ]
    return sorted(labels, key=lambda lab: (moment_sub_key(lab, regime, n), lab))


def moment_shifts(t: int) -> range:
    """Return s' = t, t-2, ..., -t."""
    return range(t, -t - 1, -2)


def moment_block_layout(
    n: int, t: int, regime: Regime
) -> list[BlockLayout[MomentLabel]]:
    """Return one moment layout per s' = t, t-2, ..., -t."""
    return [
        BlockLayout(
            n=n,
            t=t,
            shift=s_prime,
            regime=regime,
            blocks=_group(
                moment_basis(n, t, s_prime),
                lambda lab: moment_sub_key(lab, regime, n),
            ),
            entry_key=lambda r, c: dps_entry_key(r, c, n),
        )
        for s_prime in moment_shifts(t)
    ]


def bose_basis(n: int, t: int, s: int) -> list[BoseLabel]:
    """Return the labels (beta, beta') with |beta'| = s and |beta| = t+1-s."""
    if not 0 <= s <= t + 1:
        msg = f"transpose depth s={s} must lie in 0..{t + 1}"
        raise ParityError(msg)
    return [
        (beta, beta_p)
        for beta in exponents(n, t + 1 - s)
        for beta_p in exponents(n, s)
    ]


def bose_depths(t: int) -> range:
    """Return the transpose depths s = 0..floor((t+1)/2) of a Bose model."""
    return range((t + 1) // 2 + 1)


def bose_block_layout(
    n: int, t: int, *, ldui_filter: bool = False
) -> list[BlockLayout[BoseLabel]]:
    """Return one Bose moment layout per depth s = 0..floor((t+1)/2)."""
    regime = Regime.LDUI if ldui_filter else Regime.GENERIC
    return [
        BlockLayout(
            n=n,
            t=t,
            shift=s,
            regime=regime,
            blocks=_group(
                bose_basis(n, t, s),
                lambda lab: bose_sub_key(lab, ldui_filter=ldui_filter),
            ),
            entry_key=bose_entry_key,
        )
        for s in bose_depths(t)
    ]


def bose_tensor_block_layout(
    n: int, t: int, s: int, *, ldui_filter: bool = False
) -> BlockLayout[TensorLabel]:
    """Group [n]^{t+1} for the depth-s partial transpose of a Bose tensor."""
    regime = Regime.LDUI if ldui_filter else Regime.GENERIC

    def key(row: TensorLabel) -> OrbitVec:
        if not ldui_filter:
            return ()
        return sub(alpha(row[s:], n), alpha(row[:s], n))

    return BlockLayout(
        n=n,
        t=t,
        shift=s,
        regime=regime,
        blocks=_group(itertools.product(range(n), repeat=t + 1), key),
        entry_key=lambda r, c: bose_tensor_entry_key(r, c, s, n),
    )


# block-size tables


class TableRow(BaseModel):
    """One row of a block-size table."""

    regime: Regime
    n: int
    t: int
    block_size: int
    multiplicity: int


TABLE_COLUMNS = ("regime", "n", "t", "block_size", "multiplicity")


def moment_size_multiset(n: int, t: int, regime: Regime) -> Counter[int]:
    """Return the multiset of moment block sizes over all s'."""
    sizes: Counter[int] = Counter()
    for layout in moment_block_layout(n, t, regime):
        sizes.update(layout.sizes())
    return sizes


def block_size_table(
    n_range: Iterable[int], t_range: Iterable[int], regime: Regime
) -> list[TableRow]:
    """Tabulate moment block sizes with multiplicities, largest first."""
    t_values = list(t_range)
    return [
        TableRow(regime=regime, n=n, t=t, block_size=size, multiplicity=count)
        for n in n_range
        for t in t_values
        for size, count in sorted(
            moment_size_multiset(n, t, regime).items(), reverse=True
        )
    ]


def tensor_clique_bound(n: int, t: int) -> int:
    """Return t! * n^ceil(t/2), the largest LDOI tensor clique possible."""
    return math.factorial(t) * n ** math.ceil(t / 2)


def moment_ratio_bound(n: int, t: int, s_prime: int) -> float:
    """Return ((t+|s'|)/2)! / n^ceil((t+|s'|)/4).

    Bounds the largest LDOI sub-block of I_{1,s'} relative to |I_{1,s'}|.
    """
    half = (t + abs(s_prime)) // 2
    return math.factorial(half) / n ** math.ceil((t + abs(s_prime)) / 4)


