"""Test clique keys, moment bases and the block-size tables."""

import itertools
import math
from collections import Counter

import pytest

from dpskit.enums import Regime
from dpskit.exceptions import ParityError, RegisterError
from dpskit.patterns import (
    alpha,
    block_size_table,
    bose_block_layout,
    canonical,
    clique_key,
    exponents,
    is_adjacent,
    moment_basis,
    moment_basis_size,
    moment_block_layout,
    moment_ratio_bound,
    moment_shifts,
    moment_size_multiset,
    tensor_block_layout,
    tensor_clique_bound,
)

pytestmark = pytest.mark.unit

REGIMES = [Regime.CLDUI, Regime.LDUI, Regime.LDOI]


def _rows(word: str) -> tuple[int, ...]:
    """Turn a 1-based word such as '123' into a 0-based tensor row."""
    return tuple(int(ch) - 1 for ch in word)


def test_alpha() -> None:
    """Symbol counts, including the empty sequence."""
    assert alpha((0, 0, 1), 3) == (2, 1, 0)
    assert alpha((), 3) == (0, 0, 0)
    with pytest.raises(RegisterError):
        alpha((3,), 3)


def test_exponents_are_sorted_and_complete() -> None:
    """C(n-1+w, n-1) vectors of weight w, in lexicographic order."""
    vecs = exponents(3, 2)
    assert len(vecs) == math.comb(4, 2)
    assert list(vecs) == sorted(vecs)
    assert all(sum(v) == 2 for v in vecs)


def test_canonical_takes_smaller_form() -> None:
    """Conjugation swaps the two halves of a key."""
    key, conj = canonical((0, 1), (1, 0))
    assert key == ((0, 1), (1, 0))
    assert not conj
    key, conj = canonical((1, 0), (0, 1))
    assert key == ((0, 1), (1, 0))
    assert conj


def test_cldui_depth_zero_has_twelve_cliques() -> None:
    """n=3, t=2, s=0 gives 12 cliques: 3 of size 5, 3 of 2, 6 of 1."""
    layout = tensor_block_layout(3, 2, 0, Regime.CLDUI)
    assert len(layout.blocks) == 12
    assert layout.sizes() == Counter({5: 3, 2: 3, 1: 6})


def test_cldui_depth_one_clique() -> None:
    """n=3, t=2, s=1 has the clique {111, 122, 133, 212, 313}."""
    layout = tensor_block_layout(3, 2, 1, Regime.CLDUI)
    expected = {_rows(w) for w in ("111", "122", "133", "212", "313")}
    assert expected in [set(block.labels) for block in layout.blocks]


def test_cldui_depth_two_clique() -> None:
    """n=3, t=2, s=2 has the clique of all permutations of 123."""
    layout = tensor_block_layout(3, 2, 2, Regime.CLDUI)
    expected = {_rows("".join(p)) for p in itertools.permutations("123")}
    assert expected in [set(block.labels) for block in layout.blocks]


def test_tensor_layout_trivial_cases() -> None:
    """Generic gives one block, n=1 gives one singleton."""
    generic = tensor_block_layout(3, 2, 1, Regime.GENERIC)
    assert generic.sizes() == Counter({27: 1})
    single = tensor_block_layout(1, 3, 2, Regime.LDOI)
    assert single.sizes() == Counter({1: 1})
    with pytest.raises(ParityError):
        tensor_block_layout(2, 2, 3, Regime.LDOI)


@pytest.mark.parametrize("regime", REGIMES)
@pytest.mark.parametrize(("n", "t"), [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2)])
def test_clique_keys_match_adjacency(regime, n, t) -> None:
    """Equal keys iff the invariance allows the entry, at every depth."""
    rows = list(itertools.product(range(n), repeat=t + 1))
    for s in range(t + 1):
        keys = {
            row: clique_key(row[0], row[1:], s, regime, n) for row in rows
        }
        for row, col in itertools.product(rows, repeat=2):
            adjacent = is_adjacent(row, col, s, regime, n)
            assert (keys[row] == keys[col]) == adjacent


@pytest.mark.parametrize("regime", REGIMES)
def test_tensor_blocks_partition_rows(regime) -> None:
    """Blocks are disjoint and cover [n]^{t+1}."""
    n, t = 3, 3
    for s in range(t + 1):
        layout = tensor_block_layout(n, t, s, regime)
        labels = [label for block in layout.blocks for label in block.labels]
        assert len(labels) == len(set(labels)) == n ** (t + 1)


@pytest.mark.parametrize(("n", "t"), [(2, 2), (3, 2), (3, 3), (4, 2)])
def test_ldoi_tensor_clique_bound(n, t) -> None:
    """Every LDOI clique has at most t! n^ceil(t/2) rows."""
    bound = tensor_clique_bound(n, t)
    for s in range(t + 1):
        layout = tensor_block_layout(n, t, s, Regime.LDOI)
        assert max(block.size for block in layout.blocks) <= bound


def test_moment_basis_sizes() -> None:
    """|I_{1,s'}| follows the binomial formula."""
    assert len(moment_basis(3, 2, 0)) == 27
    assert len(moment_basis(3, 2, 2)) == len(moment_basis(3, 2, -2)) == 18
    assert moment_basis_size(4, 3, 1) == 160
    assert len(moment_basis(4, 3, 1)) == 160


def test_moment_basis_parity() -> None:
    """s' must have the parity of t and |s'| <= t."""
    with pytest.raises(ParityError):
        moment_basis(3, 2, 1)
    with pytest.raises(ParityError):
        moment_basis(3, 2, 4)
    assert list(moment_shifts(3)) == [3, 1, -1, -3]


GENERIC_SIZES = {
    (3, 2): {27: 1, 18: 2},
    (3, 3): {54: 2, 30: 2},
    (3, 4): {108: 1, 90: 2, 45: 2},
    (3, 5): {180: 2, 135: 2, 63: 2},
    (3, 6): {300: 1, 270: 2, 189: 2, 84: 2},
    (3, 7): {450: 2, 378: 2, 252: 2, 108: 2},
    (4, 2): {64: 1, 40: 2},
    (4, 3): {160: 2, 80: 2},
    (4, 4): {400: 1, 320: 2, 140: 2},
    (4, 5): {800: 2, 560: 2, 224: 2},
    (4, 6): {1600: 1, 1400: 2, 896: 2, 336: 2},
    (4, 7): {2800: 2, 2240: 2, 1344: 2, 480: 2},
    (5, 2): {125: 1, 75: 2},
    (5, 3): {375: 2, 175: 2},
    (5, 4): {1125: 1, 875: 2, 350: 2},
    (5, 5): {2625: 2, 1750: 2, 630: 2},
    (5, 6): {6125: 1, 5250: 2, 3150: 2, 1050: 2},
    (5, 7): {12250: 2, 9450: 2, 5250: 2, 1650: 2},
}

LDOI_SIZES = {
    (3, 2): {7: 3, 6: 1, 5: 6, 3: 2},
    (3, 3): {15: 2, 13: 6, 9: 2, 7: 6},
    (3, 4): {28: 3, 24: 1, 23: 6, 21: 2, 12: 6, 9: 2},
    (3, 5): {48: 2, 44: 6, 36: 2, 33: 6, 18: 2, 15: 6},
    (3, 6): {76: 3, 72: 1, 69: 6, 63: 2, 48: 6, 45: 2, 22: 6, 18: 2},
    (3, 7): {117: 2, 111: 6, 99: 2, 93: 6, 66: 2, 62: 6, 30: 2, 26: 6},
    (4, 2): {10: 4, 7: 8, 6: 4, 3: 8},
    (4, 3): {28: 2, 20: 12, 16: 2, 12: 2, 10: 12, 4: 2},
    (4, 4): {58: 4, 46: 8, 42: 4, 34: 8, 22: 8, 13: 8},
    (4, 5): {
        124: 2,
        100: 12,
        88: 2,
        76: 2,
        70: 12,
        52: 2,
        40: 2,
        28: 12,
        16: 2,
    },
    (4, 6): {218: 4, 193: 8, 182: 4, 157: 8, 124: 8, 100: 8, 50: 8, 34: 8},
    (4, 7): {
        404: 2,
        350: 12,
        328: 2,
        296: 2,
        280: 12,
        232: 2,
        200: 2,
        168: 12,
        136: 2,
        80: 2,
        60: 12,
        40: 2,
    },
    (5, 2): {13: 5, 9: 10, 6: 10, 3: 20},
    (5, 3): {45: 2, 27: 20, 25: 2, 13: 20, 12: 10, 4: 10},
}

CLDUI_SIZES = {
    (3, 2): {5: 3, 3: 4, 2: 9, 1: 18},
    (4, 2): {7: 4, 4: 4, 3: 4, 2: 24, 1: 40},
    (5, 2): {9: 5, 5: 5, 3: 10, 2: 50, 1: 75},
}


def _size_cases(regime: Regime, table: dict) -> list:
    """Parametrize a size table, marking the large (n, t) cells slow."""
    return [
        pytest.param(
            regime,
            n,
            t,
            expected,
            id=f"{regime.value}-n{n}-t{t}",
            marks=[pytest.mark.slow] if n ** (t + 1) > 5000 else [],
        )
        for (n, t), expected in table.items()
    ]


@pytest.mark.parametrize(
    ("regime", "n", "t", "expected"),
    [
        *_size_cases(Regime.GENERIC, GENERIC_SIZES),
        *_size_cases(Regime.LDOI, LDOI_SIZES),
        *_size_cases(Regime.CLDUI, CLDUI_SIZES),
    ],
)
def test_moment_block_sizes(regime, n, t, expected) -> None:
    """Block sizes with multiplicities over all s'."""
    sizes = moment_size_multiset(n, t, regime)
    assert sizes == Counter(expected)
    total = sum(moment_basis_size(n, t, s) for s in moment_shifts(t))
    assert sum(size * count for size, count in sizes.items()) == total


def test_cldui_moment_sizes_n4_t3() -> None:
    """The largest CLDUI blocks at (t, n) = (3, 4) and the total basis size."""
    sizes = moment_size_multiset(4, 3, Regime.CLDUI)
    large = {size: count for size, count in sizes.items() if size >= 4}
    assert large == {16: 1, 10: 6, 7: 16, 4: 11}
    assert sum(size * count for size, count in sizes.items()) == 480


def test_ldui_sizes_mirror_cldui() -> None:
    """LDUI and CLDUI give the same multiset (s' <-> -s')."""
    for n, t in [(3, 2), (3, 3), (4, 2)]:
        ldui = moment_size_multiset(n, t, Regime.LDUI)
        assert ldui == moment_size_multiset(n, t, Regime.CLDUI)


@pytest.mark.parametrize("regime", REGIMES)
def test_moment_blocks_partition_basis(regime) -> None:
    """Sub-blocks of each I_{1,s'} cover it exactly once."""
    for layout in moment_block_layout(3, 3, regime):
        labels = [label for block in layout.blocks for label in block.labels]
        assert sorted(labels) == sorted(moment_basis(3, 3, layout.shift))
        assert len(labels) == len(set(labels))


@pytest.mark.parametrize(
    ("n", "t"), [(3, 2), (3, 3), (3, 4), (4, 2), (4, 3), (5, 2)]
)
def test_ldoi_moment_ratio_bound(n, t) -> None:
    """Largest LDOI sub-block over |I_{1,s'}| stays under its bound."""
    for layout in moment_block_layout(n, t, Regime.LDOI):
        largest = max(block.size for block in layout.blocks)
        ratio = largest / layout.size
        assert ratio <= moment_ratio_bound(n, t, layout.shift) + 1e-12


def test_block_size_table_rows() -> None:
    """Rows are sorted largest first per (n, t); n=1 is a trivial row."""
    rows = block_size_table([3], [2], Regime.GENERIC)
    assert [(r.block_size, r.multiplicity) for r in rows] == [(27, 1), (18, 2)]
    trivial = block_size_table([1], [2], Regime.LDOI)
    assert [(r.block_size, r.multiplicity) for r in trivial] == [(1, 3)]


def test_entry_keys_are_hermitian() -> None:
    """Entry (c, r) is the conjugate of entry (r, c)."""
    layout = moment_block_layout(2, 2, Regime.GENERIC)[1]
    labels = layout.blocks[0].labels
    for row, col in itertools.product(labels, repeat=2):
        key, conj = layout.entry(row, col)
        key_t, conj_t = layout.entry(col, row)
        assert key == key_t
        if key[0] != key[1]:
            assert conj != conj_t


def test_bose_layout_depths() -> None:
    """A level-t Bose model has floor((t+1)/2) + 1 layouts."""
    layouts = bose_block_layout(3, 3)
    assert [layout.shift for layout in layouts] == [0, 1, 2]
    filtered = bose_block_layout(3, 3, ldui_filter=True)
    for plain, split in zip(layouts, filtered):
        assert plain.size == split.size
        assert len(split.blocks) >= len(plain.blocks)
