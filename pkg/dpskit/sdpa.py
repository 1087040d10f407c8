"""Read and write LMI problems in the sparse SDPA (.dat-s) format.

SDPA poses `min c.x s.t. sum_i F_i x_i - F_0 >= 0`, so the constant of each
block is written with its sign flipped (matrix number 0 holds -B(0)).
"""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from scipy import sparse

from dpskit.exceptions import SdpaFormatError
from dpskit.sdp import LmiBlock, LmiProblem
from dpskit.util import format_real

if TYPE_CHECKING:  # pragma: no cover
    from collections.abc import Iterator

logging.basicConfig()
logger = logging.getLogger(__name__)

ENTRY_FIELDS = 5
_SEPARATORS = re.compile(r"[{}(),]")


def _entries(problem: LmiProblem) -> Iterator[tuple[int, int, int, int, float]]:
    """Yield (matno, blkno, i, j, value), 1-based with i <= j."""
    for blkno, block in enumerate(problem.blocks, start=1):
        rows, cols = np.nonzero(np.triu(block.constant))
        for i, j in zip(rows, cols):
            yield 0, blkno, int(i) + 1, int(j) + 1, -float(block.constant[i, j])
        coo = block.coefficients.tocoo()
        size = block.size
        for vec, var, value in zip(coo.row, coo.col, coo.data):
            i, j = divmod(int(vec), size)
            if i <= j and value != 0:
                yield int(var) + 1, blkno, i + 1, j + 1, float(value)


def sdpa_text(problem: LmiProblem) -> str:
    """Return the sparse SDPA text of `problem`, entries sorted."""
    lines = [
        str(problem.num_vars),
        str(len(problem.blocks)),
        " ".join(str(size) for size in problem.block_sizes),
        " ".join(format_real(c) for c in problem.cost()),
    ]
    lines.extend(
        f"{matno} {blkno} {i} {j} {format_real(value)}"
        for matno, blkno, i, j, value in sorted(_entries(problem))
    )
    return "\n".join(lines) + "\n"


def export_sdpa(problem: LmiProblem, path: str | Path) -> Path:
    """Write `problem` to `path` and return the path."""
    target = Path(path)
    target.write_text(sdpa_text(problem), encoding="utf-8")
    logger.debug("wrote %d blocks to %s", len(problem.blocks), target)
    return target


def _tokens(text: str) -> list[str]:
    tokens: list[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line[0] in "\"*":
            continue
        tokens.extend(_SEPARATORS.sub(" ", line).split())
    return tokens


def parse_sdpa(text: str) -> LmiProblem:  # noqa: C901
    """Parse sparse SDPA text into an LmiProblem.

    Negative block sizes (diagonal blocks) are read as dense blocks of the
    absolute size. An all-zero objective reads back as no objective.
    """
    tokens = _tokens(text)
    try:
        m = int(tokens[0])
        nblocks = int(tokens[1])
        sizes = [abs(int(tok)) for tok in tokens[2 : 2 + nblocks]]
        cursor = 2 + nblocks
        cost = np.array([float(tok) for tok in tokens[cursor : cursor + m]])
        cursor += m
    except (IndexError, ValueError) as exc:
        msg = f"malformed SDPA header: {exc}"
        raise SdpaFormatError(msg) from exc
    empty = any(size < 1 for size in sizes)
    if len(sizes) != nblocks or len(cost) != m or empty:
        msg = "SDPA header is truncated or has an empty block"
        raise SdpaFormatError(msg)
    body = tokens[cursor:]
    if len(body) % ENTRY_FIELDS:
        msg = "SDPA entry list is not a multiple of five fields"
        raise SdpaFormatError(msg)

    constants = [np.zeros((size, size)) for size in sizes]
    triplets: list[tuple[list[int], list[int], list[float]]] = [
        ([], [], []) for _ in sizes
    ]
    for start in range(0, len(body), ENTRY_FIELDS):
        try:
            matno, blkno, i, j = (int(tok) for tok in body[start : start + 4])
            value = float(body[start + 4])
        except ValueError as exc:
            msg = f"bad SDPA entry {body[start : start + ENTRY_FIELDS]}"
            raise SdpaFormatError(msg) from exc
        if not (0 <= matno <= m and 1 <= blkno <= nblocks):
            msg = f"SDPA entry out of range: matno={matno} blkno={blkno}"
            raise SdpaFormatError(msg)
        size = sizes[blkno - 1]
        if not (1 <= i <= size and 1 <= j <= size):
            msg = f"SDPA entry ({i}, {j}) outside block {blkno} of size {size}"
            raise SdpaFormatError(msg)
        i, j = i - 1, j - 1
        if matno == 0:
            constants[blkno - 1][i, j] = -value
            constants[blkno - 1][j, i] = -value
            continue
        rows, cols, vals = triplets[blkno - 1]
        for r, c in {(i, j), (j, i)}:
            rows.append(r * size + c)
            cols.append(matno - 1)
            vals.append(value)

    blocks = tuple(
        LmiBlock(
            constant,
            sparse.csc_matrix((vals, (rows, cols)), shape=(size * size, m)),
            f"block-{index}",
        )
        for index, (constant, size, (rows, cols, vals)) in enumerate(
            zip(constants, sizes, triplets), start=1
        )
    )
    objective = cost if np.any(cost) else None
    return LmiProblem(num_vars=m, blocks=blocks, objective=objective)


def read_sdpa(path: str | Path) -> LmiProblem:
    """Read a sparse SDPA file."""
    return parse_sdpa(Path(path).read_text(encoding="utf-8"))
