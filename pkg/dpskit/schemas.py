"""JSON file formats for states, triples, real matrices and configs."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Optional, TypeVar

import numpy as np
from pydantic import BaseModel, model_validator

from dpskit.hermitian import HermitianMatrix, RealSymmetric
from dpskit.states import TripleXYZ
from dpskit.util import serialize_json

if TYPE_CHECKING:  # pragma: no cover
    from dpskit.types import ComplexArray

Model = TypeVar("Model", bound=BaseModel)

Rows = list[list[float]]


def _complex(re: Rows, im: Optional[Rows]) -> ComplexArray:
    values = np.asarray(re, dtype=np.complex128)
    if im is not None:
        values = values + 1j * np.asarray(im, dtype=float)
    return values


class HermitianJson(BaseModel):
    """{"dim": d, "registers": [...], "re": [[...]], "im": [[...]]}."""

    dim: int
    registers: list[int] = []
    re: Rows
    im: Optional[Rows] = None

    @model_validator(mode="after")
    def _check_dim(self) -> HermitianJson:
        parts = [self.re] if self.im is None else [self.re, self.im]
        shapes = [np.shape(part) for part in parts]
        if any(shape != (self.dim, self.dim) for shape in shapes):
            msg = f"matrix parts must be {self.dim} x {self.dim}"
            raise ValueError(msg)
        return self

    def to_matrix(self) -> HermitianMatrix:
        """Return the validated HermitianMatrix."""
        entries = _complex(self.re, self.im)
        return HermitianMatrix(entries, tuple(self.registers))

    @classmethod
    def from_matrix(cls, m: HermitianMatrix) -> HermitianJson:
        """Return the JSON form of `m`, omitting a zero imaginary part."""
        return cls(
            dim=m.dim,
            registers=list(m.registers),
            re=m.entries.real.tolist(),
            im=None if m.is_real else m.entries.imag.tolist(),
        )


class TripleJson(BaseModel):
    """{"n": n, "X": ..., "Y_re": ..., "Y_im": ..., "Z_re": ..., "Z_im": ...}.

    The imaginary parts are optional.
    """

    n: int
    X: Rows
    Y_re: Rows
    Y_im: Optional[Rows] = None
    Z_re: Rows
    Z_im: Optional[Rows] = None

    def to_triple(self) -> TripleXYZ:
        """Return the validated triple."""
        triple = TripleXYZ(
            np.asarray(self.X, dtype=float),
            _complex(self.Y_re, self.Y_im),
            _complex(self.Z_re, self.Z_im),
        )
        if triple.n != self.n:
            msg = (
                f"triple matrices are {triple.n} x {triple.n}, "
                f"header says n={self.n}"
            )
            raise ValueError(msg)
        return triple

    @classmethod
    def from_triple(cls, t: TripleXYZ) -> TripleJson:
        """Return the JSON form of `t`."""
        return cls(
            n=t.n,
            X=t.X.tolist(),
            Y_re=t.Y.real.tolist(),
            Y_im=t.Y.imag.tolist() if np.any(t.Y.imag) else None,
            Z_re=t.Z.real.tolist(),
            Z_im=t.Z.imag.tolist() if np.any(t.Z.imag) else None,
        )


class RealMatrixJson(BaseModel):
    """{"n": n, "entries": [[...]]}."""

    n: int
    entries: Rows

    def to_matrix(self) -> RealSymmetric:
        """Return the validated real symmetric matrix."""
        if np.shape(self.entries) != (self.n, self.n):
            msg = f"entries must be {self.n} x {self.n}"
            raise ValueError(msg)
        return RealSymmetric(np.asarray(self.entries, dtype=float))

    @classmethod
    def from_matrix(cls, m: RealSymmetric) -> RealMatrixJson:
        """Return the JSON form of `m`."""
        return cls(n=m.dim, entries=m.entries.tolist())


def load_json(path: str | Path, schema: type[Model]) -> Model:
    """Read and validate `path` against `schema`."""
    return schema.model_validate_json(Path(path).read_text(encoding="utf-8"))


def save_json(path: str | Path, value: BaseModel) -> Path:
    """Write `value` to `path` and return the path."""
    target = Path(path)
    target.write_text(serialize_json(value), encoding="utf-8")
    return target


def load_state(path: str | Path) -> HermitianMatrix:
    """Read a state file, inferring registers [n, n] when none are given."""
    state = load_json(path, HermitianJson).to_matrix()
    if state.registers:
        return state
    n = int(round(np.sqrt(state.dim)))
    return state.with_registers((n, n)) if n * n == state.dim else state
