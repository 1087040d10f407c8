"""Helper functions for generating verdict cache keys."""

from __future__ import annotations

import hashlib
from enum import Enum
from typing import TYPE_CHECKING, Any

import numpy as np

from dpskit.util import format_real

if TYPE_CHECKING:  # pragma: no cover
    from dpskit.hermitian import HermitianMatrix


def get_args_str(params: dict[str, Any]) -> str:
    """Return `name=value` pairs of `params`, sorted by name.

    Floats are written with round-trip precision and enums by value so the
    string does not depend on how the caller spelled the argument.
    """

    def render(value: Any) -> str:  # noqa: ANN401
        if isinstance(value, Enum):
            return str(value.value)
        if isinstance(value, float):
            return format_real(value)
        return str(value)

    return ",".join(f"{name}={render(params[name])}" for name in sorted(params))


def state_digest(rho: HermitianMatrix) -> bytes:
    """Return the bytes of the trace-normalized state and its registers."""
    trace = rho.trace
    entries = rho.entries / trace if trace > 0 else rho.entries
    header = ",".join(str(r) for r in rho.registers).encode()
    body = np.ascontiguousarray(entries, dtype=np.complex128).tobytes()
    return header + b"|" + body


def get_cache_key(
    prefix: str,
    kind: str,
    rho: HermitianMatrix,
    params: dict[str, Any],
) -> str:
    """Generate a key that identifies one membership query.

    Args:
        prefix (`str`): Namespace value that will prefix all cache keys.
        kind (`str`): The kind of query, e.g. "check".
        rho (`HermitianMatrix`): The state; it is hashed after trace
            normalization, so scaled copies share a key.
        params (`dict`): Level, regime, hierarchy, tolerances and every other
            setting that can change the verdict.

    Returns:
        `str`: `prefix:kind:<sha256>`.
    """
    digest = hashlib.sha256(state_digest(rho))
    digest.update(get_args_str(params).encode())
    prefix = f"{prefix}:" if prefix else ""
    return f"{prefix}{kind}:{digest.hexdigest()}"
