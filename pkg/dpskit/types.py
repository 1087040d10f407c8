"""Define some helpful type aliases."""

from typing import Union

import numpy as np
import numpy.typing as npt
import redis

from dpskit.enums import CacheStatus

RealArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]
IntArray = npt.NDArray[np.int64]

# exponent vector alpha(i) of a symbol sequence, length n
ExponentVec = tuple[int, ...]

# a monomial x^p xbar^q; for DPS models p and q are the concatenation of the
# A-register exponent and the B-register exponent (length 2n)
MomentKey = tuple[ExponentVec, ExponentVec]

# (i0, beta, beta') for DPS moment bases, (beta, beta') for the Bose ones
MomentLabel = tuple[int, ExponentVec, ExponentVec]
BoseLabel = tuple[ExponentVec, ExponentVec]

# (i0, i1, ..., it) row index of a tensor certificate
TensorLabel = tuple[int, ...]

OrbitVec = tuple[int, ...]

CacheConnectType = tuple[
    CacheStatus,
    Union[redis.client.Redis, None],  # type: ignore
]
