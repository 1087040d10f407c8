"""Define ENUMs used through out the package."""

from enum import Enum, IntEnum


class Regime(str, Enum):
    """Invariance class a state is assumed to have."""

    GENERIC = "generic"
    CLDUI = "cldui"
    LDUI = "ldui"
    LDOI = "ldoi"


class Hierarchy(str, Enum):
    """Which hierarchy a membership query is posed in."""

    DPS = "dps"
    BOSE = "bose"


class Verdict(IntEnum):
    """Outcome of a membership query.

    The values double as the process exit codes of `dpskit check`.
    """

    FEASIBLE = 0
    INFEASIBLE = 1
    MARGINAL = 2


class SolveStatus(IntEnum):
    """Termination state of the interior-point solver."""

    OPTIMAL = 0
    STALLED = 1
    UNBOUNDED = 2
    INCONSISTENT = 3


class CacheStatus(IntEnum):
    """Connection status for the verdict cache."""

    NONE = 0
    CONNECTED = 1
    AUTH_ERROR = 2
    CONN_ERROR = 3
    DISABLED = 4


class CacheEvent(IntEnum):
    """Verdict cache events."""

    CONNECT_BEGIN = 1
    CONNECT_SUCCESS = 2
    CONNECT_FAIL = 3
    KEY_ADDED_TO_CACHE = 4
    KEY_FOUND_IN_CACHE = 5
    FAILED_TO_CACHE_KEY = 6


class SolverEvent(IntEnum):
    """Interior-point solver events."""

    SOLVE_BEGIN = 1
    ITERATION = 2
    CONVERGED = 3
    STALLED = 4
    ITERATION_LIMIT = 5
    UNBOUNDED = 6
    INCONSISTENT = 7


class ExperimentEvent(IntEnum):
    """PPT-squared experiment events."""

    RUN_BEGIN = 1
    FACTOR_RESAMPLED = 2
    ROW_DONE = 3
    ROW_FAILED = 4
    RUN_DONE = 5


class Formalism(str, Enum):
    """How a DPS certificate is parametrized."""

    MOMENT = "moment"
    TENSOR = "tensor"
