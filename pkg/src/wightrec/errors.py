"""Exception hierarchy.  Every error carries a stable ``code`` string."""


class WightrecError(Exception):
    code = "ERROR"


class OptimizerNotConverged(WightrecError):
    code = "OPTIMIZER_NOT_CONVERGED"


class QuadratureBudgetExceeded(WightrecError):
    code = "QUADRATURE_BUDGET_EXCEEDED"


class CombinatorialBudgetExceeded(WightrecError):
    code = "COMBINATORIAL_BUDGET_EXCEEDED"


class BlockMismatch(WightrecError):
    code = "BLOCK_MISMATCH"


class DomainError(WightrecError):
    code = "DOMAIN"


class SeriesDivergent(WightrecError):
    code = "SERIES_DIVERGENT"


class CapExceeded(WightrecError):
    code = "CAP_EXCEEDED"


class NotPSD(WightrecError):
    code = "NOT_PSD"


class NotSpacelike(WightrecError):
    code = "NOT_SPACELIKE"


class GridTooCoarse(WightrecError):
    code = "GRID_TOO_COARSE"


class ProjectionResidualExceeded(WightrecError):
    code = "PROJECTION_RESIDUAL_EXCEEDED"


class ConfigInvalid(WightrecError):
    code = "CONFIG_INVALID"


BUDGET_ERRORS = (QuadratureBudgetExceeded, CombinatorialBudgetExceeded, CapExceeded)


class CacheCorruptWarning(UserWarning):
    """The integral cache failed its integrity check and is being ignored."""

    code = "CACHE_CORRUPT"
