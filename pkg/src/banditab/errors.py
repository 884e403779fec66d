"""Exception hierarchy shared across the package."""


class BanditABError(Exception):
    """Base class for all package errors."""


class ValidationError(BanditABError, ValueError):
    """Inputs violate a documented contract (domain, shape, or value)."""


class DegenerateVarianceError(BanditABError):
    """The pseudo-outcome sample has zero variance; the test is undefined."""


class CrossFitError(BanditABError):
    """Cross-fitting could not produce valid folds or nuisance fits."""
