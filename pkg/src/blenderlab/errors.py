"""Exception types shared across the package."""


class BlenderlabError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(BlenderlabError, ValueError):
    """Jet operands with different (k, d) signatures."""


class DomainError(BlenderlabError, ValueError):
    """Point outside the region where a construction is defined."""


class SeamError(BlenderlabError, ValueError):
    """Spatial derivative requested on a non-smooth region boundary."""


class SupportError(BlenderlabError, ValueError):
    """Perturbation support violates the construction's region layout."""


class BudgetExceeded(BlenderlabError, ValueError):
    """Enumeration size beyond the configured exhaustive-search cap."""


class InvariantError(BlenderlabError, RuntimeError):
    """A certified invariant (e.g. the greedy bound) failed to hold."""


class CertificationError(BlenderlabError, RuntimeError):
    """A curve or box failed its certification inequalities."""


class NonHyperbolicError(BlenderlabError, RuntimeError):
    """Multipliers too close to the unit circle for continuation."""


class ConvergenceError(BlenderlabError, RuntimeError):
    """Newton or fixed-point iteration failed to converge."""


class InconclusiveError(BlenderlabError, RuntimeError):
    """A certificate query whose resolution the bounds cannot support."""
