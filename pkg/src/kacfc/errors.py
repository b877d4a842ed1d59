"""Exception types shared across the toolkit."""


class ConeViolationError(ValueError):
    """|omega| exceeds speed * rho somewhere, so the kinetic lift has a
    negative channel."""


class MassMismatchError(ValueError):
    """Transport distance requested between measures of different total mass."""


class CflViolationError(ValueError):
    """speed * dt / dx is not a positive integer, so the exact-shift
    transport step is unavailable."""


class IllPreparedError(ValueError):
    """Initial state is an atom (or otherwise carries infinite entropy
    against the uniform reference), so the entropy-dissipation report is
    meaningless without mollification."""


class ContinuityViolationError(ValueError):
    """A density/flux trajectory fails the discrete continuity or momentum
    equation beyond tolerance."""


class DegenerateStateError(ValueError):
    """A construction needs strictly positive channel masses (log densities)
    and got a cell with zero mass."""
