"""Exception types shared across the package."""


class EchoTopError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(EchoTopError, ValueError):
    pass


class NotNormalized(EchoTopError, ValueError):
    pass


class EigensolverError(EchoTopError, RuntimeError):
    pass


class DegenerateSpectrum(EchoTopError, ArithmeticError):
    """Two contributing eigenphases coincide (mod 2pi) within tolerance."""

    def __init__(self, n, k, gap):
        self.n, self.k, self.gap = n, k, gap
        super().__init__(
            f"degenerate eigenphases for pair (n={n}, k={k}): gap mod 2pi = {gap:.3e}")


class SingularFrequency(EchoTopError, ArithmeticError):
    """A resonant denominator sin(m*omega(j)/2) vanishes."""

    def __init__(self, m, j):
        self.m, self.j = m, j
        super().__init__(f"resonant denominator for mode m={m} at j={j!r}")


class NonresonanceViolated(EchoTopError, ArithmeticError):
    """m*omega(j) hits a multiple of 2pi somewhere in the action range.

    Use ``plateau_random_singular`` for the lattice-sum regularization.
    """

    def __init__(self, m, j):
        self.m, self.j = m, j
        super().__init__(
            f"m*omega(j) = 0 mod 2pi for m={m} near j={j:.6g}; "
            "use plateau_random_singular instead")


class NoTimescale(EchoTopError, ArithmeticError):
    pass


class NoStationaryPoint(EchoTopError, LookupError):
    """The phase function has no interior stationary point (boundary-dominated regime)."""


class PoleDegenerate(EchoTopError, ValueError):
    pass


class QuadratureError(EchoTopError, RuntimeError):
    pass


class OracleSizeError(EchoTopError, ValueError):
    """Dense oracle requested above the size gate without override."""


class ConfigError(EchoTopError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ResourceRefused(EchoTopError, RuntimeError):
    def __init__(self, estimate, limit):
        self.estimate, self.limit = estimate, limit
        super().__init__(
            f"estimated {estimate:.3g} multiply-adds exceeds {limit:.3g}; pass --force to run anyway")
