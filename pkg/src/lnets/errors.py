"""Exception types shared across the package."""


class LnetsError(Exception):
    """Base class for all package-specific errors."""


class AdmissibilityError(LnetsError):
    """Two oriented spheres admit no common oriented tangent plane.

    Raised when ||c0 - c1||^2 <= (r0 - r1)^2, including the boundary case
    of equality (a cone needs the strict inequality).
    """


class UmbilicError(LnetsError):
    """Principal directions are not defined: the two curvatures coincide."""


class CurvatureSignError(LnetsError):
    """The surface point violates the positive-curvature requirement."""


class SingularRadiusError(LnetsError):
    """Congruence radius reaches or exceeds the smaller principal radius,
    which would create swallowtail-type singularities."""


class FlatError(LnetsError):
    """Both dual curvature radii vanish; every direction is self-conjugate
    and no partner direction is determined."""


class TracingError(LnetsError):
    """Streamline tracing hit a field degeneracy (near-parallel directions)."""

    def __init__(self, message, uv=None):
        super().__init__(message)
        self.uv = uv


class ConfigError(LnetsError):
    """Invalid run configuration or input file."""
