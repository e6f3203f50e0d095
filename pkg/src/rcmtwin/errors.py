"""Exception types shared across the package.

Every error raised on a well-defined failure path derives from RcmTwinError
so callers can catch the whole family at a pipeline boundary.  Bad arguments
(non-finite numbers, dt <= 0, wrong shapes) raise plain ValueError instead.
"""


class RcmTwinError(Exception):
    """Base class for all domain errors raised by this package."""


class UnreachableTargetError(RcmTwinError):
    """Iterative IK failed to converge on the requested pose."""


class JointLimitError(RcmTwinError):
    """A joint solution violates the configured joint limits."""


class DegenerateCalibrationError(RcmTwinError):
    """Tool-tip calibration system is rank deficient (orientations too similar)."""


class FulcrumMisalignmentError(RcmTwinError):
    """Tool axis does not pass through the pivot hole within tolerance."""


class ToolRetractedError(RcmTwinError):
    """Tool tip would sit outside the body wall (outside length >= tool length)."""


class UndefinedDirectionError(RcmTwinError):
    """Direction is undefined (zero-length radial vector at the pivot)."""


class DegenerateDirectionError(RcmTwinError):
    """Tip-motion Jacobian is singular (tip at the pivot or polar latitude)."""


class InvalidTrajectoryError(RcmTwinError):
    """Requested reference trajectory leaves the reachable workspace."""


class ProtocolDecodeError(RcmTwinError):
    """A wire message could not be decoded.

    ``field`` names the missing or malformed field when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
