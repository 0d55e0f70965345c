"""Exception types shared across the package.

Machine-readable ``code`` attributes are surfaced by the CLI so that
failures in batch runs can be classified without parsing messages.
"""


class MzBraidError(Exception):
    """Base class; ``code`` is a short machine-readable identifier."""

    code = "E_GENERIC"


class ValidationError(MzBraidError):
    """Invalid physical parameters or violated construction invariants."""

    code = "E_RANGE"


class ConfigParseError(MzBraidError):
    code = "E_PARSE"


class UnknownKeyError(MzBraidError):
    code = "E_UNKNOWN_KEY"


class IOArtifactError(MzBraidError):
    code = "E_IO"


class DegenerateScheduleError(MzBraidError):
    """Pulse inversion hit a removable singularity that did not cancel."""

    code = "E_DEGENERATE_SCHEDULE"


class SingularParametrizationError(MzBraidError):
    """Global-phase integrand diverges for the supplied passage parameters."""

    code = "E_SINGULAR_PARAMETRIZATION"


class GridTooCoarseError(MzBraidError):
    """Finite-difference residual did not converge under grid refinement."""

    code = "E_GRID"


class PropagationError(MzBraidError):
    code = "E_PROPAGATION"


class FrameError(MzBraidError):
    code = "E_FRAME"


class SpectatorCollisionError(MzBraidError):
    """Spectator detuning too close to an active drive for adiabatic elimination."""

    code = "E_SPECTATOR_COLLISION"
