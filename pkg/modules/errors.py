"""
Exception hierarchy for the Muskat bubble solver.

Every error raised by the numerical modules derives from MuskatError so that
the command-line driver can turn solver failures into an exit status and a
manifest entry instead of a traceback.
"""


class MuskatError(Exception):
    """Base class for all solver errors."""


class AliasingError(MuskatError, ValueError):
    """Grid too coarse for the requested mode range."""


class SingularNodeError(MuskatError, ValueError):
    """A quadrature node sits on the kernel singularity (beta = 0 mod 2pi)."""


class QuadratureError(MuskatError):
    """Non-finite samples or an under-resolved quadrature."""


class DegenerateCurveError(MuskatError):
    """The curve stopped being a star-shaped graph over the pole."""


class ConstraintViolationError(MuskatError):
    """Zero-mode or area constraint cannot be satisfied."""


class NormalizationError(MuskatError):
    """Newton normalization of the initial shape did not converge."""


class VorticityDivergenceError(MuskatError):
    """The Neumann series for the vorticity is not contracting."""


class SingularSystemError(MuskatError):
    """Dense collocation matrix is numerically singular."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class IntegrationAbort(MuskatError):
    """Time integration stopped before t_end.

    The partially computed trajectory is attached so that callers can still
    write what was accepted before the failure.
    """

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepRejectedError(IntegrationAbort):
    """A step was rejected more often than the halving budget allows."""


class InvariantViolationError(IntegrationAbort):
    """Area drift or another conserved quantity left its tolerance."""


class PicardEscapeError(MuskatError):
    """A Picard iterate left the admissibility ball."""


class DiagnosticError(MuskatError, ValueError):
    """Post-processing fit cannot be computed on the given trajectory."""


class ParameterError(MuskatError, ValueError):
    """Physical or numerical parameter outside its admissible range."""


class ConfigParseError(MuskatError):
    """Malformed configuration text."""

    def __init__(self, message, line=None, column=None):
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class ConfigValidationError(MuskatError):
    """Configuration parsed but some fields are invalid."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SnapshotIntegrityError(MuskatError):
    """Snapshot checksum mismatch or malformed snapshot record."""
