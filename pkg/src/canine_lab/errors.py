"""Exception taxonomy shared across the package.

Every module raises subclasses of CanineLabError so callers (CLI, HTTP
service) can map failures to exit codes / status codes in one place.
"""


class CanineLabError(Exception):
    """Base class for all package errors."""


# geometry -------------------------------------------------------------

class GeometryError(CanineLabError):
    pass


class DegenerateLine(GeometryError):
    """The two defining points of a boundary line coincide."""


class DegenerateDirection(GeometryError):
    """No usable mesial direction (e.g. lateral and central crown tips coincide)."""


class AmbiguousGeometry(GeometryError):
    """Non-monotone half-plane sign pattern: boundary lines cross near the point."""


# agreement ------------------------------------------------------------

class AgreementError(CanineLabError):
    pass


class EmptyInput(AgreementError):
    pass


class ChanceDegenerate(AgreementError):
    """Expected agreement is 1 (both raters constant on one category): kappa undefined."""


class UnequalRaterCount(AgreementError):
    pass


class ZeroVariance(AgreementError):
    pass


class InvalidParameter(AgreementError):
    pass


class IncompleteStudy(CanineLabError):
    """Rating data missing a phase, a rater, or case coverage."""


# metrics --------------------------------------------------------------

class MetricsError(CanineLabError):
    pass


class LengthMismatch(MetricsError):
    pass


class LabelOutOfRange(CanineLabError):
    """Shared by metrics and training code: label index outside 0..k-1."""


class EmptyMatrix(MetricsError):
    pass


# distill --------------------------------------------------------------

class DistillError(CanineLabError):
    pass


class ShapeMismatch(DistillError):
    pass


class InvalidTemperature(DistillError):
    pass


class EmptyDataset(DistillError):
    pass


class NonFiniteLoss(DistillError):
    """Training diverged: loss became NaN or infinite."""


class InvalidProportions(DistillError):
    pass


class InvalidConfig(DistillError):
    pass


# study ----------------------------------------------------------------

class StudyError(CanineLabError):
    pass


class DuplicateStudyId(StudyError):
    pass


class EmptyCaseList(StudyError):
    pass


class PhaseNotOpen(StudyError):
    pass


class OutOfOrderRating(StudyError):
    pass


class ConflictingRating(StudyError):
    pass


class LabelSpaceMismatch(StudyError):
    pass
