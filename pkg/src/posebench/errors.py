"""Exception types shared across the engine.

Every failure mode that callers are expected to catch gets its own class so
the harness can map it to a status string without string matching.
"""


class PosebenchError(Exception):
    """Base class for all engine errors."""


# --- geometry ---------------------------------------------------------------

class ZeroBaseline(PosebenchError):
    """Relative translation is (numerically) zero; epipolar geometry undefined."""


class Degenerate(PosebenchError):
    """Input configuration is degenerate for the requested operation."""


class NegativeDepth(PosebenchError):
    """Triangulated point lies behind one of the cameras."""


class UndefinedDirection(PosebenchError):
    """Translation direction undefined (zero-norm vector)."""


# --- solvers ----------------------------------------------------------------

class Collinear(Degenerate):
    """Lifted minimal sample is collinear; registration underdetermined."""


class NonPositiveScale(PosebenchError):
    """Recovered relative depth scale is not positive."""


class NoCheiralSolution(PosebenchError):
    """No essential-matrix decomposition places any point in front of both cameras."""


# --- robust estimation ------------------------------------------------------

class InsufficientMatches(PosebenchError):
    """Fewer correspondences than the minimal sample size."""


class EstimationFailed(PosebenchError):
    """No candidate model ever reached a minimal-size inlier set."""


# --- io / parsing -----------------------------------------------------------

class FormatError(PosebenchError):
    """Malformed input file; message carries byte offset or line number."""


class VersionError(FormatError):
    """File declares an unsupported format version."""


class UnsupportedCameraModel(PosebenchError):
    """Reconstruction uses a camera model the engine does not accept."""


class MissingImage(PosebenchError):
    """Referenced image id does not exist in the model."""


class NoValidPairs(PosebenchError):
    """No image pair meets the covisibility threshold."""


# --- metrics ----------------------------------------------------------------

class EmptyInput(PosebenchError):
    """Metric called on an empty value list."""


class EmptyMask(EmptyInput):
    """Metric mask selects no entries."""


class EmptyGroup(EmptyInput):
    """Aggregation group contains no scenes."""


class AlignmentDegenerate(PosebenchError):
    """Least-squares scale alignment produced a non-positive scale."""


class DegenerateFit(PosebenchError):
    """Affine alignment is underdetermined (constant predictions)."""


class DegenerateInput(PosebenchError):
    """Correlation/fit input is constant or too short."""


class EmptyResults(PosebenchError):
    """Report requested over zero result rows."""


# --- synthetic --------------------------------------------------------------

class SpecError(PosebenchError):
    """Scene spec cannot be realized (e.g. empty two-view frustum)."""
