"""Exception and warning types shared across the package."""


class PitchRegError(Exception):
    """Base class for all errors raised by pitchreg."""


# -- geometry -----------------------------------------------------------------

class PointAtInfinity(PitchRegError):
    """A projected point has a vanishing homogeneous coordinate."""


class SingularMatrix(PitchRegError):
    """A homography is not invertible."""


class DegenerateConfiguration(PitchRegError):
    """Point correspondences are collinear or coincident."""


class NonConvexResult(PitchRegError):
    """A warped quadrilateral is not convex."""


class DegeneratePolygon(PitchRegError):
    """A polygon has (near-)zero area or too few vertices."""


class ParallelSides(PitchRegError):
    """Quad side lines do not meet at a finite convergence point."""


class DegenerateQuad(PitchRegError):
    """A simulated quadrilateral collapsed or crossed its convergence point."""


# -- features / matching ------------------------------------------------------

class EmptyEdgeMap(PitchRegError):
    """An edge map contains no set pixels."""


class EmptyTemplate(PitchRegError):
    """A chamfer template contains no set pixels."""


class DimensionMismatch(PitchRegError):
    """Raster dimensions of two operands differ."""


class BadGeometry(PitchRegError):
    """Raster geometry is incompatible with the descriptor configuration."""


class EmptyDictionary(PitchRegError):
    """A dictionary holds no entries."""


class NoValidEntries(PitchRegError):
    """Dictionary generation rejected every candidate entry."""


# -- preprocessing ------------------------------------------------------------

class FieldNotFound(PitchRegError):
    """The playing-field mask covers too little of the frame."""


# -- temporal -----------------------------------------------------------------

class BisectorMiss(PitchRegError):
    """The view-cone bisector does not cross a clipping segment."""


class InvalidParams(PitchRegError):
    """Camera parameters violate their invariants."""


class NormalizationImpossible(PitchRegError):
    """A homography cannot be normalized to unit lower-right entry."""


class EmptyCandidates(PitchRegError):
    """A frame has no registration candidates."""


class SolverDiverged(PitchRegError):
    """The stabilization solver stopped making progress."""


# -- evaluation ---------------------------------------------------------------

class SeedOverlap(PitchRegError):
    """Test seeds coincide with dictionary seeds."""


class EmptyRenderWarning(UserWarning):
    """A camera-view render produced no visible field pixels."""
