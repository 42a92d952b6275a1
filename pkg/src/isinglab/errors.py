"""Exception types shared across the package."""


class IsingLabError(Exception):
    """Base class for all package errors."""


class ParityViolation(IsingLabError):
    """A coordinate has the wrong parity for its role (face vs vertex)."""


class DisconnectedFaces(IsingLabError):
    """The requested face set does not yield a connected graph."""


class NotSimplyConnected(IsingLabError):
    """The union of the requested faces has at least one hole."""


class TooCoarse(IsingLabError):
    """Mesh too coarse to resolve the target region."""


class PathCollisionUnresolvable(IsingLabError):
    """Default defect-path routing could not produce edge-disjoint paths."""


class PathOutsideDomain(IsingLabError):
    """A defect path refers to edges or faces outside the domain."""


class FaceOutsideDomain(IsingLabError):
    """A spin insertion refers to a face that is not in the domain."""


class VertexOutsideDomain(IsingLabError):
    """A disorder insertion refers to a vertex that is not in the domain."""


class BoundaryEdge(IsingLabError):
    """Operation requires an interior edge."""


class SingularMatrix(IsingLabError):
    """Pivot collapsed during elimination; the matrix is numerically singular."""


class NonRealResidue(IsingLabError):
    """The conjugated Kac-Ward matrix failed to be real within tolerance."""


class TooLarge(IsingLabError):
    """Instance exceeds the brute-force enumeration cap."""


class QuadratureUnderResolved(IsingLabError):
    """Doubling the quadrature grid moved the results beyond tolerance."""


class InconsistentInitialData(IsingLabError):
    """Seed values for the diagonal recursion violate the consistency identity."""


class WindowTooLarge(IsingLabError):
    """Requested reconstruction window underflows the vertical decay factor."""


class CoincidentPoints(IsingLabError):
    """Continuum correlator evaluated at coincident insertion points."""


class UnknownCommand(IsingLabError):
    """CLI subcommand not recognized."""


class BadConfig(IsingLabError):
    """CLI configuration invalid or inconsistent."""
