"""Exception types shared across the package."""


class GibemError(Exception):
    """Base class for all errors raised by this package."""


class ParameterDomainError(GibemError, ValueError):
    """A parameter value lies outside the knot vector's domain."""


class SplineError(GibemError, ValueError):
    """Invalid spline data or an unsupported refinement request."""


class GeometryError(GibemError, ValueError):
    """Invalid surface or trimming data."""


class SingularFrameError(GeometryError):
    """The surface tangents are (numerically) parallel at the evaluation point."""


class DegenerateTrimError(GeometryError):
    """The trim map's Jacobian determinant is not strictly positive."""


class KernelSingularityError(GibemError, ValueError):
    """Source and field point coincide; the kernel is singular there."""


class QuadratureError(GibemError, ValueError):
    """Invalid quadrature request (unsupported order, empty region, ...)."""


class SingularMatrixError(GibemError):
    """LU factorization hit a zero pivot.

    The offending pivot index is stored on the exception.
    """

    def __init__(self, pivot_index: int):
        self.pivot_index = pivot_index
        super().__init__(f"matrix is singular (zero pivot at index {pivot_index})")


class ModelError(GibemError, ValueError):
    """A boundary model is inconsistent or unsupported."""


class ModelFormatError(ModelError):
    """A model file violates the schema.

    ``location`` is a JSON-pointer-style path to the offending element.
    """

    def __init__(self, message: str, location: str = ""):
        self.location = location
        prefix = f"{location}: " if location else ""
        super().__init__(prefix + message)


class UnsupportedModelError(ModelError):
    """The model describes a configuration the solver does not handle."""


class CollocationMismatchWarning(UserWarning):
    """Nearby collocation points did not merge; patch interfaces may not match."""
