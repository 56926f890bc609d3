"""Exception hierarchy shared by all modules."""


class SospecError(Exception):
    """Base class for library errors."""


class PreconditionError(SospecError, ValueError):
    """An input violates the documented precondition of an operation."""


class NonPositiveDefiniteMass(PreconditionError):
    """The Gram matrix of the trial basis is not positive definite."""


class OutsideDisk(PreconditionError):
    """A point is not inside the open disk spanned by a gap interval."""


class DegenerateGap(PreconditionError):
    """A gap endpoint is numerically on top of the point being enclosed."""


class EmptyExterior(PreconditionError):
    """No spectrum outside the interval was supplied."""


class PoleHit(PreconditionError):
    """A spectral point lands on the pole of a Moebius map."""


class InfeasibleMixing(PreconditionError):
    """A pollution target cannot be reached by mixing two eigenvectors."""


class OutsideAdmissibleRegion(PreconditionError):
    """A prescribed point lies outside the admissible set A(c1, c2, c3)."""


class UnsupportedOrder(PreconditionError):
    """Finite element order not in {3, 4, 5}."""


class PairingAmbiguity(SospecError):
    """Two conjugate pairs are equally close to a target eigenvalue."""


class SolverFailure(SospecError, RuntimeError):
    """A dense eigen- or singular value solver did not converge."""


EigensolverFailure = SolverFailure
