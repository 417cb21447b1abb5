"""Exception types raised across the package.

Every error derives from :class:`PovmError` (itself a ``ValueError``) so that
callers can catch the whole family at once.  The CLI maps the two groups
:class:`DomainError` and :class:`ParseError` onto distinct exit codes.
"""


class PovmError(ValueError):
    """Base class of all package errors."""


class DomainError(PovmError):
    """An input violates a mathematical invariant (exit code 2 in the CLI)."""


class InfeasibleRequest(PovmError):
    """A generation or reconstruction request has no solution (exit code 4)."""


class ParseError(PovmError):
    """A file could not be decoded into the shared JSON schema (exit code 3)."""


# numerics
class NotHermitian(DomainError):
    pass


class NotPsd(DomainError):
    pass


class Singular(DomainError):
    pass


# observable
class DimensionMismatch(DomainError):
    pass


class InvalidPovm(DomainError):
    pass


class InvalidState(DomainError):
    pass


class BadPartition(DomainError):
    pass


# certify
class BadBasis(DomainError):
    pass


class NotRank1(DomainError):
    pass


class DecompositionResidual(DomainError):
    """Eigenvalue-1 was certified but the clean decomposition does not close."""


class SubsetBlowup(DomainError):
    pass


class CertificateInconsistency(DomainError):
    """Two certificates that must agree on every input disagree."""


# process
class InvalidKernel(DomainError):
    pass


class NotUnital(DomainError):
    pass


class NotPvm(DomainError):
    pass


class AbsoluteContinuityViolated(DomainError):
    pass


# instrument
class InvalidInstrument(DomainError):
    pass


class BadStates(DomainError):
    pass


class MarginMismatch(DomainError):
    pass


class BlockResidual(DomainError):
    pass


class NotExtreme(DomainError):
    pass


class NotJointlyMeasurable(InfeasibleRequest):
    pass


# generate
class InfeasibleRanks(InfeasibleRequest):
    pass


class SingularS(InfeasibleRequest):
    pass
