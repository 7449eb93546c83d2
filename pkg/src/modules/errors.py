"""
Errors Module
=============

Exception hierarchy shared by all modules, plus the incident counter used to
expose clamped and floored numerical events without aborting a chain.
"""

from dataclasses import dataclass, fields


class SphericalModelError(ValueError):
    """Base class for every error raised by the toolkit"""


class DomainError(SphericalModelError):
    """Argument outside the domain of an operation"""


class DimensionMismatchError(SphericalModelError):
    """Incompatible vector or matrix shapes"""


class DegenerateCoordinateError(DomainError):
    """Inverse hyperspherical transform requested at a pole"""


class SingularCoordinateError(DomainError):
    """Hausdorff density evaluated where a prefix sum of squares vanishes"""


class StepSizeError(SphericalModelError):
    """Finite-difference step too small to resolve"""


class VoteDataError(SphericalModelError):
    """Malformed or unusable roll-call data"""


class ChainFormatError(SphericalModelError):
    """Unreadable, truncated or incompatible chain file"""


class IncompatibleChainsError(SphericalModelError):
    """Chains fitted to different data sets"""


class InitializationError(RuntimeError):
    """Non-finite initial MCMC state"""


@dataclass
class NumericalIncidentCounter:
    """Counts of numerical incidents absorbed instead of raised"""
    theta_floored: int = 0
    link_clamped: int = 0
    rejected_nonfinite: int = 0
    renormalized: int = 0

    @classmethod
    def from_dict(cls, counts):
        """Rebuild from a chain file's incident record; unknown keys are ignored"""
        names = {f.name for f in fields(cls)}
        return cls(**{k: int(v) for k, v in counts.items() if k in names})

    def merge(self, other):
        self.theta_floored += other.theta_floored
        self.link_clamped += other.link_clamped
        self.rejected_nonfinite += other.rejected_nonfinite
        self.renormalized += other.renormalized
        return self

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}
