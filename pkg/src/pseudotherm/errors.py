"""Exception types shared across the package.

Invalid arguments raise plain ValueError everywhere; the classes below mark
failure modes a caller may want to catch and handle (retry with a different
bracket, mark a grid cell infeasible, ...).
"""


class SolverFailure(RuntimeError):
    """An iterative solver (eigensolver, root finder) did not converge."""


class NoSolutionError(SolverFailure):
    """A root was requested in a bracket that does not contain one."""

    def __init__(self, message, attained_min=None, attained_max=None):
        super().__init__(message)
        self.attained_min = attained_min
        self.attained_max = attained_max


class InvalidPointError(RuntimeError):
    """A finite-difference stencil touched a state point with no valid potentials."""


class ZeroPartitionError(ZeroDivisionError):
    """A thermal average was requested where the partition function vanishes."""


class ClassificationError(RuntimeError):
    """A stability classification violated one of its defining inequalities."""


class CycleInfeasible(RuntimeError):
    """A thermodynamic cycle corner could not be realized."""

    def __init__(self, message, leg=None):
        super().__init__(message)
        self.leg = leg


class InfeasibleRequest(RuntimeError):
    """A CLI request that is well-formed but cannot be satisfied (exit code 2)."""
