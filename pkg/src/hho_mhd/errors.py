"""Exception types raised across the package."""


class HHOError(Exception):
    """Base class for all package errors."""


class MeshParseError(HHOError):
    pass


class TopologyError(HHOError):
    pass


class GeometryError(HHOError):
    pass


class ConditioningError(HHOError):
    pass


class AssemblyError(HHOError):
    pass


class CondensationError(HHOError):
    def __init__(self, cell, msg=None):
        self.cell = cell
        super().__init__(msg or f"singular eliminated block in cell {cell}")


class SolverError(HHOError):
    pass


class NonConvergenceError(SolverError):
    def __init__(self, history, msg=None):
        self.history = list(history)
        super().__init__(msg or f"Newton did not converge after {len(history) - 1} iterations")


class DegenerateProblemError(HHOError):
    pass
