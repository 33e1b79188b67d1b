# -*- coding: utf-8 -*-
"""
Error hierarchy for cmpslab
Library code raises these; the CLI layer maps them to exit statuses.
"""


class CmpsError(Exception):
    """Base class for every cmpslab error"""


# ==================== Linear algebra ====================
class SolverFailure(CmpsError):
    """Eigen-decomposition did not converge or produced non-finite values"""


class ShapeMismatch(CmpsError):
    """Matrix shapes are incompatible with the operation"""


class NoNullVector(CmpsError):
    """No eigenvalue lies below the null-space threshold"""

    def __init__(self, smallest, threshold):
        self.smallest = smallest
        self.threshold = threshold
        super().__init__(f"smallest |eigenvalue| {smallest:.3e} >= threshold {threshold:.3e}")


class DegenerateNullSpace(CmpsError):
    """More than one eigenvalue lies below the null-space threshold"""

    def __init__(self, count, threshold):
        self.count = count
        self.threshold = threshold
        super().__init__(f"{count} eigenvalues below threshold {threshold:.3e}: steady state is not unique")


class NonPositiveSteadyState(CmpsError):
    """Steady state or a local observable is negative beyond numerical noise"""


# ==================== Variational engine ====================
class LayoutMismatch(CmpsError):
    """Parameter vector or ansatz does not match the layout"""


class InfeasiblePoint(CmpsError):
    """Objective cannot be evaluated at this parameter point"""


class NotConverged(CmpsError):
    """Optimizer stopped without meeting its tolerances"""

    def __init__(self, result, message="optimization did not converge"):
        self.result = result
        super().__init__(message)


class AllRestartsInfeasible(CmpsError):
    """Every restart failed to produce a feasible point"""


# ==================== Luttinger extraction ====================
class SurfaceError(CmpsError):
    """Energy surface violates its sampling requirements"""


class SweepPointFailed(CmpsError):
    """One or more sweep points failed to converge"""

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__(f"sweep points failed: {self.failed}")


class OutOfHull(CmpsError):
    """Evaluation point lies outside the sampled region"""


class NegativeCompressibility(CmpsError):
    """Second derivative of the energy surface is not positive"""


class UnequalFilling(CmpsError):
    """Coupled extraction requires equal species densities"""


# ==================== Bethe oracle ====================
class BetheNoConvergence(CmpsError):
    """Bethe integral equation did not reach the requested accuracy"""


# ==================== Runner ====================
class ConfigError(CmpsError):
    """Run configuration failed validation"""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


class ConfigHashMismatch(CmpsError):
    """Run directory config does not match its recorded hash"""


class MissingInputs(CmpsError):
    """Report inputs are missing from a run directory"""

    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"missing inputs: {self.missing}")


class SeriesFormatError(CmpsError):
    """Report series CSV does not match the (x, y, series) layout"""
