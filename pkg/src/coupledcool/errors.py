"""Exception hierarchy.

Every error carries a ``kind`` (used verbatim in the CLI's JSON error record)
and a ``context`` dict with the numbers that triggered it.
"""

from __future__ import annotations


class CoolingError(Exception):
    """Base class for all physics and numerics errors raised by the package."""

    kind = "CoolingError"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def as_record(self) -> dict:
        return {"kind": self.kind, "message": self.message, "context": self.context}


class InvalidParam(CoolingError, ValueError):
    kind = "InvalidParam"

    def __init__(self, name: str, reason: str):
        super().__init__(f"invalid parameter {name!r}: {reason}", name=name, reason=reason)
        self.name = name
        self.reason = reason


class NoConvergence(CoolingError):
    kind = "NoConvergence"

    def __init__(self, iterations: int, last_residual: float):
        super().__init__(
            f"equilibrium iteration did not converge after {iterations} iterations "
            f"(last residual {last_residual:.3e} m)",
            iterations=iterations,
            last_residual=last_residual,
        )
        self.iterations = iterations
        self.last_residual = last_residual


class UnstableSystem(CoolingError):
    kind = "UnstableSystem"


class DegenerateModes(CoolingError):
    kind = "DegenerateModes"


class QuadratureFailure(CoolingError):
    kind = "QuadratureFailure"

    def __init__(self, tolerance_achieved: float):
        super().__init__(
            f"quadrature reached only relative accuracy {tolerance_achieved:.3e}",
            tolerance_achieved=tolerance_achieved,
        )
        self.tolerance_achieved = tolerance_achieved


class SingularSolve(CoolingError):
    kind = "SingularSolve"


class StepTooLarge(CoolingError):
    kind = "StepTooLarge"


class NoJointOptimum(CoolingError):
    kind = "NoJointOptimum"


class AllUnstable(CoolingError):
    kind = "AllUnstable"
