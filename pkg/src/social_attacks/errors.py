"""Exception hierarchy.

The CLI maps these onto exit codes: ``ConfigError`` -> 2,
``NumericError`` (and subclasses) -> 3, ``OSError`` -> 4.
"""


class SocialAttackError(Exception):
    """Base class for all package errors."""


class ConfigError(SocialAttackError, ValueError):
    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class TopologyError(SocialAttackError, ValueError):
    """Malformed or unusable network."""


class ModelError(SocialAttackError, ValueError):
    """Invalid PMF or observation model."""


class InfiniteDivergenceError(ModelError):
    """KL divergence would be infinite (support mismatch)."""


class ContractError(SocialAttackError, ValueError):
    """A caller violated a documented precondition."""


class RegimeError(ContractError):
    """Confidence regime does not match the requested construction."""


class NumericError(SocialAttackError, ArithmeticError):
    """Numerical failure: non-convergence, infeasibility, degenerate update."""


class ConvergenceError(NumericError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class DegenerateUpdateError(NumericError):
    """Zero likelihood mass at the observed symbol."""


class FeasibilityError(NumericError):
    """No distortion satisfying the misleading condition at the given epsilon."""
