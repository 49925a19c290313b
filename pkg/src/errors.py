"""
Error types
Every failure the toolkit raises, grouped by the CLI exit code it maps to
"""
from typing import Optional


class NoetherKitError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 3


class ConfigError(NoetherKitError):
    """Usage or configuration problem"""

    exit_code = 2


class ExprSyntaxError(ConfigError):
    """Expression text does not follow the grammar"""

    def __init__(self, message: str, offset: int, expected: Optional[str] = None):
        self.offset = offset
        self.expected = expected
        hint = f", expected {expected}" if expected else ""
        super().__init__(f"{message} at offset {offset}{hint}")


class UnknownFunctionError(ConfigError):
    """Call of a function name outside the built-in set"""


class ArityError(ConfigError):
    """Function called with the wrong number of arguments"""


class DefinitionError(ConfigError):
    """Malformed system definition"""


class NumericError(NoetherKitError):
    """Numeric or domain failure during evaluation"""

    exit_code = 3


class DomainError(NumericError):
    """Evaluation left the domain of an operation"""

    def __init__(self, message: str, node: object = None):
        self.node = node
        where = f" in {node}" if node is not None else ""
        super().__init__(f"{message}{where}")


class UnboundVariableError(NumericError):
    """Expression references a variable with no binding"""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Unbound variable: {name}")


class SingularMatrixError(NumericError):
    """Linear system too close to singular"""


class ConvergenceError(NumericError):
    """Iteration stopped without reaching tolerance"""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (last residual {residual:.3e})")


class StepSizeUnderflowError(NumericError):
    """Adaptive step shrank below the representable minimum"""

    def __init__(self, t: float, h: float):
        self.t = t
        self.h = h
        super().__init__(f"Step size underflow at t={t:.17g} (h={h:.3e}), likely near a singularity")


class ExcludedRegionError(NumericError):
    """Phase point outside U- and U+"""

    def __init__(self, m12: float, energy: float):
        self.m12 = m12
        self.energy = energy
        super().__init__(f"Point is in the excluded region (M12={m12:.17g}, H={energy:.17g})")


class ChartDomainError(NumericError):
    """Action-angle chart inequality violated"""

    def __init__(self, inequality: str, value: float):
        self.inequality = inequality
        self.value = value
        super().__init__(f"Chart domain violated: {inequality} (value {value:.17g})")
