"""
Errors Module
Exception hierarchy shared by the simulation engine, scenarios and the CLI
"""


class RibbonError(Exception):
    """
    Base class for every error raised by the ribbon engine.

    Each subclass declares a ``category`` string (used in result dictionaries
    and log lines) and the process ``exit_code`` the CLI maps it onto.
    """

    category = "internal"
    exit_code = 3

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_result(self):
        """
        Convert the error into a failed result dictionary.

        Returns:
            dict: {'success': False, 'error': category, 'error_message': message}
        """
        return {
            'success': False,
            'error': self.category,
            'error_message': str(self),
        }


# Configuration

class ConfigurationError(RibbonError, ValueError):
    """Invalid physical or solver parameters"""

    category = "config"
    exit_code = 2


class SchemaError(ConfigurationError):
    """A benchmark document violates the schema at ``field``"""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}", field=field)
        self.field = field


class UnitsError(ConfigurationError):
    """A dimensioned field is missing a unit or uses an unknown one"""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}", field=field)
        self.field = field


# Kinematics

class KinematicsError(RibbonError):
    category = "kinematics"


class DegenerateEdge(KinematicsError):
    """An edge collapsed below the length guard"""


class AntiparallelTangents(KinematicsError):
    """Parallel transport between opposite tangents is undefined"""


class AntiparallelEdges(KinematicsError):
    """Consecutive edges fold back onto each other"""


# Energy models

class ModelDomainError(RibbonError):
    category = "model"


class GeneratorOverrun(ModelDomainError):
    """Wunderlich ruling lines leave the strip (|W eta'| reached 2)"""


class DivisionGuard(ModelDomainError):
    """Twist at an inflection point makes eta = tau / kappa undefined"""


# Solver

class SolverError(RibbonError):
    category = "solver"


class SolveFailed(SolverError):
    """Direct, regularized and pseudo-inverse solves all failed"""


class StepFloorExceeded(SolverError):
    """Newton did not converge at the minimum step size"""


# Scenarios

class ScenarioError(RibbonError):
    category = "scenario"

    def __init__(self, message, trace=None, **details):
        super().__init__(message, **details)
        self.trace = trace


class BucklingNotTriggered(ScenarioError):
    """Compression finished without a buckled arch"""


class BranchLost(ScenarioError):
    """The homotopy width ramp fell back onto the symmetric branch"""


# Files

class IoError(RibbonError):
    category = "io"


VALIDATION_EXIT_CODE = 4
