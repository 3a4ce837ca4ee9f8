"""Exception types shared across the package."""


class FleetPlanError(Exception):
    """Base class for package-specific failures."""


class NumericalError(FleetPlanError):
    """Simplex breakdown: tiny pivots, cycling guard, or feasibility drift."""


class InstanceParseError(FleetPlanError):
    """Instance file is not readable as the documented JSON document."""


class InstanceValidationError(FleetPlanError):
    """Instance data violates a model invariant; message names the field."""


class BudgetError(FleetPlanError):
    """Budget cannot open a profitable initial state."""


class UndefinedTransitionError(FleetPlanError):
    """Transition time requested from a state with nonpositive profit."""


class NoScheduleError(FleetPlanError):
    """No opening sequence reaches the target state."""


class ConfigurationError(FleetPlanError):
    """A required profit bound level is missing or nonpositive."""
