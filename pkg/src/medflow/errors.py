"""Exception and warning types shared across the package."""


class MedflowError(Exception):
    """Base class for package-specific errors."""


class ConfigError(MedflowError):
    """Invalid or inconsistent configuration."""


class DataError(MedflowError):
    """Malformed input records."""


class IngestionError(DataError):
    """A file failed schema or completeness checks on load."""


class SingularDesignError(MedflowError):
    """Design matrix is rank deficient."""


class DegenerateDataError(MedflowError):
    """Response vector carries no usable signal (constant, or all zero)."""


class DegenerateDensityError(MedflowError):
    """A fitted conditional density collapsed (residual SD near zero)."""


class InsufficientPopulationError(MedflowError):
    """Grid population cannot satisfy the requested neighborhood size."""


class DegenerateInputError(MedflowError):
    """Input carries no variation where variation is required."""


class InsufficientDataError(MedflowError):
    """Too few observations for the requested operation."""


class ModelSpecificationError(MedflowError):
    """A structural equation produced a probability outside (0, 1)."""


class LogDomainError(MedflowError):
    """A log contrast was requested for a non-positive expectation."""


class OracleSizeError(MedflowError):
    """Exact enumeration would exceed the state-space cap."""


class CptValidationError(MedflowError):
    """A conditional probability table fails normalization or positivity."""


class BootstrapError(MedflowError):
    """Too many bootstrap replicates failed."""


class ScenarioError(MedflowError):
    """Too many sensitivity simulations failed at one scenario point."""


class SeparationWarning(UserWarning):
    """Logistic fit shows signs of (quasi-)separation."""


class PositivityWarning(UserWarning):
    """Fitted denominator probabilities fell below the positivity floor."""
