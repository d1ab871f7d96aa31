"""Exception types shared across the package."""


class SramMarginError(Exception):
    """Base class for all package-specific failures."""


class SolverError(SramMarginError):
    """A DC solve (bisection or Newton) failed to reach its tolerance."""


class DivergenceError(SramMarginError):
    """A transient integration produced non-finite node voltages."""


class ConfigError(SramMarginError):
    """An experiment configuration file is malformed or inconsistent."""
