"""Exception types shared across the package.

The CLI maps these onto process exit codes; library code raises them
directly.
"""


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration."""


class DataError(Exception):
    """Malformed or out-of-bounds input data."""


class NumericalError(Exception):
    """Linear-algebra failure that survived the jitter escalation."""


class ConvergenceError(Exception):
    """Sampler failed its convergence check (R-hat above threshold)."""
