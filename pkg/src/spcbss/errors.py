"""Exception types shared across the package."""

__all__ = [
    "InvalidConfigError",
    "GenerationError",
    "SeparationFailureError",
    "DegenerateMatchError",
]


class InvalidConfigError(ValueError):
    """A configuration record violates one of its constraints."""


class GenerationError(RuntimeError):
    """Synthetic data generation could not satisfy its postconditions."""


class SeparationFailureError(RuntimeError):
    """The alternating estimation collapsed (persistently dead source)."""


class DegenerateMatchError(RuntimeError):
    """Source matching hit a near-zero diagonal; scaling is meaningless."""
