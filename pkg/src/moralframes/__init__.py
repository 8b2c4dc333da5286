"""Joint prediction of moral-foundation labels and entity moral roles via
weighted logic rules, MAP inference, and structured learning."""

__version__ = "0.1.0"

from .taxonomy import (  # noqa: F401
    MoralFoundation,
    MoralRole,
    Polarity,
    role_polarity,
    role_to_mf,
)
