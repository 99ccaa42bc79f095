"""Envelopes of activation-after-affine functions and LP bound tightening."""

from ._core import (
    Activation,
    Envelope,
    InconsistentBoundsError,
    InvalidArgument,
    LpNumericalError,
    Network,
    NetworkFormatError,
    NotStfeError,
    UnknownActivationError,
    activation_tags,
    conc_env_1d,
    gap_report,
    tie_point,
    tighten_all,
)

__all__ = [
    "Activation",
    "Envelope",
    "InconsistentBoundsError",
    "InvalidArgument",
    "LpNumericalError",
    "Network",
    "NetworkFormatError",
    "NotStfeError",
    "UnknownActivationError",
    "activation_tags",
    "conc_env_1d",
    "gap_report",
    "tie_point",
    "tighten_all",
]
