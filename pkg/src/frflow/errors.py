"""Exception taxonomy shared across the package."""

from __future__ import annotations


class FrflowError(Exception):
    """Base class for all package errors."""


class GridError(FrflowError):
    """Invalid grid bounds or node count."""


class MeasureError(FrflowError):
    """Invalid density values: negative, non-finite, zero mass, bad std."""


class GridMismatchError(FrflowError):
    """Operands live on different grids."""


class RatioUnboundedError(FrflowError):
    """Density ratio m/m' unbounded: m > 0 at a node where m' = 0."""


class ZeroDensityError(FrflowError):
    """Strictly positive density required but a zero node was found."""


class FlowError(FrflowError):
    """Base class for runtime failures inside a flow integration."""


class PositivityError(FlowError):
    """A step produced (or would produce) a negative density."""


class CFLError(FlowError):
    """Time step exceeds the stability guard of a finite-volume step."""


class NonFiniteError(FlowError):
    """Non-finite value encountered mid-flow."""


class TraceError(FrflowError):
    """Trace unusable for the requested diagnostic (too short, non-uniform)."""


class ConfigError(FrflowError):
    """Experiment configuration could not be parsed or validated."""
