"""Exception hierarchy. Every error carries the pipeline stage and a remedy hint."""
from __future__ import annotations


class DiffboundError(Exception):
    """Base class; ``stage`` names the pipeline step that failed."""

    stage = "compute"
    hint = ""

    def __init__(self, message: str, *, stage: str | None = None, hint: str | None = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage
        if hint is not None:
            self.hint = hint


class DataError(DiffboundError, ValueError):
    stage = "load"
    hint = "check the input file and column mapping"


class FitError(DiffboundError, RuntimeError):
    stage = "propensity"
    hint = "review covariates for collinearity"


class SeparationError(FitError):
    hint = "a covariate perfectly predicts treatment; drop or coarsen it, or pass a ridge penalty"


class EstimationError(DiffboundError, RuntimeError):
    stage = "bounds"
    hint = "check that both differential cells have enough units"


class KernelMassError(EstimationError):
    stage = "cate"
    hint = "move x0 inside the covariate support or widen the bandwidth"


class InferenceError(DiffboundError, RuntimeError):
    stage = "inference"
    hint = "increase n or the number of bootstrap draws"
