"""Exception hierarchy shared by all modules."""


class SmallScaleError(Exception):
    pass


class InvalidArgument(SmallScaleError, ValueError):
    pass


class SizeLimitError(SmallScaleError, ValueError):
    pass


class RetryableFailure(SmallScaleError, RuntimeError):
    """A randomized routine missed its postcondition; rerun with a new seed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class ValidationFailure(SmallScaleError, RuntimeError):
    """A constructed object failed its structural checks. `stats` carries the measurements."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats or {}


class PipelineFailure(SmallScaleError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
