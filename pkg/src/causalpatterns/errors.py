"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid user input: malformed files, out-of-range parameters, mismatched shapes."""


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and the original cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
