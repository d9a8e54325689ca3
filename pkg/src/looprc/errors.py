"""Exception types shared across the library.

Plain ``ValueError`` is raised for invalid arguments (bad shapes, out-of-range
parameters); the classes here cover the failure modes that callers are
expected to branch on, and that the CLI maps to distinct exit codes.
"""


class LoopRCError(Exception):
    """Base class for library-specific errors."""


class NumericOverflowError(LoopRCError):
    """Loop state became non-finite during a run.

    Only reachable for pathological gain/filter settings; carries the
    1-based global chip index at which the state first left the finite range.
    """

    def __init__(self, chip_index: int):
        self.chip_index = chip_index
        super().__init__(f"non-finite loop state at chip {chip_index}")


class SingularMatrixError(LoopRCError):
    """Normal equations are numerically singular (lambda = 0 only)."""


class ConfigError(LoopRCError):
    """Experiment configuration is invalid or inconsistent."""


class DataFormatError(LoopRCError):
    """A data file is missing, truncated, or malformed."""


class ArtifactError(DataFormatError):
    """A model artifact failed a version or integrity check."""


class StageError(LoopRCError):
    """A pipeline stage failed; carries the stage name and datapoint index.

    The original exception is chained as ``cause`` so callers (and the
    CLI's exit-code mapping) can branch on what actually went wrong.
    """

    def __init__(self, stage: str, cause: BaseException, datapoint=None):
        self.stage = stage
        self.datapoint = datapoint
        self.cause = cause
        where = f" (datapoint {datapoint})" if datapoint is not None else ""
        super().__init__(f"stage '{stage}'{where}: {cause}")
