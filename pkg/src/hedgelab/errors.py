"""Exception hierarchy shared across the package."""


class HedgeLabError(Exception):
    """Base class for all package errors."""


class DomainError(HedgeLabError, ValueError):
    """An input is outside the domain of an operation."""


class ConfigError(HedgeLabError, ValueError):
    """A configuration is inconsistent or unsupported."""


class ContractError(HedgeLabError):
    """A caller violated an interface contract (e.g. nonzero terminal row)."""


class TrainingError(HedgeLabError):
    """Training produced a non-finite loss or gradient.

    ``path_index`` points at the offending sample within the batch when
    known; ``checkpoint`` carries the last finite state when the trainer
    aborts a run.
    """

    def __init__(self, message, path_index=None, checkpoint=None):
        super().__init__(message)
        self.path_index = path_index
        self.checkpoint = checkpoint
