"""Exception types shared across the package."""


class SwitchNetError(Exception):
    """Base class for all package errors."""


class DataError(SwitchNetError):
    """Bad dataset content, malformed files, or impossible partitions."""


class RoutingError(SwitchNetError):
    """A group could not be routed under the switch's fallback policy."""


class TrainingError(SwitchNetError):
    """Training aborted (non-finite loss/parameters, bad hyperparameters)."""


class NetworkError(SwitchNetError):
    """Inconsistent network assembly or evaluation inputs."""


class AnalysisError(SwitchNetError):
    """Heatmap/attribution inputs violate their preconditions."""


class FederatedError(SwitchNetError):
    """Node construction or collection failed."""


class ConfigError(SwitchNetError):
    """Invalid experiment configuration (detected before any side effect)."""


class StageError(SwitchNetError):
    """A pipeline stage failed at runtime."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")
