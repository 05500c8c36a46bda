class MedicError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(MedicError, ValueError):
    """Inconsistent architecture, schedule or experiment settings."""


class InputError(MedicError, ValueError):
    """Malformed or out-of-contract arguments."""


class LogParseError(MedicError, ValueError):
    """A dataset, log or configuration file could not be parsed."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class ExperimentError(MedicError, RuntimeError):
    """A stage of an experiment run failed."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")
