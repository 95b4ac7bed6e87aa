from typing import List, Optional


class SimulationError(ValueError):
    """Base class for every error raised by the simulator"""


class ConfigError(SimulationError):
    """Configuration file could not be parsed or violates an invariant"""

    def __init__(self, message: str, problems: Optional[List[str]] = None):
        self.problems = problems or [message]
        super().__init__(message)


class ChannelDomainError(SimulationError):
    pass


class SchemeError(SimulationError):
    pass


class PowerModelError(SimulationError):
    pass


class SweepError(SimulationError):
    pass
