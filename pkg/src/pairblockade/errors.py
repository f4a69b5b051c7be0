"""Exception hierarchy shared by the engine and the command line runner."""


class ConfigError(ValueError):
    """Bad user input: unknown key, malformed value, violated parameter invariant."""


class NumericalError(RuntimeError):
    """An integration, solve or invariant check failed."""


class IntegrationError(NumericalError):
    pass


class NormDriftError(IntegrationError):
    pass


class PositivityError(IntegrationError):
    pass


class DegenerateSteadyStateError(NumericalError):
    pass


class NoEmissionError(NumericalError):
    pass
