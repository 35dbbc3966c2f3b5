"""Exception hierarchy shared by all mars_games modules."""


class MarsGamesError(Exception):
    pass


class ParameterError(MarsGamesError, ValueError):
    """Generator or run parameters outside the supported domain."""


class DomainError(MarsGamesError, ValueError):
    pass


class ZeroMarginal(MarsGamesError):
    """Conditioning on an own-action recommendation that has zero probability."""


class ZeroCount(MarsGamesError):
    """Bonus requested for a state-action pair that was never visited."""


class NotProductPolicy(MarsGamesError, ValueError):
    pass


class SolverFailure(MarsGamesError):
    pass


class Unsupported(SolverFailure):
    pass


class Infeasible(SolverFailure):
    pass


class Unbounded(SolverFailure):
    pass


class IterationLimit(SolverFailure):
    pass


class InsufficientData(MarsGamesError, ValueError):
    pass


class ConfigError(MarsGamesError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
