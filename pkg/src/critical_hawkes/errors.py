"""Exception hierarchy shared by every module of the package."""


class CriticalHawkesError(Exception):
    """Base class for all package errors."""


class ConfigError(CriticalHawkesError, ValueError):
    """Invalid or unparseable model configuration.

    ``key`` and ``line`` locate the offending entry when known.
    """

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NonCriticalAlpha(CriticalHawkesError, ValueError):
    pass


class UnsupportedIntensity(CriticalHawkesError, ValueError):
    pass


class EventBudgetExceeded(CriticalHawkesError, RuntimeError):
    def __init__(self, n_events, budget, t_micro):
        self.n_events = n_events
        self.budget = budget
        self.t_micro = t_micro
        super().__init__(
            f"path abandoned after {n_events} events at micro time {t_micro:.6g} "
            f"(budget {budget})"
        )


class NonFiniteState(CriticalHawkesError, FloatingPointError):
    pass


class NonFinitePath(CriticalHawkesError, FloatingPointError):
    pass


class NotApplicable(CriticalHawkesError, ValueError):
    pass


class IntegrationFailure(CriticalHawkesError, ArithmeticError):
    pass


class InsufficientReplicas(CriticalHawkesError, ValueError):
    pass


class IllConditioned(CriticalHawkesError, ArithmeticError):
    pass
