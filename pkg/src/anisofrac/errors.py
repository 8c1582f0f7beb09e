"""Exception hierarchy shared by all modules.

Each class carries an ``exit_code`` so the command line front end can map
failures to distinct process exit statuses.
"""


class AnisofracError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ParameterError(AnisofracError, ValueError):
    """An argument violates a documented precondition."""

    exit_code = 3


class DomainError(AnisofracError, ValueError):
    """A point lies outside the domain of the requested map (e.g. x = 0)."""

    exit_code = 4


class QuadratureError(AnisofracError, RuntimeError):
    """Numerical integration failed to reach its target."""

    exit_code = 5


class SolverError(AnisofracError, RuntimeError):
    """Linear solve, eigen-iteration or bracketing failure."""

    exit_code = 6


class BracketError(SolverError):
    """The indicator has no sign change inside the requested bracket."""

    exit_code = 7


class ConfigError(AnisofracError):
    """Configuration text is malformed or fails validation.

    ``problems`` holds every violation found, not only the first one.
    """

    exit_code = 2

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
