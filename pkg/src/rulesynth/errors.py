"""Exception hierarchy shared by every rulesynth module."""


class RuleSynthError(Exception):
    """Base class for all toolkit errors."""


class GrammarSyntaxError(RuleSynthError, ValueError):
    """Grammar text could not be parsed (missing arrow, bad bracket, ...)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnboundVariable(GrammarSyntaxError):
    def __init__(self, name, line=None):
        self.name = name
        super().__init__(f"unbound variable {name!r} on right hand side", line)


class DuplicateVariable(GrammarSyntaxError):
    def __init__(self, name, line=None):
        self.name = name
        super().__init__(f"variable {name!r} appears twice on left hand side", line)


class NegativeLiteral(GrammarSyntaxError):
    pass


class EvaluationError(RuleSynthError):
    """A grammar failed to produce an output for some input."""


class NoMatch(EvaluationError):
    def __init__(self, words):
        self.words = tuple(words)
        super().__init__(f"no rule matches {' '.join(self.words)!r}")


class BudgetExceeded(EvaluationError):
    pass


class NotRepresentable(RuleSynthError, ValueError):
    pass


class PoolExhausted(RuleSynthError, ValueError):
    pass


class Unsatisfiable(RuleSynthError):
    pass


class FormatError(RuleSynthError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownSplit(RuleSynthError, ValueError):
    pass


class ConfigError(RuleSynthError, ValueError):
    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class SpawnError(RuleSynthError):
    """An external proposer process could not be started."""
