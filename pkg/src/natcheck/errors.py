"""Exception hierarchy shared across the package.

Every user-facing failure derives from NatcheckError so the CLI can turn
any of them into a diagnostic plus exit code 2 without a traceback.
"""


class NatcheckError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(NatcheckError):
    """Syntax error in any of the text formats (models, guards, formulas)."""

    def __init__(self, message, line=None, col=None, source=None):
        self.line = line
        self.col = col
        self.source = source
        loc = ""
        if source:
            loc += f"{source}:"
        if line is not None:
            loc += f"{line}:"
            if col is not None:
                loc += f"{col}:"
        super().__init__(f"{loc} {message}" if loc else message)


class GrammarLayerError(ParseError):
    """A bare atom appeared at the top (knowledge) layer of a guard."""


class UnknownFunctionError(NatcheckError):
    def __init__(self, name):
        super().__init__(f"unknown function {name!r}")
        self.name = name


class ArityMismatchError(NatcheckError):
    def __init__(self, name, expected, got):
        super().__init__(f"function {name!r} expects {expected} argument(s), got {got}")
        self.name = name


class EvaluationDomainError(NatcheckError):
    """An evaluator was applied outside its domain (division by zero etc.)."""


class ModelError(NatcheckError):
    """Violation of a structural invariant of a game model."""


class NonUniformLegalityError(ModelError):
    def __init__(self, agent, states):
        super().__init__(
            f"agent {agent!r} has different legal actions on observationally "
            f"equivalent states {sorted(states)}"
        )
        self.agent = agent
        self.states = states


class PartialTransitionError(ModelError):
    def __init__(self, state, profile):
        super().__init__(f"no transition defined at state {state!r} for profile {profile}")
        self.state = state
        self.profile = profile


class WeightOutOfRangeError(ModelError):
    def __init__(self, state, prop, value):
        super().__init__(f"weight of {prop!r} at {state!r} is {value}, outside [-1, 1]")


class IllegalActionError(ModelError):
    def __init__(self, agent, action, state):
        super().__init__(f"action {action!r} is not legal for agent {agent!r} at state {state!r}")


class UnknownFixtureError(NatcheckError):
    def __init__(self, name):
        super().__init__(f"unknown fixture {name!r}; available: G1, G1', G2, G2'")


class UnknownPropositionError(NatcheckError):
    def __init__(self, prop):
        super().__init__(f"proposition {prop!r} is not declared in the model")
        self.prop = prop


class StrategyError(NatcheckError):
    """Invalid natural strategy (structure, legality or uniformity)."""


class EmptyPoolError(NatcheckError):
    def __init__(self):
        super().__init__("guard pool is empty")


class UnresolvedStrategyNameError(NatcheckError):
    def __init__(self, name):
        super().__init__(f"no registered strategy named {name!r}")


class KindMismatchError(NatcheckError):
    """A strategy's memory kind disagrees with the evaluation semantics."""


class NotASentenceError(NatcheckError):
    def __init__(self, free):
        super().__init__(f"formula is not a sentence; free names: {sorted(map(str, free))}")
        self.free = free


class PositionOutOfRangeError(NatcheckError):
    def __init__(self, x, n):
        super().__init__(f"rank position {x} out of range 2..{n}")


class SpecInvariantError(NatcheckError):
    """An auction specification violates one of its declared invariants."""


class StateCapExceededError(SpecInvariantError):
    def __init__(self, estimate, cap):
        super().__init__(
            f"auction model would have about {estimate} states, over the cap of {cap}; "
            f"raise state_cap explicitly to proceed"
        )
        self.estimate = estimate


class UnknownCheckError(NatcheckError):
    def __init__(self, name, known):
        super().__init__(f"unknown check {name!r}; known checks: {', '.join(sorted(known))}")
