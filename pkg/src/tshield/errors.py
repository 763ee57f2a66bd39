"""Exception hierarchy shared across the toolkit."""


class TshieldError(Exception):
    """Base class for all toolkit errors."""


class InvariantViolation(TshieldError):
    """A delay would exceed a location invariant.

    Carries the largest admissible delay so callers can delay up to the
    deadline and act there.
    """

    def __init__(self, max_delay):
        super().__init__(f"delay exceeds invariant; at most {max_delay} admissible")
        self.max_delay = max_delay


class NotEnabled(TshieldError):
    """Requested discrete action has no enabled edge."""


class TargetInvariantViolated(TshieldError):
    """Firing an edge would enter a location whose invariant fails."""


class NondeterministicSpec(TshieldError):
    """Specification automaton is not deterministic."""


class EmptyResult(TshieldError):
    """Symbolic successor is empty / generator produced nothing."""


class InitialStateLosing(TshieldError):
    """The initial state of a game is outside the winning region."""


class UnboundedRecoveryUndecided(TshieldError):
    """Could not certify that the unbounded-recovery strategy is stable."""


class FaultCapExceeded(TshieldError):
    """Fault-model enumeration exceeded the configured instance cap."""


class EmptyWinningRegion(TshieldError):
    """A finite safety game has no winning states at all."""


class TimeRegression(TshieldError):
    """An event carries a timestamp earlier than the session's clock."""


class UnknownLabel(TshieldError):
    """An event names an action the shield does not know."""


class ShieldStateCorrupt(TshieldError):
    """Session state left the winning region; the session must be abandoned."""


class ParseError(TshieldError):
    """A model or shield file failed to parse; `path` names the offender."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ValidationError(TshieldError):
    """A parsed document violates a structural invariant."""
