"""Exception hierarchy shared across the package.

CLI exit codes: UsageError -> 2, HypothesisNotSatisfied -> 3, BudgetExceeded -> 4.
"""


class WeilradError(Exception):
    pass


class UsageError(WeilradError):
    """Caller misuse: bad arguments, mismatched handles, malformed input."""


class MismatchedAlgebras(UsageError):
    pass


class UnsupportedCharacteristic(UsageError):
    """Operation only defined in characteristic 2 (squares ideal and friends)."""


class HypothesisNotSatisfied(WeilradError):
    """A theorem-level hypothesis is violated; no prediction is made."""


class BudgetExceeded(WeilradError):
    """Exhaustive enumeration refused; carries the exact point count."""

    def __init__(self, count: int, budget: int):
        super().__init__(f"enumeration of {count} elements exceeds budget {budget}")
        self.count = count
        self.budget = budget


class NoWitness(WeilradError):
    """The requested witness does not exist for this configuration."""


class InternalError(WeilradError):
    """An internal invariant was violated (a bug, not caller error)."""
