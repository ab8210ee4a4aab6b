"""Exception hierarchy shared by the analysis modules and the CLI.

InputError covers anything wrong with what the caller supplied (exit 2).
ComputationRefused covers valid input that the mathematics declines to
answer (exit 1), e.g. asking for a stationary law without a positive
recurrence certificate.
"""

from typing import Optional


class ProcessError(Exception):
    """Base class for every library error."""
    pass


class InputError(ProcessError):
    pass


class ComputationRefused(ProcessError):
    pass


# --- Model construction ---

class EmptyPrefix(InputError):
    def __init__(self):
        super().__init__("rate profile prefix must contain at least one row")


class NegativeRate(InputError):
    def __init__(self, site: int, field: str, value: float):
        self.site = site
        self.field = field
        self.value = value
        super().__init__(f"rate {field} at site {site} must be finite and >= 0, got {value!r}")


class Mu0NotZero(InputError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"site 0 must have mu = 0, got {value!r}")


class ZeroDeathRate(InputError):
    def __init__(self, site: int):
        self.site = site
        super().__init__(f"mu must be > 0 at every site i >= 1; site {site} has mu = 0")


class ZeroTotalRate(InputError):
    def __init__(self, site: int):
        self.site = site
        super().__init__(f"total jump rate at site {site} is 0; rates must be bounded away from 0")


class BadRowLength(InputError):
    def __init__(self, where: str, expected: int, got: int):
        super().__init__(f"{where}: expected {expected} entries (mu + R lambdas), got {got}")


class BadWindow(InputError):
    pass


class TooSmall(InputError):
    def __init__(self, n: int, minimum: int):
        self.n = n
        self.minimum = minimum
        super().__init__(f"truncation level {n} is below the minimum {minimum}")


class NotAnExcursion(InputError):
    pass


# --- Model files and command line ---

class ModelFileError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, location: str, message: str):
        self.location = location
        self.message = message
        super().__init__(f"parse error at {location}: {message}")


class SchemaError(InputError):
    def __init__(self, field: str, message: Optional[str] = None):
        self.field = field
        self.message = message or "invalid value"
        super().__init__(f"schema error in {field}: {self.message}")


class RunSpecError(InputError):
    pass


class OutputError(InputError):
    def __init__(self, path, reason: str):
        self.path = path
        super().__init__(f"cannot write report to {path}: {reason}")


# --- Refusals ---

class NotPositiveRecurrent(ComputationRefused):
    def __init__(self, verdict: str):
        self.verdict = verdict
        super().__init__(
            f"positive recurrence is not certified for this model (verdict: {verdict}); "
            "no stationary distribution is reported"
        )


class Diverged(ComputationRefused):
    def __init__(self, partial_sum: float, n: int):
        self.partial_sum = partial_sum
        self.n = n
        super().__init__(f"series partial sum exceeded the overflow guard at n={n} ({partial_sum:.3e})")


class NoConvergence(ComputationRefused):
    def __init__(self, iterations: int):
        self.iterations = iterations
        super().__init__(f"power iteration did not converge after {iterations} iterations")


class SingularSystem(ComputationRefused):
    pass


class ExcursionBudgetExceeded(ComputationRefused):
    def __init__(self, excursion: int, steps: int):
        self.excursion = excursion
        self.steps = steps
        super().__init__(
            f"excursion {excursion} did not return to 0 within {steps} steps "
            "(evidence against positive recurrence)"
        )
