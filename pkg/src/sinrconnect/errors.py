"""Exception types raised across the package."""


class SinrConnectError(Exception):
    """Base class for all package errors."""


class NoiseDominated(SinrConnectError):
    """A link cannot succeed even alone: its power does not beat the noise floor."""

    def __init__(self, link, power, message=None):
        self.link = link
        self.power = power
        super().__init__(message or f"link {link} is noise dominated at power {power:g}")


class SlotBudgetExceeded(SinrConnectError):
    """A slotted protocol ran out of slots before finishing."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NotConnected(SinrConnectError):
    """Init finished its rounds with more than one active node."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NotPowerFeasible(SinrConnectError):
    """No power assignment was found for a link set."""


class IterationBudgetExceeded(SinrConnectError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class BudgetExceeded(SinrConnectError):
    """Brute-force oracle input is larger than its enumeration budget."""


class DegenerateInstance(SinrConnectError):
    """Instance generation kept producing coincident points."""
