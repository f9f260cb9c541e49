"""Exception types shared across the package."""


class PcieFifoError(Exception):
    """Base class for all package errors."""


class InvalidTlp(PcieFifoError):
    """A TLP violates its own field invariants (e.g. 32-bit kind with a 64-bit address)."""


class Truncated(PcieFifoError):
    """A DW sequence is shorter (or longer) than its header's length field implies."""


class MalformedHeader(PcieFifoError):
    """The first DW carries a reserved fmt encoding."""


class DigestMismatch(PcieFifoError):
    """The trailing digest DW does not match the CRC of the packet body."""


class UnknownTag(PcieFifoError):
    """A completion arrived for a tag that was never issued (or already retired)."""


class ConfigError(PcieFifoError):
    """A configuration value violates a build-time precondition."""


class ParseError(PcieFifoError):
    """Scenario text could not be parsed.  Carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line


class ValidationError(PcieFifoError):
    """A parsed scenario fails semantic validation.  Names the offending key."""

    def __init__(self, message, key=None):
        if key is not None:
            message = "%s: %s" % (key, message)
        super().__init__(message)
        self.key = key


class TxUnderflow(PcieFifoError):
    """A granted FIFO ran dry mid-packet.  The judging rule makes this impossible;
    hitting it means a bookkeeping bug, so it aborts the run."""


class InvariantViolation(PcieFifoError):
    """A run-time model assertion fired; the simulation is aborted."""

    def __init__(self, message, time_ps=None):
        if time_ps is not None:
            message = "t=%d ps: %s" % (time_ps, message)
        super().__init__(message)
        self.time_ps = time_ps
