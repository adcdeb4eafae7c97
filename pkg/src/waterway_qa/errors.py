"""Exception taxonomy shared across the package.

Callers can catch the base class or the specific condition; messages are
meant to be surfaced verbatim in CLI output and HTTP error envelopes.
"""


class WaterwayQAError(Exception):
    """Base class for all package errors."""


class InvalidArgument(WaterwayQAError, ValueError):
    """A caller-supplied value violates an operation precondition."""


class InvalidState(WaterwayQAError):
    """Two otherwise-valid values cannot be combined (e.g. dimension mismatch)."""


class TransportError(WaterwayQAError):
    """A retryable transport failure (timeout, connection refused) that
    persisted through every retry."""


class BackendFailure(WaterwayQAError):
    """A backend answered with a non-success status after retries, or a
    dependent stage gave up because of one."""

    def __init__(self, message: str, role: str | None = None, status: int | None = None):
        super().__init__(message)
        self.role = role
        self.status = status


class ProtocolError(WaterwayQAError):
    """The backend answered 2xx but the body did not match the wire shape."""


class CaptionUnavailable(WaterwayQAError):
    """The captioner failed; callers may proceed caption-less."""


class ReasoningFailed(WaterwayQAError):
    """The reasoner backend failed for this context."""


class MetricUnavailable(WaterwayQAError):
    """A judge-based metric could not be computed; never silently zeroed."""


class DatasetValidationError(WaterwayQAError):
    """One or more dataset manifest violations, all collected before raising."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__(
            "dataset manifest invalid (%d violation%s):\n%s"
            % (
                len(self.violations),
                "" if len(self.violations) == 1 else "s",
                "\n".join("  - " + v for v in self.violations),
            )
        )


class ConfigError(WaterwayQAError):
    """System configuration file is missing, unparseable, or inconsistent."""
