"""Exception hierarchy shared across the package.

Protocol aborts are deliberately distinct from configuration and shape
errors so the simulation driver can record an aborted round and keep
going, while bad configs fail fast before any round runs.
"""


class ByzlabError(Exception):
    """Base class for all package errors."""


class ConfigError(ByzlabError):
    """Invalid configuration value or file (CLI exit code 2)."""


class ShapeError(ByzlabError):
    """Mismatched vector lengths or malformed message structure."""


class QuantRangeError(ByzlabError):
    """A coordinate fell outside the quantizer's declared range."""


class EvalError(ByzlabError):
    """Evaluation requested on an empty data slice."""


class RegistrationError(ByzlabError):
    """Unknown client id or public key in a protocol round."""


class ProtocolStateError(ByzlabError):
    """Protocol step invoked before its prerequisites were met."""


class ProtocolOrderError(ProtocolStateError):
    """Aggregation attempted over unverified or rejected envelopes."""


class ProtocolAbort(ByzlabError):
    """The round cannot complete; carries transcript evidence (exit code 3).

    ``evidence`` is a plain dict so it can be serialized into the round
    record for later audit.
    """

    def __init__(self, message: str, evidence: dict | None = None):
        super().__init__(message)
        self.evidence = evidence or {}


class MaskSumError(ProtocolAbort):
    """Product of commitment mask terms did not match the decoding key."""


class PayloadConsistencyError(ProtocolAbort):
    """Masked payloads are inconsistent with the submitted commitments."""
