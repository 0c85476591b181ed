"""Exception types shared across the toolkit."""


class BitextError(Exception):
    """Base class for toolkit errors."""


class FormatError(BitextError):
    """A record cannot be represented or parsed in the requested format."""


class ConfigError(BitextError):
    """Invalid or incomplete configuration."""


class ProviderError(BitextError):
    """Embedding provider failed after exhausting its retry budget."""


class ScoringError(BitextError):
    """A single pair could not be scored (routed to the unscored sidecar)."""


class ConflictError(BitextError):
    """A decision targets a pair that is already decided or leased elsewhere."""


class UnknownPairError(BitextError):
    """A decision references a pair id that is not in the review queue."""
