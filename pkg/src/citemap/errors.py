"""Exception types shared across the pipeline."""


class CitemapError(Exception):
    """Base class for all citemap errors."""


class MalformedDoi(CitemapError):
    """Input string cannot be normalized into a valid DOI."""


class SchemaMismatch(CitemapError):
    """Delimited input is missing required columns or is structurally broken."""


class TransportError(CitemapError):
    """Network-level failure talking to an upstream service.

    ``retryable`` distinguishes transient failures (timeouts, 5xx) from
    definitive rejections (parseable error body).
    """

    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable


class UpstreamSchemaError(CitemapError):
    """Upstream service returned a payload that does not match its contract."""


class DegenerateGraphError(CitemapError):
    """Graph too small for the requested statistic (e.g. density with N < 2)."""


class DegreeCapExceeded(CitemapError):
    """A node's degree exceeds the configured hard cap for pair expansion."""


class NonPositiveGammaError(CitemapError):
    """Resolution parameter must be strictly positive."""


class DegenerateCurveWarning(UserWarning):
    """Sweep curve is collinear; elbow selection fell back to the middle point."""


class PartitionMismatchError(CitemapError):
    """Partition does not cover the node set of the graph it is applied to."""


class EmptyInputError(CitemapError):
    """Operation requires at least one usable record."""


class ConfigError(CitemapError):
    """Run configuration is missing or inconsistent."""
