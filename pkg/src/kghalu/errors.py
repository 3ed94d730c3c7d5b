"""Shared exception types for the toolkit."""

from __future__ import annotations


class KGHaluError(Exception):
    """Base class for all toolkit errors."""


class NormalizationError(KGHaluError):
    """A phrase is empty after normalization."""


class EmptyExtraction(KGHaluError):
    """No parseable triplet line was found in an extractor completion."""

    def __init__(self, raw_lines: list[str] | tuple[str, ...]):
        self.raw_lines = tuple(raw_lines)
        super().__init__(
            f"no parseable triplet in {len(self.raw_lines)} line(s) of extractor output"
        )


class SchemaError(KGHaluError):
    """Benchmark or fixture JSON does not match the documented layout."""


class InvariantError(KGHaluError):
    """A domain-type invariant was violated."""


class FormatError(KGHaluError):
    """A structured completion is missing required section headers."""


class AlignmentError(KGHaluError):
    """Parallel sections of a structured completion have mismatched item counts."""

    def __init__(self, *counts: int):
        self.counts = counts
        super().__init__(f"section item counts do not align: {counts}")


class MetricsUndefined(KGHaluError):
    """A rate has an empty denominator after policy filtering."""


class CorrelationUndefined(KGHaluError):
    """Pearson correlation is undefined (constant input)."""


class AgreementUndefined(KGHaluError):
    """Krippendorff's alpha is undefined (no pairable ratings)."""


class PromptAssetError(KGHaluError):
    """A bundled prompt asset is missing or its pinned digest does not match."""


class MitigationError(KGHaluError):
    """A mitigation stage failed; carries whatever trace fields were produced."""

    def __init__(self, message: str, partial_trace: dict):
        self.partial_trace = partial_trace
        super().__init__(message)


class ProviderError(KGHaluError):
    """Base class for external-model access failures."""

    def __init__(self, message: str, request_digest: str = ""):
        self.request_digest = request_digest
        super().__init__(message)


class AuthError(ProviderError):
    """Credentials missing or rejected."""


class RateLimitedError(ProviderError):
    """Provider rate limit still hit after the retry budget was spent."""


class TransportError(ProviderError):
    """Network or protocol failure talking to a provider."""


class ProviderRefusal(ProviderError):
    """Provider rejected the request body; message carries the verbatim reason."""
