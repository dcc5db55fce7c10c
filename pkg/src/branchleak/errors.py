"""Exception hierarchy shared by all branchleak modules.

Three broad families map onto the CLI exit codes: parse/validation
problems (exit 2), analysis failures (exit 3), and I/O errors (exit 4,
plain OSError).
"""

from __future__ import annotations


class BranchleakError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(BranchleakError):
    """Malformed input bytes: script JSON, trace JSONL, or captures."""


class ValidationError(BranchleakError):
    """Structurally well-formed input that violates a domain invariant."""


class AnalysisError(BranchleakError):
    """The pipeline cannot produce a meaningful result from valid input."""


# -- script graphs ----------------------------------------------------------

class InconsistentPath(ValidationError):
    """A choice path does not follow the graph from its entry segment."""


class DepthExceeded(AnalysisError):
    """Path enumeration hit its depth bound while revisiting a question."""


# -- capture ingest ---------------------------------------------------------

class BadMagic(ParseError):
    """Input does not start with a recognised pcap magic number."""


class TruncatedCapture(ParseError):
    """Capture file ends in the middle of a header or packet body."""


class NoTcpPayload(ParseError):
    """Capture contains no TCP connection carrying TLS records."""


class ReassemblyConflict(ParseError):
    """Retransmitted TCP segments disagree about overlapping bytes."""


class InvalidContentType(ParseError):
    """A TLS record boundary holds a content-type byte outside 20..23."""

    def __init__(self, offset: int, byte: int):
        super().__init__(
            f"invalid TLS content type {byte} at stream offset {offset}"
        )
        self.offset = offset
        self.byte = byte


# -- trace serialization ----------------------------------------------------

class OrderViolation(ValidationError):
    """Trace records are not in non-decreasing time order."""


# -- classification ---------------------------------------------------------

class InsufficientLabels(AnalysisError):
    """Calibration needs at least one sample of each control-event kind."""


class InseparableBands(AnalysisError):
    """The two control-event length bands overlap even after shrinking.

    Raised when the length side-channel is closed, e.g. after padding.
    """


# -- defenses ---------------------------------------------------------------

class BadPolicy(ValidationError):
    """Defense policy parameters cannot be applied to the given trace."""


# -- evaluation -------------------------------------------------------------

class EmptySplit(AnalysisError):
    """Calibration/evaluation split left one side without sessions."""
