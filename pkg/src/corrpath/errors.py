"""Exception hierarchy.

Grouped by how the command line maps failures to exit codes: malformed
input or bad parameters exit 2, infeasible queries exit 3, violated
internal guarantees exit 4.
"""

from __future__ import annotations


class CorrpathError(Exception):
    """Base class for every error raised by this package."""


class InputError(CorrpathError):
    """Malformed input data or invalid parameters (exit code 2)."""


class InfeasibleError(CorrpathError):
    """The query has no answer on the given data (exit code 3)."""


class InternalInvariantError(CorrpathError):
    """A condition the solver guarantees was violated (exit code 4)."""


# network ingestion

class MissingHeader(InputError):
    """CSV header line absent or not the expected column set."""


class MalformedRow(InputError):
    """A CSV row failed to parse; the message names the row."""


class DuplicateLinkId(InputError):
    """Two link rows share one link id."""


class NonPositiveLength(InputError):
    """A link row carries length_km <= 0."""


class SelfLoop(InputError):
    """A link row has from_node == to_node."""


class UnknownNode(InputError):
    """A queried node id is not part of the network."""


# speed panel

class MissingCell(InputError):
    """A (link, day, period) observation is absent from the table."""


class DuplicateCell(InputError):
    """A (link, day, period) observation appears more than once."""


class UnknownLink(InputError):
    """A speed row references a link id the network does not have."""


class NonPositiveSpeed(InputError):
    """A speed observation is <= 0 km/h."""


class ZeroVariance(InputError):
    """A correlation was requested for a constant variable."""


class PanelTooLarge(InputError):
    """The all-pairs summary exceeds the pair budget and sampling is off."""


# scenario sets

class STooLarge(InputError):
    """More scenarios requested than observed days can supply."""


class ScenarioFormatError(InputError):
    """A scenario CSV failed structural validation."""


# objectives

class InvalidSpec(InputError):
    """An objective definition is incomplete or inconsistent."""


# solver

class NoPath(InfeasibleError):
    """Origin cannot reach destination."""


class Exhausted(CorrpathError):
    """The path enumerator has no further loopless path to offer."""


# stability protocol

class SizeOutOfRange(InputError):
    """A requested set size leaves the feasible range for the method."""


class DegenerateObjective(InfeasibleError):
    """Every value involved is zero, leaving the measure undefined."""
