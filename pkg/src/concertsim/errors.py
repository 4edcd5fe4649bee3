"""Exception hierarchy shared across the simulator."""

from __future__ import annotations


class ConcertError(Exception):
    """Base class for all simulator errors."""


class ConfigError(ConcertError):
    """Bad or inconsistent run configuration (CLI exit code 2)."""


class PastEvent(ConcertError):
    """Attempt to schedule an event before the current virtual clock."""


class BrokenPath(ConcertError):
    """Link sequence does not form a contiguous walk."""


class NoPath(ConcertError):
    """No path exists between the requested endpoints."""


class UnknownNode(ConcertError):
    """Node id does not resolve (or resolves to the wrong kind)."""


class UnknownResource(ConcertError):
    """Virtual resource id does not resolve to a live resource."""


class DoubleRelease(ConcertError):
    """Resource was already released."""


class Unstable(ConcertError):
    """Queueing system has no stationary solution (offered load >= capacity)."""


class SingularRouting(ConcertError):
    """Traffic equations of a routed network have no solution."""


class CapacityExceeded(ConcertError):
    """Placement would over-commit a compute host."""


class IllegalState(ConcertError):
    """Operation not valid in the resource's current lifecycle state."""


class RieAsleep(ConcertError):
    """Radio operation requested on a sleeping RIE."""


class PowerExceeded(ConcertError):
    """Requested transmit power above the RIE maximum."""


class NotADbs(ConcertError):
    """Sleep toggle addressed to a vBS that is not a data base station."""


class UnknownReporter(ConcertError):
    """Network-context report from an unregistered reporter."""


class NoComputeNode(ConcertError):
    """Task placement found no candidate compute node."""


class EmptySamples(ConcertError):
    """Statistics requested over an empty sample set."""


class EmptyWindow(ConcertError):
    """Measurement window contains no completions."""
