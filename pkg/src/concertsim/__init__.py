"""Deterministic discrete-event simulator of a converged edge architecture:
a Conductor control plane coordinating radio sites, software-defined
switches, and tiered compute, plus a closed-form queueing oracle."""

__version__ = "0.1.0"

from . import kernel, queueing, topology  # noqa: F401
