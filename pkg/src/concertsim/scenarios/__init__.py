"""Executable application scenarios built on the kernel, topology,
virtualization, and control-plane modules."""

from .base import ScenarioContext, build_context

__all__ = ["ScenarioContext", "build_context"]
