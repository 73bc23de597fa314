"""Trace-driven, cycle-level simulator of a multi-stream GPU memory
hierarchy with per-stream cache and timing statistics."""

from .cache_hierarchy import (DEFAULT_BACKEND, HAVE_COMPILED, Cache,
                              CacheConfig, MemFetch, Probe, WritePolicy,
                              available_backends)
from .gpu_core import SimConfig, Simulator, coalesce
from .stream_stats import (AccessOutcome, AccessType, FailOutcome,
                           KernelTimeTable, LegacyAggregate,
                           PerStreamCacheStats)

__version__ = "0.1.0"

__all__ = [
    "AccessOutcome", "AccessType", "Cache", "CacheConfig", "DEFAULT_BACKEND",
    "FailOutcome", "HAVE_COMPILED", "KernelTimeTable", "LegacyAggregate",
    "MemFetch", "PerStreamCacheStats", "Probe", "SimConfig", "Simulator",
    "WritePolicy", "available_backends", "coalesce",
]
