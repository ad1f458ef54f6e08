"""Process-level allocator tuning for large-tensor workloads.

glibc's default trim/mmap thresholds hand every multi-megabyte transient
back to the kernel on free, so graph-heavy forward/backward passes spend
most of their time minor-faulting fresh pages back in (measured ~200k
faults per 64x64 batch forward). Raising both thresholds keeps the arena
resident and brings steady-state faults to zero.
"""
from __future__ import annotations

import ctypes

_done = False

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3


def tune_malloc(threshold: int = 1 << 30) -> bool:
    """Keep large allocations in the reused heap arena. Idempotent, best-effort."""
    global _done
    if _done:
        return True
    try:
        libc = ctypes.CDLL("libc.so.6")
        ok = bool(libc.mallopt(_M_MMAP_THRESHOLD, threshold)) and bool(
            libc.mallopt(_M_TRIM_THRESHOLD, threshold))
    except OSError:
        ok = False
    _done = ok
    return ok
