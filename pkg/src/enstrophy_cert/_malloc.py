"""Keep large scratch buffers on the heap.

The FFT work arrays are a few hundred kB each.  glibc serves such blocks with
mmap and unmaps them on free, so every nonlinear evaluation pays page faults
for fresh zero pages.  Raising the mmap and trim thresholds lets freed blocks
be reused.  No-op off glibc.
"""

import ctypes
import ctypes.util
import sys

M_TRIM_THRESHOLD = -1
M_MMAP_THRESHOLD = -3


def tune() -> bool:
    if not sys.platform.startswith("linux"):
        return False
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    ok = mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024)
    ok &= mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024)
    return bool(ok)
