"""FFT helpers; worker count capped by the ALPHAMOD_THREADS environment variable."""
from __future__ import annotations

import os

import scipy.fft as sfft


def workers() -> int:
    raw = os.environ.get("ALPHAMOD_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"ALPHAMOD_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(n, os.cpu_count() or 1))


def fftn(a, axes=None):
    return sfft.fftn(a, axes=axes, workers=workers())


def ifftn(a, axes=None):
    return sfft.ifftn(a, axes=axes, workers=workers())
