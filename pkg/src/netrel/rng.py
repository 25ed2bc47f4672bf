"""Reproducible random streams keyed by (seed, labels...).

Two flavours are used:

* ``stream(seed, *labels)`` returns a numpy ``Generator`` (Philox) for draws that
  happen once per event or per dataset row (magnitudes, GMPE residuals).
* ``stream_key(seed, *labels)`` returns a 64-bit key for the counter-based
  SplitMix64 uniforms the kernels compute for roadway states. Uniform ``(j, i)``
  (sample ``j``, roadway ``i``) depends only on the key and the indices, so the
  result cannot change with block size, scheduling or worker count.
"""
from __future__ import annotations

import zlib

import numpy as np

from ._backend import kernels


def _label(x) -> int:
    if isinstance(x, str):
        return zlib.crc32(x.encode())
    return int(x)


def _entropy(seed, labels):
    return [int(seed) & 0xFFFFFFFFFFFFFFFF, *(_label(x) for x in labels)]


def stream(seed: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(_entropy(seed, labels))))


def stream_key(seed: int, *labels) -> int:
    ss = np.random.SeedSequence(_entropy(seed, labels))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def keyed_uniforms(key: int, start: int, count: int, n_cols: int) -> np.ndarray:
    """Uniforms for rows ``start .. start+count-1`` of the keyed stream."""
    return kernels.uniforms(int(key), int(start), int(count), int(n_cols))
