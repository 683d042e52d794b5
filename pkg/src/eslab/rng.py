"""Counter-based Gaussian streams.

Every normal variate is addressed by ``(seed, stream, index)``: the seed and
the stream number (e.g. the integration step) form a Philox key, and the
index selects a position inside that stream.  Any slice of a stream can be
generated independently, so splitting particles across workers never changes
the numbers each particle sees.
"""
from __future__ import annotations

import numpy as np

from .errors import InputError

_U64 = (1 << 64) - 1
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 2.0 ** -53


def _key(seed: int, stream: int) -> int:
    if not (0 <= seed <= _U64):
        raise InputError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if not (0 <= stream <= _U64):
        raise InputError(f"stream must be an unsigned 64-bit integer, got {stream}")
    return (int(stream) << 64) | int(seed)


def standard_normals(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Normals ``start .. start+count-1`` of stream ``stream`` under ``seed``.

    Each variate consumes two raw 64-bit draws (Box-Muller, cosine branch
    only), so variate ``i`` depends on raw draws ``2i`` and ``2i+1`` and
    nothing else.
    """
    if start < 0 or count < 0:
        raise InputError("start and count must be non-negative")
    if count == 0:
        return np.zeros(0)
    bg = np.random.Philox(key=_key(seed, stream))
    block, lane = divmod(2 * start, 4)
    if block:
        bg.advance(block)
    raw = bg.random_raw(lane + 2 * count)[lane:]
    u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53
    u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def normal_block(seed: int, stream: int, rows: slice | range, dim: int) -> np.ndarray:
    """Row-major ``(len(rows), dim)`` block of a stream laid out as an (N, dim) matrix."""
    r = range(*rows.indices(1 << 62)) if isinstance(rows, slice) else rows
    if r.step != 1:
        raise InputError("row ranges must be contiguous")
    n = len(r)
    return standard_normals(seed, stream, r.start * dim, n * dim).reshape(n, dim)
