"""Counter-based, block-addressable uniform streams.

Pulse ``t`` of stream ``s`` always draws from block ``t // BLOCK`` of a Philox
generator keyed by ``(seed, s, block)``. Any pulse range can therefore be
produced independently, and concatenating ranges reproduces the sequential
stream exactly.
"""
import numpy as np

BLOCK = 1 << 16


def _block(seed, stream, block, ncols):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss)).random((BLOCK, ncols))


def uniforms(seed, stream, start, stop, ncols):
    """Uniform draws in [0, 1) for pulses ``start <= t < stop``, shape (stop-start, ncols)."""
    if stop <= start:
        return np.empty((0, ncols))
    b0, b1 = start // BLOCK, (stop - 1) // BLOCK
    parts = [_block(seed, stream, b, ncols) for b in range(b0, b1 + 1)]
    flat = parts[0] if len(parts) == 1 else np.concatenate(parts)
    off = start - b0 * BLOCK
    return flat[off:off + (stop - start)]


def chunks(n, size=4 * BLOCK):
    """Yield ``(start, stop)`` ranges covering ``range(n)``."""
    for a in range(0, n, size):
        yield a, min(a + size, n)
