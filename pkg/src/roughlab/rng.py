"""Seed splitting.

Every random draw is keyed by ``(seed, purpose, replica)``:

    key = mix(mix(mix(seed) ^ purpose_code) ^ replica)

where ``mix`` is the splitmix64 finaliser. Replica ``i`` therefore sees the
same stream whatever the batch size, block layout or thread count. Map
drivers consume the key directly as a splitmix64 counter stream (first
output gives the initial point, later outputs give dither bits); Gaussian
draws use ``numpy.random.Philox`` keyed by the same value.
"""
import numpy as np

from ._pure import splitmix_next

PURPOSES = {
    "map": 1,
    "walk": 2,
    "brownian": 3,
    "ou": 4,
    "sde": 5,
    "lift-check": 6,
    "misc": 7,
    "center": 8,
}

_M64 = (1 << 64) - 1


def _mix(z):
    z = np.asarray(z, dtype=np.uint64).copy()
    # splitmix_next adds the golden increment before mixing
    return splitmix_next(z)


def stream_keys(seed, purpose, replicas):
    """uint64 keys for the given replica indices (int or array)."""
    code = PURPOSES[purpose] if isinstance(purpose, str) else int(purpose)
    base = _mix(np.array([int(seed) & _M64], dtype=np.uint64))
    base = _mix(base ^ np.uint64(code))
    idx = np.atleast_1d(np.asarray(replicas, dtype=np.uint64))
    return _mix(base ^ idx)


def replica_generator(seed, purpose, replica):
    """Independent numpy Generator for one replica."""
    key = int(stream_keys(seed, purpose, replica)[0])
    return np.random.Generator(np.random.Philox(key=key))


def uniform_from_key(state):
    """Draw one 53-bit uniform per entry of a splitmix state (in place).

    Returns the integer mantissa ``k`` with ``y = k * 2**-53``.
    """
    return splitmix_next(state) >> np.uint64(11)


def child_seed(seed, purpose):
    """Derived 63-bit seed for an auxiliary experiment that must not share streams."""
    code = PURPOSES[purpose] if isinstance(purpose, str) else int(purpose)
    key = stream_keys(seed, code, 0)[0]
    return int(key >> np.uint64(1))
