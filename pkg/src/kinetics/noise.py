"""
Counter-based Gaussian noise addressed by (particle, step, component).

A NoiseStream never holds generator state between calls: every block of
variates is regenerated from the Philox key and a counter built from the
step index. The same (seed, path, address) therefore yields the same
variate whatever order steps, replicas or workers run in.

Addressing
    key      = SeedSequence(seed, spawn_key=path) -> two 64-bit words
    counter  = step index in the third Philox counter word
    variate  = ndtri(uniform(raw word i * width + k))

where ``width`` is the number of components each particle consumes per step
(d for Euler-Maruyama, 2d for the splitting scheme).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy.special import ndtri

from .exceptions import ModelValidationError

_UINT64_LIMIT = 2 ** 64
_MANTISSA_SCALE = 2.0 ** -53


class NoiseRole(IntEnum):
    """Second spawn coordinate: which consumer of a replica draws the noise."""

    INITIAL = 0
    DYNAMICS = 1
    ENSEMBLE_INITIAL = 2
    ENSEMBLE_DYNAMICS = 3
    EQUILIBRIUM_SAMPLES = 4


def raw_to_normal(raw):
    """Map raw 64-bit words to standard normals through the open unit interval."""
    uniform = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _MANTISSA_SCALE
    return ndtri(uniform)


@dataclass(frozen=True)
class NoiseStream:
    seed: int
    path: tuple = ()
    key: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < _UINT64_LIMIT:
            raise ModelValidationError(f"Seed must be an unsigned 64-bit integer, got {self.seed!r}.")
        path = tuple(int(p) for p in self.path)
        sequence = np.random.SeedSequence(int(self.seed), spawn_key=path)
        object.__setattr__(self, 'seed', int(self.seed))
        object.__setattr__(self, 'path', path)
        object.__setattr__(self, 'key', sequence.generate_state(2, dtype=np.uint64))

    def spawn(self, *path):
        """Independent child stream below this one."""
        return NoiseStream(self.seed, self.path + tuple(path))

    def for_replica(self, replica, role):
        return self.spawn(replica, int(role))

    def _bit_generator(self, step):
        if step < 0:
            raise ModelValidationError(f"Step index must be >= 0, got {step}.")
        return np.random.Philox(key=self.key, counter=int(step) << 128)

    def block(self, step, n, width):
        """(n, width) standard normals for particles 0..n-1 at ``step``."""
        raw = self._bit_generator(step).random_raw(n * width)
        return raw_to_normal(raw).reshape(n, width)

    def variate(self, i, step, k, width):
        """The single variate at address (i, step, k)."""
        raw = self._bit_generator(step).random_raw(i * width + k + 1)
        return float(raw_to_normal(raw[-1:])[0])
