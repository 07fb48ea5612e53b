"""Replicate-indexed Gaussian space-time white noise.

Substream derivation (recorded in every run manifest):

* bit generator: numpy Philox-4x64-10 (counter based)
* key: ``(master_seed mod 2**64, replicate_index)``
* steps are grouped in blocks of ``BLOCK_STEPS``; block ``b`` starts from
  counter ``(0, b, 0, 0)`` and draws a ``(BLOCK_STEPS, n_a)`` array with
  ``Generator.standard_normal``

Any (seed, replicate, step) triple can therefore be regenerated on its own,
and a replicate's draws never depend on what other replicates consumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec

BLOCK_STEPS = 64
PRNG_NAME = "numpy.random.Philox(4x64-10)"
_MASK64 = (1 << 64) - 1


def substream_description() -> dict:
    return {
        "prng": PRNG_NAME,
        "numpy_version": np.__version__,
        "key": "(master_seed mod 2**64, replicate_index)",
        "counter": f"(0, step // {BLOCK_STEPS}, 0, 0)",
        "block_steps": BLOCK_STEPS,
        "variate": "Generator.standard_normal, scaled by sqrt(dt * da)",
    }


def standard_block(master_seed: int, replicate_index: int, block_index: int, n_a: int) -> np.ndarray:
    """Standard normals for steps ``block_index * BLOCK_STEPS`` onwards."""
    bitgen = np.random.Philox(
        key=np.array([master_seed & _MASK64, replicate_index], dtype=np.uint64),
        counter=np.array([0, block_index, 0, 0], dtype=np.uint64),
    )
    return np.random.Generator(bitgen).standard_normal((BLOCK_STEPS, n_a))


@dataclass
class NoiseStream:
    """One replicate's noise. A stream is single-consumer.

    ``silent`` streams emit exact zeros, which is useful for checking that
    deterministic and stochastic runs coincide.
    """

    master_seed: int
    replicate_index: int = 0
    step_counter: int = 0
    silent: bool = False
    _cache: tuple = field(default=(None, None), repr=False, compare=False)

    def __post_init__(self):
        if self.replicate_index < 0:
            raise ValueError("replicate_index must be >= 0")

    def block(self, block_index: int, n_a: int) -> np.ndarray:
        """Standard-normal block (not yet scaled by sqrt(dt * da))."""
        if self.silent:
            return np.zeros((BLOCK_STEPS, n_a))
        key, arr = self._cache
        if key != (block_index, n_a):
            arr = standard_block(self.master_seed, self.replicate_index, block_index, n_a)
            self._cache = ((block_index, n_a), arr)
        return arr

    def standard_at(self, step: int, n_a: int) -> np.ndarray:
        b, r = divmod(step, BLOCK_STEPS)
        return self.block(b, n_a)[r]


def increment_scale(spec: GridSpec) -> float:
    return math.sqrt(spec.dt * spec.da)


def sample_increments(stream: NoiseStream, spec: GridSpec) -> np.ndarray:
    """Cell increments of W over the next time step, N(0, dt * da) each."""
    z = stream.standard_at(stream.step_counter, spec.n_a)
    stream.step_counter += 1
    return z * increment_scale(spec)
