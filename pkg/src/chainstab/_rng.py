"""Deterministic randomness plumbing.

Two generators are used, both fully determined by integer seeds:

* a counter-based splitmix64 hash for signals that need O(1) random access
  (a piecewise-constant disturbance must return the value of mesh cell k
  without generating cells 0..k-1), and
* numpy ``Generator`` streams derived from ``SeedSequence`` for Monte-Carlo
  draws (initial states, trial-level disturbance seeds).

No wall-clock or OS entropy enters anywhere; identical seeds replay
bit-identically.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    """One splitmix64 scrambling round (64-bit)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def hash_unit(*keys: int) -> float:
    """Hash integer keys to a double in [0, 1), stable across platforms."""
    acc = 0x243F6A8885A308D3
    for k in keys:
        acc = splitmix64(acc ^ (int(k) & _MASK64))
    return (acc >> 11) * 2.0**-53


def derive_rng(master_seed: int, *stream: int) -> np.random.Generator:
    """Independent PCG64 stream for (master_seed, stream ids)."""
    seq = np.random.SeedSequence([int(master_seed) & _MASK64, *(int(s) & _MASK64 for s in stream)])
    return np.random.Generator(np.random.PCG64(seq))
