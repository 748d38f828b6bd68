# rng.py
# SPDX-License-Identifier: MIT
"""Portable SplitMix64 pseudo-random generator.

Every randomized structure in faceclust (kd-forest split choices,
k-means++ seeding, synthetic datasets) draws from this generator so a
seed reproduces the same result on any platform and from any language
that implements the same constants:

- state advances by ``GAMMA = 0x9E3779B97F4A7C15`` (mod 2**64);
- output = ``z ^ (z >> 31)`` after ``z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9``
  and ``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``;
- uniforms use the top 53 bits, ``(u >> 11) * 2**-53``;
- bounded integers use multiply-high, ``(u * n) >> 64``;
- normals use Box-Muller on consecutive uniform pairs ``(1 - u1, u2)``.

The stream is counter based, so array draws are vectorized with numpy
without changing the sequence.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["SplitMix64", "mix64", "derive_seed", "GAMMA"]

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    """Apply the SplitMix64 finalizer to a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps modulo 2**64.
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *keys: int) -> int:
    """Derive an independent 64-bit seed from a base seed and integer keys.

    Used to give every parallel job (probe, partition, tree) its own stream
    so results never depend on scheduling order.
    """
    h = mix64(seed & MASK64)
    for key in keys:
        h = mix64((h + GAMMA * ((int(key) & MASK64) + 1)) & MASK64)
    return h


class SplitMix64:
    """Counter-based SplitMix64 generator.

    Attributes:
        state (int): Current 64-bit state; advanced by GAMMA per draw.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def u64_array(self, n: int) -> np.ndarray:
        """Return the next ``n`` outputs as a uint64 array."""
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(GAMMA)
        states = steps + np.uint64(self.state)
        self.state = (self.state + GAMMA * n) & MASK64
        return _mix64_array(states)

    def uniform(self) -> float:
        """Return a float in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform_array(self, n: int) -> np.ndarray:
        raw = self.u64_array(n) >> np.uint64(11)
        return raw.astype(np.float64) * _INV_2_53

    def randbelow(self, n: int) -> int:
        """Return an integer in [0, n) by multiply-high reduction."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        return (self.next_u64() * n) >> 64

    def normal_array(self, n: int) -> np.ndarray:
        """Return ``n`` standard normal draws (Box-Muller)."""
        if n <= 0:
            return np.zeros(0, dtype=np.float64)
        pairs = (n + 1) // 2
        u = self.uniform_array(2 * pairs)
        u1 = 1.0 - u[0::2]
        u2 = u[1::2]
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * math.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:n]

    def permutation(self, n: int) -> np.ndarray:
        """Return a Fisher-Yates permutation of ``range(n)``."""
        order = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            order[i], order[j] = order[j], order[i]
        return order
