"""Seeded random streams and space-filling designs on the unit cube."""

from __future__ import annotations

import hashlib

import numpy as np
from scipy.stats import qmc

__all__ = ["make_rng", "fork", "derive_seed", "lhs", "uniform"]


def make_rng(seed: int) -> np.random.Generator:
    """A fresh stream for a 64-bit seed. Same seed, same sequence."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def fork(rng: np.random.Generator, n: int = 1) -> list[np.random.Generator]:
    """Spawn ``n`` child streams.

    Children depend only on the parent's seed and on how many children were
    spawned before, never on how far the parent has been advanced.
    """
    return rng.spawn(n)


def derive_seed(master_seed: int, *keys) -> int:
    """Stable 64-bit seed from a master seed and any printable keys.

    Used to give run ``r`` of problem ``p`` the same seed on every machine
    and in every process.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master_seed)).encode())
    for k in keys:
        h.update(b"\x1f")
        h.update(str(k).encode())
    return int.from_bytes(h.digest(), "little")


def _check(n, d):
    if int(n) < 1 or int(d) < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")


def lhs(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random-permutation Latin hypercube with uniform jitter inside each bin.

    Returns an ``(n, d)`` array in ``[0, 1)``; along every column each of the
    ``n`` equal-width bins holds exactly one point.
    """
    _check(n, d)
    pts = qmc.LatinHypercube(d, rng=rng).random(n)
    # scipy places points at (k - u) / n with u in [0, 1), i.e. in (k-1, k] / n;
    # a u of exactly 0 sits on the bin's upper edge, so step it just inside
    edge = np.ceil(pts * n)
    return np.where(pts * n == edge, np.nextafter(pts, 0.0), pts)


def uniform(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. uniform points in ``[0, 1)^d``."""
    _check(n, d)
    return rng.random((n, d))
