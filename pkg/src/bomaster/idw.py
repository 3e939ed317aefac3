"""Inverse-distance-weighting uncertainty over evaluated points.

z(x) = (2/pi) * arctan(1 / sum_i p_i(x)),  p_i(x) = exp(-d_i^2) / d_i^2

with d_i the Euclidean distance from x to the i-th evaluated point; z is 0
on the data and climbs towards 1 far from it. It needs no model, so it keeps
working when a GP's predictive variance has collapsed.
"""

from __future__ import annotations

import numpy as np

__all__ = ["IdwField", "z", "EXACT_MATCH_SQDIST"]

EXACT_MATCH_SQDIST = 1e-12
_BELOW_ONE = np.nextafter(1.0, 0.0)


class IdwField:
    def __init__(self, X):
        X = np.array(X, dtype=float, ndmin=2)
        if X.shape[0] == 0:
            raise RuntimeError("IDW field needs at least one evaluated point")
        self.X = X
        self.X.setflags(write=False)

    def __call__(self, Xs) -> np.ndarray:
        """z at every row of ``Xs``."""
        Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
        diff = Xs[:, None, :] - self.X[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        hit = np.any(d2 <= EXACT_MATCH_SQDIST, axis=1)
        safe = np.where(d2 <= EXACT_MATCH_SQDIST, 1.0, d2)
        total = np.sum(np.exp(-safe) / safe, axis=1)
        out = (2.0 / np.pi) * np.arctan2(1.0, total)
        # far from every point the sum underflows and arctan saturates at pi/2
        out = np.minimum(out, _BELOW_ONE)
        out[hit] = 0.0
        return out


def z(field: IdwField, x) -> float:
    """z at a single point."""
    return float(field(np.asarray(x, dtype=float).reshape(1, -1))[0])
