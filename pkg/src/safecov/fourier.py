"""Truncated Fourier basis for approximating time-varying disturbances."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FourierBasis:
    """Basis ``[1, cos w1 t, sin w1 t, ..., cos wL t, sin wL t]`` with ``wl = 2 pi l / T``.

    Entry ``j`` (1-based) is 1 for ``j = 1``, ``cos(w_l t)`` for ``j = 2l``
    and ``sin(w_l t)`` for ``j = 2l + 1``; there are ``N = 2L + 1`` entries.
    """

    L: int
    T: float

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L}")
        if not self.T > 0.0:
            raise ValueError(f"T must be positive, got {self.T}")

    @property
    def N(self) -> int:
        return 2 * self.L + 1

    @property
    def omegas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(1, self.L + 1) / self.T

    def __call__(self, t) -> np.ndarray:
        """Basis vector at time ``t``; shape ``(N,)``, or ``(len(t), N)`` for arrays."""
        t = np.asarray(t, dtype=float)
        # reduce the phase first so basis(t) and basis(t + T) agree to round-off
        phase = 2.0 * np.pi * np.mod(t, self.T) / self.T
        wt = np.multiply.outer(phase, np.arange(1, self.L + 1))
        out = np.empty(t.shape + (self.N,))
        out[..., 0] = 1.0
        out[..., 1::2] = np.cos(wt)
        out[..., 2::2] = np.sin(wt)
        return out


def basis(spec: FourierBasis, t: float) -> np.ndarray:
    return spec(t)


def fit_weights(spec: FourierBasis, t, signal) -> np.ndarray:
    """Least-squares basis weights for sampled ``signal`` of shape ``(m,)`` or ``(m, k)``."""
    A = spec(np.asarray(t, dtype=float))
    w, *_ = np.linalg.lstsq(A, np.asarray(signal, dtype=float), rcond=None)
    return w
