"""Spectrum and transition-table containers shared by every backend.

A backend is just a (Spectrum, TransitionTable) pair over levels 0..N-1.
The perturbative backend additionally carries the g-power coefficients of
every energy and matrix element; the OTOC engine uses them to truncate
amplitude products at the requested order.  The oracle backend carries
plain numbers only.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .perturbation import (
    ModelParams,
    energy_series,
    position_series,
)

#: odd offsets m - n stored in a transition table
X_OFFSETS = (-7, -5, -3, -1, 1, 3, 5, 7)
X_BAND = 7


@dataclass(frozen=True, eq=False)
class Spectrum:
    energies: np.ndarray
    source: str
    series: np.ndarray | None = None  # shape (N, order+1) for perturbative

    def __post_init__(self):
        self.energies.setflags(write=False)

    def __len__(self):
        return len(self.energies)

    def is_increasing(self):
        return bool(np.all(np.diff(self.energies) > 0))


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """Band of x_mn for |m-n| <= 7; ``band[n, i]`` is x_{n+X_OFFSETS[i], n}.

    Entries whose row would fall outside 0..N-1 are zero.
    """

    band: np.ndarray
    g: float
    order: int | None
    source: str
    series: np.ndarray | None = None  # shape (N, 8, order+1)

    def __post_init__(self):
        self.band.setflags(write=False)

    @property
    def size(self):
        return self.band.shape[0]

    def element(self, m, n):
        d = m - n
        if not (0 <= m < self.size and 0 <= n < self.size):
            raise IndexError(f"({m}, {n}) outside table of size {self.size}")
        if d % 2 == 0 or abs(d) > X_BAND:
            return 0.0
        return float(self.band[n, X_OFFSETS.index(d)])

    def dense(self):
        N = self.size
        out = np.zeros((N, N))
        for i, d in enumerate(X_OFFSETS):
            cols = np.arange(max(0, -d), min(N, N - d))
            out[cols + d, cols] = self.band[cols, i]
        return out


def perturbative_backend(params: ModelParams, n_levels: int):
    """Energies and x_mn from the closed-form series, levels 0..n_levels-1."""
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    order = params.order
    gpow = params.g ** np.arange(order + 1)
    e_series = np.array([energy_series(n, order, params.e3) for n in range(n_levels)])
    x_series = np.zeros((n_levels, len(X_OFFSETS), order + 1))
    for n in range(n_levels):
        for i, d in enumerate(X_OFFSETS):
            m = n + d
            if 0 <= m < n_levels:
                x_series[n, i] = position_series(m, n, order)
    spec = Spectrum(e_series @ gpow, source=f"perturbative(order={order},e3={params.e3})",
                    series=e_series)
    table = TransitionTable(x_series @ gpow, g=params.g, order=order,
                            source=spec.source, series=x_series)
    return spec, table


def sho_backend(n_levels: int):
    """Free oscillator: E_n = n + 1/2, x_{n+1,n} = sqrt((n+1)/2)."""
    spec, table = perturbative_backend(ModelParams(g=0.0, order=0), n_levels)
    return replace(spec, source="sho"), replace(table, source="sho")
