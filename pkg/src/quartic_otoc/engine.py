"""OTOC kernel shared by every backend.

    b_nm(t) = sum_k x_nk x_km (exp(i E_nk t) E_km - exp(i E_km t) E_nk)
    c_n(t)  = sum_m |b_nm(t)|^2
    C_T(t)  = sum_n w_n c_n(t),   w_n = exp(-(E_n - E_0)/T) / Z

with W = x, V = p and hbar = M = 1.  For the perturbative backend the
prefactors x_nk x_km E_km and x_nk x_km E_nk are multiplied as polynomials in
g and cut at the table's order, while the energies inside the phases are
used as plain numbers, never re-expanded in t.

Every sum runs in a fixed ascending order, so results are reproducible
bit-for-bit regardless of how callers chunk the time grid.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .perturbation import EnhancementWarning
from .spectra import X_BAND, X_OFFSETS, Spectrum, TransitionTable

#: even offsets m - n reachable by b_nm
B_OFFSETS = (-8, -6, -4, -2, 0, 2, 4, 6, 8)
B_BAND = 8

_X_INDEX = {d: i for i, d in enumerate(X_OFFSETS)}
_CHUNK = 512


class ClippedBandWarning(UserWarning):
    """A level's b_nm band reaches past the end of the table."""


class ThermalTruncationWarning(UserWarning):
    """The Boltzmann sum was cut by the table size, not by the weight cutoff."""


@dataclass(frozen=True)
class ThermalParams:
    T: float
    eps: float = 1e-10
    n_max: int = 400

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"temperature must be > 0, got {self.T}")
        if not 0 < self.eps < 1:
            raise ValueError(f"weight cutoff must lie in (0, 1), got {self.eps}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")


@dataclass(eq=False)
class OtocSeries:
    t: np.ndarray
    values: np.ndarray
    kind: str  # "microcanonical" or "thermal"
    label: float  # level n or temperature T
    meta: dict = field(default_factory=dict)


def time_grid(t_max, dt=0.1):
    """Uniform grid 0, dt, ..., t_max (t_max rounded to a whole step)."""
    if dt <= 0 or t_max < 0:
        raise ValueError("need dt > 0 and t_max >= 0")
    return np.arange(int(round(t_max / dt)) + 1) * dt


# --------------------------------------------------------------------------
# prefactors
# --------------------------------------------------------------------------

def _trunc_mul(a, b):
    """Row-wise product of g-polynomials a, b (shape (..., L)), cut at degree L-1."""
    L = a.shape[-1]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for p in range(L):
        for i in range(p + 1):
            out[..., p] += a[..., i] * b[..., p - i]
    return out


def _uses_series(spec, table):
    return (spec.series is not None and table.series is not None
            and spec.series.shape[1] == table.series.shape[2])


class _Kernel:
    """Precomputed prefactors P, Q with b_{n,n+d} = sum_j P e^{iE_nk t} - Q e^{iE_km t}."""

    def __init__(self, spec: Spectrum, table: TransitionTable):
        if len(spec) != table.size:
            raise ValueError(f"spectrum has {len(spec)} levels, table has {table.size}")
        self.spec = spec
        self.table = table
        self.N = N = table.size
        E = spec.energies
        series = _uses_series(spec, table)
        if series:
            gpow = table.g ** np.arange(table.series.shape[2])
        # P[n, di, ji], Q[n, di, ji] with d = B_OFFSETS[di], k = n + X_OFFSETS[ji]
        self.P = np.zeros((N, len(B_OFFSETS), len(X_OFFSETS)))
        self.Q = np.zeros_like(self.P)
        n = np.arange(N)
        for di, d in enumerate(B_OFFSETS):
            for ji, j in enumerate(X_OFFSETS):
                s = d - j  # offset m - k
                if abs(s) > X_BAND:
                    continue
                k, m = n + j, n + d
                ok = (k >= 0) & (k < N) & (m >= 0) & (m < N)
                nn, kk, mm = n[ok], k[ok], m[ok]
                # x_nk is row n of column k, x_km is row k of column m
                ia, ib = _X_INDEX[-j], _X_INDEX[-s]
                if series:
                    xx = _trunc_mul(table.series[kk, ia], table.series[mm, ib])
                    ekm = spec.series[kk] - spec.series[mm]
                    enk = spec.series[nn] - spec.series[kk]
                    self.P[nn, di, ji] = _trunc_mul(xx, ekm) @ gpow
                    self.Q[nn, di, ji] = _trunc_mul(xx, enk) @ gpow
                else:
                    xx = table.band[kk, ia] * table.band[mm, ib]
                    self.P[nn, di, ji] = xx * (E[kk] - E[mm])
                    self.Q[nn, di, ji] = xx * (E[nn] - E[kk])

    def phases(self, t, hi):
        """phi[a, s, t] = exp(i (E_a - E_{a+s}) t) for levels a < hi."""
        E = self.spec.energies
        out = np.zeros((hi, len(X_OFFSETS), len(t)), dtype=complex)
        a = np.arange(hi)
        for si, s in enumerate(X_OFFSETS):
            ok = (a + s >= 0) & (a + s < self.N)
            w = E[a[ok]] - E[a[ok] + s]
            out[a[ok], si] = np.exp(1j * np.multiply.outer(w, t))
        return out

    def b_band(self, levels, t, phi=None):
        """b_{n,n+d}(t) for n in ``levels`` (ascending array), all d: shape (L, 9, T)."""
        levels = np.asarray(levels)
        hi = min(self.N, int(levels.max()) + X_BAND + 1)
        if phi is None:
            phi = self.phases(t, hi)
        out = np.zeros((len(levels), len(B_OFFSETS), len(t)), dtype=complex)
        for di, d in enumerate(B_OFFSETS):
            acc = out[:, di]
            for ji, j in enumerate(X_OFFSETS):
                s = d - j
                if abs(s) > X_BAND:
                    continue
                p = self.P[levels, di, ji]
                q = self.Q[levels, di, ji]
                k = levels + j
                ok = (k >= 0) & (k < hi)
                if not ok.any():
                    continue
                acc[ok] += p[ok, None] * phi[levels[ok], ji]
                acc[ok] -= q[ok, None] * phi[k[ok], _X_INDEX[s]]
        return out

    def c_sum(self, levels, weights, t):
        """sum_n weights[n] * c_n(t) over a single time chunk."""
        phi = self.phases(t, min(self.N, int(np.max(levels)) + X_BAND + 1))
        total = np.zeros(len(t))
        # fixed blocks of levels keep the summation order independent of t chunking
        for lo in range(0, len(levels), 64):
            blk = levels[lo:lo + 64]
            b = self.b_band(blk, t, phi)
            cn = (b.real ** 2 + b.imag ** 2).sum(axis=1)
            total += (weights[lo:lo + 64, None] * cn).sum(axis=0)
        return total


def _check_levels(N, *levels):
    for n in levels:
        if not 0 <= n < N:
            raise IndexError(f"level {n} outside truncation 0..{N - 1}")


def b_element(n, m, t, spec: Spectrum, table: TransitionTable):
    """b_nm(t) = -i <n|[x(t), p(0)]|m>; scalar t or array of times."""
    _check_levels(table.size, n, m)
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    d = m - n
    if d % 2 or abs(d) > B_BAND:
        out = np.zeros(len(tt), dtype=complex)
    else:
        out = _Kernel(spec, table).b_band(np.array([n]), tt)[0, B_OFFSETS.index(d)]
    return complex(out[0]) if scalar else out


def _warn_clipped(n, N):
    if n + B_BAND >= N:
        warnings.warn(
            f"level {n} lies within {B_BAND} of the truncation edge {N}; "
            "its b_nm band is clipped",
            ClippedBandWarning,
            stacklevel=3,
        )


def microcanonical_otoc(n, t_grid, spec: Spectrum, table: TransitionTable, _kernel=None):
    """c_n(t) = sum_{|m-n|<=8} |b_nm(t)|^2 over ``t_grid``."""
    _check_levels(table.size, n)
    _warn_clipped(n, table.size)
    t_grid = np.asarray(t_grid, dtype=float)
    kern = _kernel or _Kernel(spec, table)
    values = np.concatenate([
        kern.c_sum(np.array([n]), np.ones(1), t_grid[i:i + _CHUNK])
        for i in range(0, len(t_grid), _CHUNK)
    ]) if len(t_grid) else np.zeros(0)
    return OtocSeries(t_grid, values, "microcanonical", n,
                      meta={"source": spec.source, "g": table.g, "order": table.order})


def partition_weights(spec: Spectrum, tp: ThermalParams):
    """Normalized Boltzmann weights over the retained levels.

    Levels are kept from the ground state up to (not including) the first
    one whose unnormalized weight drops below ``tp.eps``, and never more than
    ``tp.n_max``.  Returns ``(levels, weights)``.
    """
    E = spec.energies
    w = np.exp(-(E - E[0]) / tp.T)
    limit = min(tp.n_max, len(E))
    below = np.nonzero(w[:limit] < tp.eps)[0]
    count = int(below[0]) if len(below) else limit
    if not len(below) and limit < tp.n_max:
        warnings.warn(
            f"Boltzmann sum at T={tp.T} cut by the {len(E)}-level spectrum, "
            f"last weight {w[limit - 1]:.3g} > eps={tp.eps}",
            ThermalTruncationWarning,
            stacklevel=2,
        )
    w = w[:count]
    return np.arange(count), w / w.sum()


def thermal_expectation(per_level, spec: Spectrum, tp: ThermalParams):
    """Boltzmann average of per-level values (indexed by level)."""
    levels, w = partition_weights(spec, tp)
    per_level = np.asarray(per_level, dtype=float)
    if len(per_level) < len(levels):
        raise ValueError(f"need {len(levels)} per-level values, got {len(per_level)}")
    return float(w @ per_level[: len(levels)])


def thermal_otoc(t_grid, spec: Spectrum, table: TransitionTable, tp: ThermalParams,
                 enhancement_threshold=0.1):
    """C_T(t) = sum_n w_n c_n(t) over the retained levels."""
    t_grid = np.asarray(t_grid, dtype=float)
    levels, w = partition_weights(spec, tp)
    top = int(levels[-1])
    if top + B_BAND >= table.size:
        _warn_clipped(top, table.size)
    if table.order is not None and table.g * top > enhancement_threshold:
        warnings.warn(
            f"thermal sum at T={tp.T} reaches level {top}, g*n = {table.g * top:.3g} "
            f"> {enhancement_threshold}",
            EnhancementWarning,
            stacklevel=2,
        )
    kern = _Kernel(spec, table)
    values = np.concatenate([
        kern.c_sum(levels, w, t_grid[i:i + _CHUNK])
        for i in range(0, len(t_grid), _CHUNK)
    ]) if len(t_grid) else np.zeros(0)
    return OtocSeries(t_grid, values, "thermal", tp.T, meta={
        "source": spec.source, "g": table.g, "order": table.order,
        "retained_levels": len(levels), "eps": tp.eps, "n_max": tp.n_max,
    })


# --------------------------------------------------------------------------
# closed form of the diagonal band, used only to cross-check b_element
# --------------------------------------------------------------------------

def _closed_form_terms(n):
    """(amplitude, frequency) g-coefficient pairs of the four cosines, times 128."""
    P3 = (n + 1) * (n + 2) * (n + 3)
    Q3 = n * (n - 1) * (n - 2)
    return [
        ([-128 * n, 0, 72 * n * (n * n + 1), -n * n * (585 * n ** 4 + 4370 * n * n + 5509)],
         [128, 384 * n, -96 * (17 * n * n + 7), n * (585 * n ** 4 + 15182 * n * n + 18601)]),
        ([0, 0, 24 * P3, -396 * (n + 2) * P3],
         [3 * c for c in (128, 384 * (n + 2), -32 * (51 * n * n + 204 * n + 259),
                          585 * n ** 5 + 5850 * n ** 4 + 42482 * n ** 3 + 161292 * n * n
                          + 326699 * n + 273206)]),
        ([0, 0, -24 * Q3, 396 * (n - 1) * Q3],
         [3 * c for c in (128, 384 * (n - 1), -32 * (51 * n * n - 102 * n + 106),
                          585 * n ** 5 - 2925 * n ** 4 + 24932 * n ** 3 - 63096 * n * n
                          + 111086 * n - 70582)]),
        ([128 * (n + 1), 0, -72 * (n + 1) * (n * n + 2 * n + 2),
          (n + 1) * (585 * n ** 5 + 2925 * n ** 4 + 10220 * n ** 3 + 18960 * n * n
                     + 21544 * n + 10464)],
         [128, 384 * (n + 1), -96 * (17 * n * n + 34 * n + 24),
          585 * n ** 5 + 2925 * n ** 4 + 21032 * n ** 3 + 51396 * n * n + 67072 * n + 34368]),
    ]


def appendix_b_diag(n, t, g, order=3):
    """Four-cosine closed form of b_nn(t), amplitudes and frequencies cut at ``order``."""
    if n < 0:
        raise ValueError(f"level index must be >= 0, got {n}")
    if order not in (2, 3):
        raise ValueError(f"closed form is given for order 2 or 3, got {order}")
    t = np.asarray(t, dtype=float)
    gpow = g ** np.arange(order + 1)
    total = np.zeros_like(t)
    for amp, freq in _closed_form_terms(n):
        a = np.dot(amp[: order + 1], gpow) / 128
        h = np.dot(freq[: order + 1], gpow) / 128
        total = total + a * np.cos(h * t)
    return total if total.ndim else float(total)
