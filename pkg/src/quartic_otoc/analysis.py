"""Early-time growth fits and late-time saturation diagnostics for OTOC series."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d

from .engine import OtocSeries, ThermalParams, thermal_expectation
from .perturbation import p2_series, x2_series
from .spectra import Spectrum

DEFAULT_WINDOW = (20.0, 50.0)
ENVELOPE_SAMPLES = 5
MIN_FIT_SAMPLES = 10
MIN_TAIL_SAMPLES = 50


class FitError(ValueError):
    pass


class _Report:
    def to_dict(self):
        return asdict(self)

    def to_text(self):
        return "\n".join(f"{k}={_fmt(v)}" for k, v in self.to_dict().items())

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.16e}"
    if isinstance(v, (list, tuple)):
        return ":".join(_fmt(x) for x in v)
    return str(v)


@dataclass(frozen=True)
class FitReport(_Report):
    t_lo: float
    t_hi: float
    slope: float
    intercept: float
    residual: float
    samples: int
    envelope: bool


@dataclass(frozen=True)
class SaturationReport(_Report):
    last_window: tuple
    previous_window: tuple
    tail_mean: float
    tail_std: float
    drift: float
    reference: float | None = None
    gap: float | None = None


def envelope(values, size=ENVELOPE_SAMPLES):
    """Centered rolling maximum over ``size`` samples."""
    return maximum_filter1d(np.asarray(values, dtype=float), size=size, mode="nearest")


def lyapunov_fit(series: OtocSeries, window=DEFAULT_WINDOW, use_envelope=False):
    """Least-squares line through (t, ln C) on ``window``; slope reads 2*lambda."""
    lo, hi = window
    if not lo < hi:
        raise FitError(f"empty window [{lo}, {hi}]")
    values = envelope(series.values) if use_envelope else np.asarray(series.values)
    sel = (series.t >= lo - 1e-12) & (series.t <= hi + 1e-12)
    t, y = series.t[sel], values[sel]
    if len(t) < MIN_FIT_SAMPLES:
        raise FitError(f"only {len(t)} samples in [{lo}, {hi}], need {MIN_FIT_SAMPLES}")
    bad = np.nonzero(y <= 0)[0]
    if len(bad):
        raise FitError(f"non-positive value {y[bad[0]]:.3g} at t={t[bad[0]]:g}")
    logy = np.log(y)
    A = np.column_stack([t, np.ones_like(t)])
    (slope, intercept), *_ = np.linalg.lstsq(A, logy, rcond=None)
    resid = logy - (slope * t + intercept)
    return FitReport(float(lo), float(hi), float(slope), float(intercept),
                     float(np.sqrt(np.mean(resid ** 2))), int(len(t)), bool(use_envelope))


def saturation_stats(series: OtocSeries, tail_fraction=0.25, reference=None):
    """Mean/std over the last ``tail_fraction`` of samples and drift from the window before."""
    if not 0 < tail_fraction <= 0.5:
        raise ValueError(f"tail_fraction must lie in (0, 0.5], got {tail_fraction}")
    v = np.asarray(series.values, dtype=float)
    w = int(len(v) * tail_fraction)
    if w < MIN_TAIL_SAMPLES:
        raise ValueError(f"tail windows hold {w} samples, need {MIN_TAIL_SAMPLES}")
    last, prev = v[-w:], v[-2 * w:-w]
    t = series.t
    mean = float(last.mean())
    report = SaturationReport(
        last_window=(float(t[-w]), float(t[-1])),
        previous_window=(float(t[-2 * w]), float(t[-w - 1])),
        tail_mean=mean,
        tail_std=float(last.std()),
        drift=abs(mean - float(prev.mean())) / abs(mean),
    )
    if reference is not None:
        report = saturation_vs_reference(report, reference)
    return report


def saturation_vs_reference(report: SaturationReport, reference=None):
    """Attach |ln(tail mean) - ln(reference)|; the reference defaults to the report's own."""
    ref = report.reference if reference is None else float(reference)
    if ref is None:
        raise ValueError("no reference value given")
    gap = abs(math.log(report.tail_mean) - math.log(ref))
    return SaturationReport(**{**asdict(report), "reference": ref, "gap": gap})


def moment_reference(spec: Spectrum, tp: ThermalParams, g, order=3):
    """2 <x^2>_T <p^2>_T from the per-level closed forms, Boltzmann-weighted with ``spec``."""
    gp = g ** np.arange(order + 1)
    n = np.arange(len(spec))
    x2 = np.array([x2_series(k, order) @ gp for k in n])
    p2 = np.array([p2_series(k, order) @ gp for k in n])
    return 2 * thermal_expectation(x2, spec, tp) * thermal_expectation(p2, spec, tp)
