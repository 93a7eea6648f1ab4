"""Command-line front end.

Exit codes: 0 success, 2 bad configuration, 3 numerical failure,
4 validity warning escalated by ``--strict``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field, replace
from functools import wraps
from pathlib import Path

import click
import numpy as np

from . import __version__
from .analysis import (
    FitError,
    lyapunov_fit,
    moment_reference,
    saturation_stats,
)
from .engine import (
    B_BAND,
    OtocSeries,
    ThermalParams,
    ThermalTruncationWarning,
    microcanonical_otoc,
    thermal_otoc,
    time_grid,
)
from .oracle import OracleConvergenceError, oracle_backend
from .perturbation import (
    E3_FORMS,
    EnhancementWarning,
    ModelParams,
    energy_correction,
    position_series,
)
from .spectra import perturbative_backend, sho_backend

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_STRICT = 4


@dataclass
class RunConfig:
    subcommand: str
    g: float = 0.001
    temps: list = field(default_factory=lambda: [10.0, 20.0, 40.0])
    order: int = 3
    backend: str = "perturbative"
    t_max: float | None = None
    dt: float = 0.1
    n_max: int = 400
    eps: float = 1e-10
    window: tuple = (20.0, 50.0)
    envelope: bool = False
    out: str = "-"
    format: str = "csv"
    e3: str = "printed"
    oracle_n: int = 200
    wide: bool = False

    def resolved_t_max(self):
        if self.t_max is not None:
            return self.t_max
        return 200.0 if self.order >= 3 else 10000.0

    def model(self):
        return ModelParams(g=0.0 if self.backend == "sho" else self.g,
                           order=self.order, e3=self.e3)

    def snapshot(self):
        d = asdict(self)
        d["t_max"] = self.resolved_t_max()
        d["window"] = list(self.window)
        return json.dumps(d, sort_keys=True)


def _num(x):
    return f"{x:.16e}"


# --------------------------------------------------------------------------
# backends and output
# --------------------------------------------------------------------------

def _backend(cfg: RunConfig, n_levels):
    if cfg.backend == "sho":
        return sho_backend(n_levels)
    if cfg.backend == "perturbative":
        return perturbative_backend(cfg.model(), n_levels)
    N = max(cfg.oracle_n, 8)
    spec, table = oracle_backend(cfg.g, N)
    return spec, table


def _thermal(cfg: RunConfig, T, t, backend=None):
    spec, table = backend or _backend(cfg, cfg.n_max + B_BAND + 1)
    n_cap = min(cfg.n_max, table.size - B_BAND - 1)
    if n_cap < cfg.n_max:
        w = np.exp(-(spec.energies[n_cap - 1] - spec.energies[0]) / T)
        if w >= cfg.eps:
            warnings.warn(f"{spec.source} holds only {n_cap} usable levels; "
                          f"Boltzmann weight there is {w:.3g} at T={T}",
                          ThermalTruncationWarning)
    tp = ThermalParams(T=T, eps=cfg.eps, n_max=n_cap)
    return thermal_otoc(t, spec, table, tp), spec, tp


def _header(cfg: RunConfig):
    return f"# quartic-otoc {__version__}\n# config: {cfg.snapshot()}\n"


def _emit(cfg: RunConfig, columns, rows, path=None):
    path = path or cfg.out
    if cfg.format == "structured":
        doc = {"version": __version__, "config": json.loads(cfg.snapshot()),
               "columns": columns, "rows": rows}
        text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    else:
        buf = io.StringIO()
        buf.write(_header(cfg))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_num(v) if isinstance(v, float) else v for v in r])
        text = buf.getvalue()
    _write(path, text)


def _emit_reports(cfg: RunConfig, reports, path=None):
    path = path or cfg.out
    if cfg.format == "structured":
        doc = {"version": __version__, "config": json.loads(cfg.snapshot()),
               "reports": reports}
        text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    else:
        blocks = []
        for r in reports:
            blocks.append("\n".join(
                f"{k}={_num(v) if isinstance(v, float) else _fmt_list(v)}"
                for k, v in r.items()))
        text = _header(cfg) + "\n\n".join(blocks) + "\n"
    _write(path, text)


def _fmt_list(v):
    if isinstance(v, (list, tuple)):
        return ":".join(_num(x) if isinstance(x, float) else str(x) for x in v)
    return str(v)


def _write(path, text):
    if str(path) == "-":
        click.echo(text, nl=False)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as fh:
        fh.write(text)


def _temp_key(T):
    return f"T{T:g}"


def _suffixed(path, T):
    p = Path(path)
    return p.with_name(f"{p.stem}_{_temp_key(T)}{p.suffix or '.csv'}")


# --------------------------------------------------------------------------
# operations (callable without click)
# --------------------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig):
    n_levels = cfg.n_max + 1
    spec, _ = _backend(cfg, max(n_levels, 8) if cfg.backend != "oracle" else None)
    if len(spec) < n_levels:
        raise click.UsageError(f"backend holds {len(spec)} levels, asked for {n_levels}")
    cols = ["n"] + [f"E{j}" for j in range(cfg.order + 1)] + ["energy"]
    rows = []
    for n in range(n_levels):
        rows.append([n] + [energy_correction(n, j, cfg.e3) for j in range(cfg.order + 1)]
                    + [float(spec.energies[n])])
    _emit(cfg, cols, rows)
    return rows


def cmd_otoc(cfg: RunConfig):
    t = time_grid(cfg.resolved_t_max(), cfg.dt)
    backend = _backend(cfg, cfg.n_max + B_BAND + 1)
    series = [_thermal(cfg, T, t, backend)[0] for T in cfg.temps]
    if cfg.wide or len(series) == 1:
        cols = ["t"] + ([_temp_key(s.label) for s in series] if cfg.wide else ["value"])
        rows = [[float(t[i])] + [float(s.values[i]) for s in series] for i in range(len(t))]
        _emit(cfg, cols, rows)
    else:
        if cfg.out == "-":
            raise click.UsageError("several temperatures need --out or --wide")
        for s in series:
            rows = [[float(a), float(b)] for a, b in zip(s.t, s.values)]
            _emit(cfg, ["t", "value"], rows, path=_suffixed(cfg.out, s.label))
    return series


def _read_series(path):
    t, v = [], []
    with open(path) as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(rows)
        if header[:2] != ["t", "value"]:
            raise click.UsageError(f"{path}: expected columns t,value, got {header}")
        for r in rows:
            t.append(float(r[0]))
            v.append(float(r[1]))
    return OtocSeries(np.array(t), np.array(v), "thermal", math.nan, {"input": str(path)})


def _fit_entry(series: OtocSeries, cfg: RunConfig, label):
    entry = {"label": label}
    try:
        rep = lyapunov_fit(series, cfg.window, use_envelope=cfg.envelope)
    except FitError as exc:
        entry.update(status="fit_error", error=str(exc))
        return entry
    entry.update(rep.to_dict())
    # growth across the window must beat the scatter about the line
    rise = rep.slope * (rep.t_hi - rep.t_lo)
    entry["status"] = "growing" if rise > max(rep.residual, 1e-12) else "flat"
    return entry


def cmd_lyapunov(cfg: RunConfig, inputs=()):
    """Fit every series and write the reports; raises FitError afterwards if any fit failed."""
    if inputs:
        entries = [_fit_entry(_read_series(p), cfg, str(p)) for p in inputs]
    else:
        t = time_grid(cfg.resolved_t_max(), cfg.dt)
        backend = _backend(cfg, cfg.n_max + B_BAND + 1)
        entries = [_fit_entry(_thermal(cfg, T, t, backend)[0], cfg, _temp_key(T))
                   for T in cfg.temps]
    _emit_reports(cfg, entries)
    failed = [e["label"] for e in entries if e["status"] == "fit_error"]
    if failed:
        raise FitError(f"fit failed for {', '.join(failed)}")
    return entries


def cmd_saturation(cfg: RunConfig):
    t = time_grid(cfg.resolved_t_max(), cfg.dt)
    backend = _backend(cfg, cfg.n_max + B_BAND + 1)
    rows = []
    for T in cfg.temps:
        series, spec, tp = _thermal(cfg, T, t, backend)
        ref = moment_reference(spec, tp, cfg.model().g, cfg.order)
        rep = saturation_stats(series, reference=ref)
        rows.append([float(T), math.log(rep.tail_mean), math.log(ref), rep.gap, rep.drift])
    _emit(cfg, ["T", "ln_C_inf", "ln_2x2p2", "gap", "drift"], rows)
    return rows


ROUNDOFF = 1e-13
EXPECTED_RATIO = {3: (8.0, 32.0), 2: (4.0, 16.0), 1: (2.0, 8.0)}


def cmd_oracle_compare(cfg: RunConfig, levels=6, t_probe=1.0):
    """Perturbative minus oracle at g and g/2 for energies, x_{n+1,n} and c_n(t_probe)."""
    diffs = {}
    for g in (cfg.g, cfg.g / 2):
        c = replace(cfg, g=g, backend="perturbative")
        pspec, ptab = perturbative_backend(c.model(), cfg.oracle_n)
        ospec, otab = oracle_backend(g, cfg.oracle_n)
        t = np.array([t_probe])
        for n in range(levels):
            diffs.setdefault(("energy", n), []).append(
                float(pspec.energies[n] - ospec.energies[n]))
            xp = float(np.polynomial.polynomial.polyval(g, position_series(n + 1, n, cfg.order)))
            diffs.setdefault(("x_up", n), []).append(xp - otab.element(n + 1, n))
            cp = microcanonical_otoc(n, t, pspec, ptab).values[0]
            co = microcanonical_otoc(n, t, ospec, otab).values[0]
            diffs.setdefault(("c_n", n), []).append(float(cp - co))
    lo, hi = EXPECTED_RATIO[cfg.order]
    rows = []
    for (qty, n), (d1, d2) in diffs.items():
        ratio = abs(d1) / abs(d2) if d2 != 0 else math.nan
        if max(abs(d1), abs(d2)) < ROUNDOFF:
            ok = "exact"
        else:
            ok = "pass" if lo <= ratio <= hi else "fail"
        rows.append([qty, n, d1, d2, ratio, ok])
    _emit(cfg, ["quantity", "n", "diff_g", "diff_half_g", "ratio", "status"], rows)
    return rows


FIGURES = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6")


def cmd_figures(cfg: RunConfig, only=FIGURES):
    """Data for all six figures, one file per figure under the ``cfg.out`` directory."""
    outdir = Path(cfg.out if cfg.out != "-" else "figures")
    base = replace(cfg, g=0.001, backend="perturbative", format="csv", wide=True, t_max=None)
    jobs = {
        "fig1": replace(base, subcommand="otoc", temps=[10.0, 20.0, 40.0], order=3),
        "fig2": replace(base, subcommand="otoc", temps=[20.0], order=3, t_max=100.0),
        "fig3": replace(base, subcommand="otoc", temps=[5.0, 10.0, 15.0, 20.0, 40.0],
                        order=3, t_max=60.0),
        "fig4": replace(base, subcommand="saturation", order=3,
                        temps=[float(T) for T in range(5, 55, 5)]),
        "fig5": replace(base, subcommand="otoc", temps=[20.0], order=2, t_max=10000.0),
        "fig6": replace(base, subcommand="otoc", temps=[20.0], order=2, t_max=1000.0),
    }
    written = []
    for name in only:
        job = replace(jobs[name], out=str(outdir / f"{name}.csv"))
        if name == "fig4":
            cmd_saturation(job)
        elif name == "fig3":
            series = cmd_otoc(replace(job, out=str(outdir / "fig3_otoc.csv")))
            rows = [[float(series[0].t[i])]
                    + [math.log(s.values[i]) if s.values[i] > 0 else -math.inf
                       for s in series]
                    for i in range(len(series[0].t))]
            _emit(job, ["t"] + [f"ln_{_temp_key(s.label)}" for s in series], rows)
            fit = replace(job, temps=[10.0], envelope=True, out=str(outdir / "fig3_fit.txt"))
            _emit_reports(fit, [_fit_entry(series[1], fit, "T10")])
            written += [outdir / "fig3_otoc.csv", outdir / "fig3_fit.txt"]
        else:
            cmd_otoc(job)
        written.append(outdir / f"{name}.csv")
    return written


# --------------------------------------------------------------------------
# click wiring
# --------------------------------------------------------------------------

def _parse_window(ctx, param, value):
    try:
        lo, hi = (float(x) for x in value.split(":"))
    except ValueError:
        raise click.BadParameter("expected LO:HI, e.g. 20:50")
    if not lo < hi:
        raise click.BadParameter("window needs LO < HI")
    return lo, hi


def common_options(f):
    opts = [
        click.option("--g", "g", type=float, default=0.001, show_default=True,
                     help="Quartic coupling."),
        click.option("--temp", "temps", type=float, multiple=True,
                     help="Temperature (repeatable)."),
        click.option("--order", type=click.IntRange(1, 3), default=3, show_default=True),
        click.option("--backend", type=click.Choice(["perturbative", "oracle", "sho"]),
                     default="perturbative", show_default=True),
        click.option("--tmax", "t_max", type=float, default=None,
                     help="Final time [default: 200 for order 3, 10000 otherwise]."),
        click.option("--dt", type=float, default=0.1, show_default=True),
        click.option("--nmax", "n_max", type=int, default=400, show_default=True),
        click.option("--eps", type=float, default=1e-10, show_default=True),
        click.option("--window", default="20:50", show_default=True, callback=_parse_window),
        click.option("--envelope", is_flag=True, help="Fit the 5-sample rolling maximum."),
        click.option("--out", default="-", show_default=True),
        click.option("--format", "format", type=click.Choice(["csv", "structured"]),
                     default="csv", show_default=True),
        click.option("--e3", type=click.Choice(E3_FORMS), default="printed", show_default=True,
                     help="Third-order energy polynomial."),
        click.option("--oracle-n", type=int, default=200, show_default=True),
        click.option("--wide", is_flag=True, help="One CSV with a column per temperature."),
        click.option("--strict", is_flag=True, help="Fail (exit 4) on enhancement warnings."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _runner(name, default_temps=(10.0, 20.0, 40.0)):
    def deco(body):
        @wraps(body)
        def wrapped(strict, temps, **kw):
            extra = {k: kw.pop(k) for k in list(kw) if k not in RunConfig.__dataclass_fields__}
            try:
                cfg = RunConfig(subcommand=name, temps=list(temps or default_temps), **kw)
                cfg.model()
                for T in cfg.temps:
                    ThermalParams(T=T, eps=cfg.eps, n_max=max(cfg.n_max, 1))
                if cfg.dt <= 0 or cfg.n_max < 1:
                    raise ValueError("need --dt > 0 and --nmax >= 1")
            except ValueError as exc:
                raise click.UsageError(str(exc))
            with warnings.catch_warnings():
                if strict:
                    warnings.simplefilter("error", EnhancementWarning)
                try:
                    body(cfg, **extra)
                except EnhancementWarning as exc:
                    click.echo(f"error: {exc}", err=True)
                    sys.exit(EXIT_STRICT)
                except (OracleConvergenceError, FitError) as exc:
                    click.echo(f"error: {exc}", err=True)
                    sys.exit(EXIT_NUMERICAL)
                except ValueError as exc:
                    raise click.UsageError(str(exc))
        return wrapped
    return deco


@click.group()
@click.version_option(__version__)
def main():
    """OTOCs of the quartic anharmonic oscillator."""


@main.command()
@common_options
@_runner("spectrum")
def spectrum(cfg):
    """Per-level energy corrections and E_n(g)."""
    cmd_spectrum(cfg)


@main.command()
@common_options
@_runner("otoc")
def otoc(cfg):
    """Thermal OTOC C_T(t) for each --temp."""
    cmd_otoc(cfg)


@main.command()
@common_options
@click.option("--input", "inputs", multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="Fit a t,value CSV instead of computing (repeatable).")
@_runner("lyapunov")
def lyapunov(cfg, inputs=()):
    """Log-linear growth fit on --window."""
    cmd_lyapunov(cfg, inputs)


@main.command()
@common_options
@_runner("saturation", default_temps=tuple(float(T) for T in range(5, 55, 5)))
def saturation(cfg):
    """Late-time plateau against 2<x^2>_T<p^2>_T over temperatures."""
    cmd_saturation(cfg)


@main.command("oracle-compare")
@common_options
@click.option("--levels", type=int, default=6, show_default=True)
@_runner("oracle-compare")
def oracle_compare(cfg, levels=6):
    """Perturbative vs exact diagonalization at g and g/2."""
    cmd_oracle_compare(cfg, levels)


@main.command()
@common_options
@click.option("--only", default=",".join(FIGURES), show_default=True,
              help="Comma-separated subset of figures.")
@_runner("figures")
def figures(cfg, only=""):
    """Write data for all six figures into the --out directory."""
    names = [s.strip() for s in only.split(",") if s.strip()]
    bad = [s for s in names if s not in FIGURES]
    if bad:
        raise click.UsageError(f"unknown figure(s): {bad}")
    for p in cmd_figures(cfg, names):
        click.echo(str(p), err=True)
