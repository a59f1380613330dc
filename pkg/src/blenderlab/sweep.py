"""Lattice parameter sweeps: the finite-depth induction surrogate.

One coupled family carries a perturbation window (flatten + sink shift)
per lattice point a0 in alpha * 2^{-N+1} (Z^k \\ {0}) intersected with
[-alpha, alpha]^k; windows have parameter support 2^{-N} around their
point, so distinct windows never interact (exact localization), and the
grid report counts sinks per parameter with all certificates attached.
Genericity statements are replaced by coverage fractions.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .dynamics import FamilyHandle, make_family, param_jets, wrap
from .errors import DomainError
from .hyperbolic import continue_fixed_point
from .ifs import jet_coverage_certificate
from .paratangency import constant_parabola, greedy_code
from .sinks import (LoopData, SinkRecord, detect_sinks, flatten_perturbation,
                    flatten_norm, loop_data, sink_translation_perturbation,
                    tangency_normal_form, trapping_box_check)

REPORT_VERSION = 1


def lattice_points(alpha: float, N: int, k: int) -> list[tuple[float, ...]]:
    """alpha * 2^{-N+1} (Z^k minus 0) intersected with [-alpha, alpha]^k."""
    if N < 1:
        raise DomainError("lattice depth N must be >= 1")
    step = alpha * 2.0 ** (-N + 1)
    m = int(math.floor(alpha / step + 1e-12))
    if m < 1:
        raise DomainError("empty lattice: N too small relative to alpha")
    rng = range(-m, m + 1)
    out = []
    for combo in itertools.product(rng, repeat=k):
        if all(c == 0 for c in combo):
            continue
        out.append(tuple(step * c for c in combo))
    return out


@dataclass
class SweepConfig:
    k: int = 1
    d: int = 1                   # d = 1 keeps the greedy chain valid at every
    #                              lattice point of [-1, 1] (cross-terms of
    #                              d >= 2 signed polynomials need |a0| <= 1/3)
    eps: float = 0.01
    depth: int = 2               # greedy word depth per window
    n: int = 12                  # contraction steps of the sink loop
    lattice_N: int = 3
    alpha: float = 1.0           # lattice extent
    kappa: float = 3.0
    grid_step: float | None = None
    period_bound: int = 24
    max_steps: int = 1500
    certify_boxes: bool = False  # the box kappa-window needs d' = 2 scales
    ifs_certificate: bool = False
    windows_enabled: Sequence[int] | None = None
    csv_path: str = "sweep.csv"
    json_path: str = "sweep.json"
    svg_path: str = "sweep.svg"

    @property
    def window_alpha(self) -> float:
        return 2.0 ** (-self.lattice_N - 1)

    def grid(self) -> list[tuple[float, ...]]:
        step = self.grid_step if self.grid_step is not None else self.window_alpha / 4.0
        if step > self.window_alpha / 4.0 + 1e-15:
            raise DomainError("grid resolution must be <= alpha/4")
        n = int(round(self.alpha / step))
        axis = [(-n + i) * step for i in range(2 * n + 1)]
        return [tuple(c) for c in itertools.product(axis, repeat=self.k)]


@dataclass
class WindowSummary:
    index: int
    a0: tuple
    enabled: bool
    word: list
    flatten_norm: float
    error: str | None = None
    trapping: dict | None = None
    trace: dict | None = None


@dataclass
class SweepReport:
    config: dict
    rows: list            # (a, count, min_period, max_period)
    windows: list[WindowSummary]
    certificates: list
    coverage: dict

    def row_dicts(self):
        for a, count, mn, mx in self.rows:
            yield {"a": a, "count": count, "min_period": mn, "max_period": mx}


@dataclass
class _Window:
    index: int
    a0: tuple
    loop: LoopData
    seeds: list
    enabled: bool


def _build_windows(cfg: SweepConfig, base: FamilyHandle):
    """Stack per-lattice-point perturbations; collect per-window data."""
    handle: FamilyHandle = base
    windows: list[_Window] = []
    summaries: list[WindowSummary] = []
    pts = lattice_points(cfg.alpha, cfg.lattice_N, cfg.k)
    enabled_set = (set(range(len(pts))) if cfg.windows_enabled is None
                   else set(cfg.windows_enabled))
    omega = continue_fixed_point(base, (3.0, 0.0), param_jets(base))
    for i, a0 in enumerate(pts):
        enabled = i in enabled_set
        try:
            a_jets = param_jets(base, a0)
            trace = greedy_code(base, constant_parabola(cfg.k, cfg.d),
                                a_jets, cfg.depth)
            td = tangency_normal_form(base, omega, trace.word, a_jets)
            fnorm = flatten_norm(base, td.c_poly, a0, cfg.window_alpha)
            loop = loop_data(base, trace.word)
            loop.kappa = cfg.kappa
            if enabled:
                handle = flatten_perturbation(handle, td, cfg.window_alpha,
                                              mu=2.2 * fnorm)
                handle, loop = sink_translation_perturbation(
                    handle, td, loop, cfg.window_alpha, cfg.n, mu=1.0)
            else:
                loop = LoopData(loop.word, loop.x_entry, loop.m1, loop.p_a,
                                cfg.n, cfg.kappa,
                                loop.transition_length() + cfg.n)
            x0 = wrap(3.0 + loop.p_a)
            windows.append(_Window(i, a0, loop, [(x0, 0.0)], enabled))
            summaries.append(WindowSummary(
                i, a0, enabled, [list(l) for l in trace.word.letters],
                fnorm, trace=trace.to_record()))
        except Exception as exc:  # per-point failures recorded, sweep continues
            summaries.append(WindowSummary(i, a0, enabled, [], float("nan"),
                                           error=f"{type(exc).__name__}: {exc}"))
    return handle, windows, summaries


def run_sweep(cfg: SweepConfig) -> SweepReport:
    base = make_family("coupled", k=cfg.k, d=cfg.d, eps=cfg.eps)
    handle, windows, summaries = _build_windows(cfg, base)

    certificates: list[dict] = []
    for w in windows:
        if not w.enabled or not cfg.certify_boxes:
            continue
        s = next(s for s in summaries if s.index == w.index)
        try:
            cert = trapping_box_check(handle, w.loop, w.a0)
            s.trapping = cert.to_record()
            certificates.append(cert.to_record() | {"window": w.index})
        except Exception as exc:
            s.error = f"{type(exc).__name__}: {exc}"

    rows = []
    win_half = 2.0 ** (-cfg.lattice_N)
    for a in cfg.grid():
        seeds = []
        for w in windows:
            if w.enabled and all(abs(a[j] - w.a0[j]) < win_half
                                 for j in range(cfg.k)):
                seeds.extend(w.seeds)
        recs: list[SinkRecord] = []
        if seeds:
            recs = detect_sinks(handle, ((0.0, 1.0), (0.0, 1.0)), [a],
                                cfg.period_bound, seeds=seeds,
                                max_steps=cfg.max_steps)
        count = len(recs)
        periods = [r.period for r in recs]
        rows.append((list(a), count, min(periods) if periods else 0,
                     max(periods) if periods else 0))
        certificates.extend(r.to_record() | {"grid_a": list(a)} for r in recs)

    if cfg.ifs_certificate:
        cert = jet_coverage_certificate(0.1, 14, 1, ((-0.5, 0.5), (-0.15, 0.15)))
        certificates.append(cert.to_record())

    counts = np.array([r[1] for r in rows])
    grid_pts = np.array([r[0] for r in rows])
    thick = _thickened_coverage(cfg, grid_pts)
    coverage = {
        "fraction_with_sink": float(np.mean(counts >= 1)),
        "fraction_with_2": float(np.mean(counts >= 2)),
        "thickened_lattice_fraction": thick,
    }
    cfg_dict = {k2: (list(v) if isinstance(v, tuple) else v)
                for k2, v in asdict(cfg).items()}
    return SweepReport(cfg_dict, rows, summaries, certificates, coverage)


def _thickened_coverage(cfg: SweepConfig, grid_pts) -> float:
    """Fraction of the grid inside the quarter-step thickened lattice."""
    pts = lattice_points(cfg.alpha, cfg.lattice_N, cfg.k)
    step = cfg.alpha * 2.0 ** (-cfg.lattice_N + 1)
    covered = 0
    for g in grid_pts:
        ok = any(all(abs(g[j] - p[j]) <= step / 4.0 for j in range(cfg.k))
                 for p in pts)
        covered += bool(ok)
    return covered / max(1, len(grid_pts))


# ---------------------------------------------------------------------------
# export / import / plots
# ---------------------------------------------------------------------------

def export_report(rep: SweepReport, csv_path=None, json_path=None) -> list[str]:
    """Write the CSV rows and the JSON sidecar (deterministic bytes)."""
    csv_path = csv_path or rep.config["csv_path"]
    json_path = json_path or rep.config["json_path"]
    written = []
    with open(csv_path, "w", newline="") as f:
        wtr = csv.writer(f)
        wtr.writerow(["a", "count", "min_period", "max_period"])
        for a, count, mn, mx in rep.rows:
            wtr.writerow([";".join(repr(float(v)) for v in a), count, mn, mx])
    written.append(csv_path)
    payload = {
        "version": REPORT_VERSION,
        "config": rep.config,
        "rows": rep.rows,
        "windows": [asdict(w) for w in rep.windows],
        "certificates": rep.certificates,
        "coverage": rep.coverage,
    }
    with open(json_path, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=1, default=_json_default)
    written.append(json_path)
    return written


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def import_report(json_path) -> SweepReport:
    with open(json_path) as f:
        payload = json.load(f)
    windows = [WindowSummary(**w) for w in payload["windows"]]
    for w in windows:
        w.a0 = tuple(w.a0)
    rows = [tuple(r) for r in payload["rows"]]
    return SweepReport(payload["config"], rows, windows,
                       payload["certificates"], payload["coverage"])


def reports_equal(r1: SweepReport, r2: SweepReport) -> bool:
    return (json.dumps(r1.rows, sort_keys=True) == json.dumps(r2.rows, sort_keys=True)
            and r1.coverage == r2.coverage
            and json.dumps(r1.certificates, sort_keys=True, default=_json_default)
            == json.dumps(r2.certificates, sort_keys=True, default=_json_default))


def emit_plots(rep: SweepReport, svg_path=None) -> str:
    """Sink-count step plot (k = 1) or heatmap (k = 2), lattice marked, SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    svg_path = svg_path or rep.config["svg_path"]
    k = rep.config["k"]
    pts = lattice_points(rep.config["alpha"], rep.config["lattice_N"], k)
    fig, ax = plt.subplots(figsize=(7, 4))
    if k == 1:
        xs = [r[0][0] for r in rep.rows]
        cs = [r[1] for r in rep.rows]
        ax.step(xs, cs, where="mid")
        ax.plot([p[0] for p in pts], [0] * len(pts), "k|", markersize=14)
        ax.set_xlabel("a")
        ax.set_ylabel("sink count")
    elif k == 2:
        xs = sorted({r[0][0] for r in rep.rows})
        ys = sorted({r[0][1] for r in rep.rows})
        grid = np.zeros((len(ys), len(xs)))
        for (a, count, _, _) in rep.rows:
            grid[ys.index(a[1]), xs.index(a[0])] = count
        im = ax.imshow(grid, origin="lower", aspect="auto",
                       extent=(xs[0], xs[-1], ys[0], ys[-1]))
        fig.colorbar(im, ax=ax, label="sink count")
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "wx", markersize=6)
        ax.set_xlabel("a1")
        ax.set_ylabel("a2")
    else:
        plt.close(fig)
        raise DomainError("plots support k in {1, 2} only")
    ax.set_title("sinks over the parameter line" if k == 1 else
                 "sinks over the parameter square")
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    return svg_path
