"""Command line: coverage certificates, greedy traces, pipelines, sweeps.

Configuration is one TOML file whose tables mirror the subcommands; every
flag overrides the matching config key.  Exit codes: 0 success, 2 a
certificate or verdict failed, 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import tomli

from . import __version__
from .dynamics import make_family, param_jets
from .errors import BlenderlabError
from .hyperbolic import continue_fixed_point
from .ifs import jet_coverage_certificate, limit_set_cover
from .paratangency import (constant_parabola, default_tolerance, eta_jet,
                           greedy_code, paratangency_verdict)
from .sinks import (build_sink_pipeline, detect_sinks, flatten_norm,
                    tangency_normal_form, trapping_box_check)
from .sweep import SweepConfig, emit_plots, export_report, import_report, run_sweep

EXIT_OK, EXIT_ERROR, EXIT_CERT = 0, 1, 2


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as f:
        return tomli.load(f)


def _get(cfg: dict, table: str, key: str, override, default):
    if override is not None:
        return override
    return cfg.get(table, {}).get(key, default)


def _write_json(path: str, payload: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=1)


def cmd_ifs_coverage(args) -> int:
    cfg = _load_config(args.config)
    eps = _get(cfg, "ifs", "eps", args.eps, 0.1)
    depth = _get(cfg, "ifs", "depth", args.depth, 14)
    d = _get(cfg, "ifs", "d", args.d, 1)
    box = cfg.get("ifs", {}).get("box", [[-0.5, 0.5], [-0.15, 0.15]])
    cover = limit_set_cover(eps=0.0, depth=min(depth, 20), dp=0)
    cert = jet_coverage_certificate(eps, depth, d, box)
    out = _get(cfg, "output", "ifs_json", args.out, "ifs_coverage.json")
    _write_json(out, {
        "limit_set_hausdorff": cover.hausdorff_centers,
        "certificate": cert.to_record(),
    })
    print(f"limit-set Hausdorff distance: {cover.hausdorff_centers:.3e}")
    print(f"jet coverage at depth {depth}: "
          f"{'covered' if cert.covered else f'gap {cert.witness}'} -> {out}")
    return EXIT_OK if cert.covered else EXIT_CERT


def cmd_paratangency(args) -> int:
    cfg = _load_config(args.config)
    k = _get(cfg, "construction", "k", args.k, 1)
    d = _get(cfg, "construction", "d", args.d, 1)
    eps = _get(cfg, "construction", "epsilon", args.eps, 0.05)
    depth = _get(cfg, "greedy", "depth", args.depth, 40)
    h = make_family("expanding", k=k, d=d, eps=eps)
    a_jets = param_jets(h)
    trace = greedy_code(h, constant_parabola(k, d), a_jets, depth,
                        check_charts=8)
    eta = eta_jet(h, constant_parabola(k, d), trace.word, a_jets)
    tol = default_tolerance(depth)
    verdict = paratangency_verdict(eta, lambda i: tol)
    out = _get(cfg, "output", "trace_json", args.out, "paratangency.json")
    _write_json(out, {
        "trace": trace.to_record(),
        "eta_coeffs": list(eta.c),
        "tolerance": tol,
        "verdict": verdict,
    })
    print(f"greedy depth {depth}: margins >= "
          f"({min(m for m, _ in trace.margins()):.3g}, "
          f"{min(m for _, m in trace.margins()):.3g}); verdict {verdict} -> {out}")
    return EXIT_OK if all(verdict) else EXIT_CERT


def cmd_flatten(args) -> int:
    cfg = _load_config(args.config)
    d = _get(cfg, "construction", "d", args.d, 2)
    eps = _get(cfg, "construction", "epsilon", args.eps, 0.01)
    depth = _get(cfg, "sinks", "depth", args.depth, 20)
    alpha = _get(cfg, "sinks", "alpha", args.alpha, 1.0 / 16)
    h = make_family("coupled", k=1, d=d, eps=eps)
    a_jets = param_jets(h)
    omega = continue_fixed_point(h, (3.0, 0.0), a_jets)
    trace = greedy_code(h, constant_parabola(1, d), a_jets, depth)
    td = tangency_normal_form(h, omega, trace.word, a_jets)
    norm = flatten_norm(h, td.c_poly, (0.0,), alpha)
    from .sinks import flatten_perturbation

    h2 = flatten_perturbation(h, td, alpha, mu=2.2 * max(norm, 1e-300))
    td2 = tangency_normal_form(h2, omega, trace.word, a_jets)
    out = _get(cfg, "output", "flatten_json", args.out, "flatten.json")
    _write_json(out, {
        "alpha": alpha, "perturbation_norm": norm,
        "offset_before": abs(td.c_jet.value()),
        "offset_after": abs(td2.c_jet.value()),
    })
    print(f"flatten at alpha={alpha}: |C| {abs(td.c_jet.value()):.3e} -> "
          f"{abs(td2.c_jet.value()):.3e}, perturbation C^d norm {norm:.3e} -> {out}")
    return EXIT_OK if abs(td2.c_jet.value()) <= 1e-7 else EXIT_CERT


def cmd_sinks(args) -> int:
    cfg = _load_config(args.config)
    d = _get(cfg, "sinks", "d", args.d, 2)
    n = _get(cfg, "sinks", "n", args.n, 12)
    depth = _get(cfg, "sinks", "depth", args.depth, 2)
    alpha = _get(cfg, "sinks", "alpha", args.alpha, 1.0 / 16)
    kappa = _get(cfg, "sinks", "kappa", args.kappa, 3.0)
    pipe = build_sink_pipeline(k=1, d=d, eps=0.01, depth=depth, n=n,
                               alpha=alpha, kappa=kappa)
    recs = detect_sinks(pipe.handle, pipe.region(), [(0.0,)],
                        period_bound=pipe.loop.period + 4, seeds=pipe.seeds())
    cert = trapping_box_check(pipe.handle, pipe.loop, (0.0,))
    out = _get(cfg, "output", "sinks_json", args.out, "sinks.json")
    _write_json(out, {
        "records": [r.to_record() for r in recs],
        "trapping": cert.to_record(),
    })
    print(f"period {pipe.loop.period} loop: {len(recs)} sink(s); box "
          f"norm {cert.worst_norm:.3g} (< 1: {cert.ok()}) -> {out}")
    return EXIT_OK if recs and cert.ok() else EXIT_CERT


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    s = cfg.get("sweep", {})
    sweep_cfg = SweepConfig(
        k=s.get("k", 1), d=s.get("d", 1), eps=s.get("epsilon", 0.01),
        depth=s.get("depth", 2), n=s.get("n", 12),
        lattice_N=_get(cfg, "sweep", "lattice_N", args.lattice_n, 3),
        alpha=s.get("alpha", 1.0),
        certify_boxes=s.get("certify_boxes", False),
        ifs_certificate=s.get("ifs_certificate", False),
        csv_path=_get(cfg, "output", "csv", args.csv, "sweep.csv"),
        json_path=_get(cfg, "output", "json", args.json, "sweep.json"),
        svg_path=_get(cfg, "output", "svg", args.svg, "sweep.svg"),
    )
    rep = run_sweep(sweep_cfg)
    written = export_report(rep)
    written.append(emit_plots(rep))
    errors = [w.error for w in rep.windows if w.error]
    print(f"sweep N={sweep_cfg.lattice_N}: coverage "
          f"{rep.coverage['fraction_with_sink']:.3f}, "
          f"{len(errors)} window error(s) -> {', '.join(written)}")
    return EXIT_OK if not errors else EXIT_CERT


def cmd_report(args) -> int:
    rep = import_report(args.input)
    if args.csv:
        export_report(rep, csv_path=args.csv, json_path=args.json or "/dev/null")
    if args.svg:
        emit_plots(rep, svg_path=args.svg)
    print(f"re-rendered report ({len(rep.rows)} rows, "
          f"coverage {rep.coverage['fraction_with_sink']:.3f})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="blenderlab",
        description="Numerical laboratory for blender dynamics on the annulus",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--out", help="output JSON path")

    sp = sub.add_parser("ifs-coverage", help="limit-set and jet coverage certificates")
    common(sp)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--d", type=int)
    sp.set_defaults(func=cmd_ifs_coverage)

    sp = sub.add_parser("paratangency", help="greedy coding trace and verdict")
    common(sp)
    sp.add_argument("--k", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--depth", type=int)
    sp.set_defaults(func=cmd_paratangency)

    sp = sub.add_parser("flatten", help="tangency flattening on the coupled family")
    common(sp)
    sp.add_argument("--d", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--alpha", type=float)
    sp.set_defaults(func=cmd_flatten)

    sp = sub.add_parser("sinks", help="full perturbation pipeline and certificates")
    common(sp)
    sp.add_argument("--d", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--kappa", type=float)
    sp.set_defaults(func=cmd_sinks)

    sp = sub.add_parser("sweep", help="lattice parameter sweep")
    common(sp)
    sp.add_argument("--lattice-n", type=int, dest="lattice_n")
    sp.add_argument("--csv")
    sp.add_argument("--json")
    sp.add_argument("--svg")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="re-render outputs from a saved report")
    sp.add_argument("input", help="report JSON")
    sp.add_argument("--csv")
    sp.add_argument("--json")
    sp.add_argument("--svg")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BlenderlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
