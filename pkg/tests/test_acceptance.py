"""Acceptance suite: one criterion per test, each printing a PASS line.

Run with  pytest tests/test_acceptance.py -v -s  to see the per-criterion
lines; every tolerance is pinned here, nothing is deferred to calibration.
"""

import math
import time

import numpy as np
import pytest

from blenderlab.dynamics import make_family, param_jets
from blenderlab.hyperbolic import (PolyGraph, continue_fixed_point,
                                   graph_transform_manifold, inclination_test)
from blenderlab.ifs import (Branch1D, SymbolWord, jet_coverage_certificate,
                            limit_set_cover, y_series)
from blenderlab.jets import identity_jets, multi_indices
from blenderlab.paratangency import (constant_parabola, eta_jet, greedy_code,
                                     paratangency_verdict)
from blenderlab.sinks import (build_sink_pipeline, detect_sinks,
                              dissipation_check, flatten_norm,
                              flatten_perturbation, tangency_normal_form,
                              trapping_box_check)
from blenderlab.sweep import SweepConfig, export_report, lattice_points, run_sweep
from helpers import fd_derivative
from test_paratangency import wiggly_family


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"{name}: {detail}"


# -- expression generator for criterion 1 -----------------------------------

_UNARY = {
    "sin": (math.sin, math.cos, lambda v: -math.sin(v)),
    "cos": (math.cos, lambda v: -math.sin(v), lambda v: -math.cos(v)),
    "exp2": (lambda v: math.exp(0.5 * v), lambda v: 0.5 * math.exp(0.5 * v),
             lambda v: 0.25 * math.exp(0.5 * v)),
}


def _random_expression(rng, k, d, depth=3):
    """Returns (jet builder, float mirror) for one random composite."""
    if depth == 0 or rng.random() < 0.25:
        i = int(rng.integers(0, k))
        c = float(rng.uniform(-0.5, 0.5))
        return (lambda aj: aj[i] + c), (lambda v: v[i] + c)
    op = rng.choice(["add", "mul", "unary"])
    f1, g1 = _random_expression(rng, k, d, depth - 1)
    if op == "unary":
        name = rng.choice(list(_UNARY))
        f0, d1f, d2f = _UNARY[name]

        def jet_fn(aj, f1=f1, f0=f0, d1f=d1f, d2f=d2f):
            x = f1(aj)
            x0 = x.value()
            return x.compose_scalar([f0(x0), d1f(x0), d2f(x0)])

        return jet_fn, (lambda v, g1=g1, f0=f0: f0(g1(v)))
    f2, g2 = _random_expression(rng, k, d, depth - 1)
    if op == "add":
        return (lambda aj: f1(aj) + f2(aj)), (lambda v: g1(v) + g2(v))
    return (lambda aj: f1(aj) * f2(aj)), (lambda v: g1(v) * g2(v))


def test_criterion_1_jet_arithmetic_fd():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for trial in range(1000):
        k = int(rng.integers(1, 3))
        d = 2
        base = rng.uniform(-0.3, 0.3, k)
        jet_fn, flt_fn = _random_expression(rng, k, d)
        jet = jet_fn(identity_jets(k, d, base))
        for alpha in multi_indices(k, d):
            want = fd_derivative(flt_fn, base, alpha)
            got = jet.deriv(alpha)
            err = abs(got - want) / max(abs(want), 1.0)
            worst = max(worst, err)
    dt = time.perf_counter() - t0
    _report("1 (jet arithmetic)", worst <= 1e-6 and dt < 5.0,
            f"1000 expressions, max rel err {worst:.2e}, {dt:.2f}s")


def test_criterion_2_blender_interval():
    t0 = time.perf_counter()
    cover = limit_set_cover(eps=0.0, depth=20, dp=0)
    bound = 2.0 * (2.0 / 3.0) ** 20
    ok = cover.hausdorff_centers <= bound
    rng = np.random.default_rng(102)
    worst_pert = 0.0
    for _ in range(5):
        c = rng.uniform(-1.0, 1.0, 6)

        def b(y, s, c0, c1, c2):
            return 2 * y / 3 + s / 3 + 0.01 * (c0 + c1 * np.sin(y) + c2 * np.cos(y)) / 3

        branches = [
            Branch1D(lambda y, c=c: b(y, -1, c[0], c[1], c[2]), 0.674),
            Branch1D(lambda y, c=c: b(y, +1, c[3], c[4], c[5]), 0.674),
        ]
        pc = limit_set_cover(depth=20, branches=branches)
        worst_pert = max(worst_pert, pc.hausdorff_centers)
    dt = time.perf_counter() - t0
    ok = ok and worst_pert <= 0.05 and dt < 10.0
    _report("2 (blender interval)", ok,
            f"model distance {cover.hausdorff_centers:.2e} <= {bound:.2e}, "
            f"perturbed <= {worst_pert:.3f}, {dt:.2f}s")


def test_criterion_3_parablender_jet_coverage():
    t0 = time.perf_counter()
    box = ((-0.5, 0.5), (-0.15, 0.15))
    cert = jet_coverage_certificate(0.1, 14, 1, box)
    rng = np.random.default_rng(103)
    ok = cert.covered
    for _ in range(3):
        offs = {l: float(rng.uniform(-0.005, 0.005))
                for l in [(-1, -1), (-1, 1), (1, -1), (1, 1)]}
        pc = jet_coverage_certificate(0.1, 14, 1, box, offsets=offs)
        ok = ok and pc.covered
    dt = time.perf_counter() - t0
    ok = ok and dt < 60.0
    _report("3 (parablender jet coverage)", ok,
            f"box {box} covered at N=14 (and with branch offsets), {dt:.2f}s")


@pytest.mark.parametrize("d", [0, 1, 2])
def test_criterion_4_greedy_paratangency(d):
    t0 = time.perf_counter()
    eps = 0.05
    h = make_family("expanding", k=1, d=d, eps=eps)
    aj = param_jets(h)
    rng = np.random.default_rng(104 + d)
    N = 40
    tol = 4.0 * (2.0 / 3.0) ** N
    worst_m0, worst_mi, worst_eta = 1.0, 1.0, 0.0
    n_fam = 100 // 3 + 1 if d else 34
    for _ in range(34):
        p = wiggly_family(rng, 1, d, eps)
        trace = greedy_code(h, p, aj, N)
        worst_m0 = min(worst_m0, min(m for m, _ in trace.margins()))
        worst_mi = min(worst_mi, min(m for _, m in trace.margins()))
        eta = eta_jet(h, p, trace.word, aj)
        verdict = paratangency_verdict(eta, lambda i: tol)
        assert all(verdict)
        worst_eta = max(worst_eta, max(abs(v) for v in
                                       [eta.deriv((i,)) for i in range(d + 1)]))
    dt = time.perf_counter() - t0
    ok = worst_m0 >= -1e-10 and worst_mi >= -1e-10 and dt < 30.0
    _report(f"4 (greedy paratangency d={d})", ok,
            f"34 families, chain margins >= ({worst_m0:.2e}, {worst_mi:.2e}), "
            f"max |eta deriv| {worst_eta:.2e} <= tol {tol:.2e}, {dt:.2f}s")


def test_criterion_5_model_self_consistency():
    rng = np.random.default_rng(105)
    h = make_family("expanding", k=1, d=2, eps=0.05)
    aj = param_jets(h, [0.07])
    worst = 0.0
    for _ in range(50):
        period = int(rng.integers(1, 6))
        w = SymbolWord(tuple(tuple(rng.choice([-1, 1], 3))
                             for _ in range(period)), periodic=True)
        man = graph_transform_manifold(h, w, "unstable", aj)
        want = y_series(w, 0.05, aj, k=1, d=2).jet
        worst = max(worst, float(np.max(np.abs(man.graph.coeffs[0].c - want.c))))
    _report("5 (graph transform vs series)", worst <= 1e-8,
            f"50 random periodic words, max height gap {worst:.2e}")


def test_criterion_6_flattening():
    d = 1
    h = make_family("coupled", k=1, d=d, eps=0.01)
    aj = param_jets(h)
    omega = continue_fixed_point(h, (3.0, 0.0), aj)
    trace = greedy_code(h, constant_parabola(1, d), aj, 20)
    td = tangency_normal_form(h, omega, trace.word, aj)
    rng = np.random.default_rng(106)
    ok_outside, worst_resid = True, 0.0
    for e in range(3, 7):
        alpha = 2.0 ** -e
        h2 = flatten_perturbation(h, td, alpha, mu=1.0)
        for _ in range(20):  # (a) bit-exact outside the parameter window
            z = (rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.5))
            a = [rng.choice([-1, 1]) * rng.uniform(2 * alpha, 0.95)]
            ok_outside &= h.eval(z, a) == h2.eval(z, a)
        for a0 in np.linspace(-alpha * 0.99, alpha * 0.99, 11):  # (b)
            td2 = tangency_normal_form(h2, omega, trace.word,
                                       param_jets(h, [a0]))
            worst_resid = max(worst_resid, abs(td2.c_jet.value()))
    # (c) measured C^d norm slope with the vanishing-jet surrogate a^{d+1}
    alphas = [2.0 ** -e for e in range(3, 7)]
    sur = {(d + 1,): 1.0}
    norms = [flatten_norm(h, sur, (0.0,), al) for al in alphas]
    slope = float(np.polyfit(np.log2(alphas), np.log2(norms), 1)[0])
    ok = ok_outside and worst_resid <= 1e-7 and slope >= 0.9
    _report("6 (flattening perturbation)", ok,
            f"bit-exact outside: {ok_outside}, tangency residual {worst_resid:.2e}"
            f" <= 1e-7, norm slope {slope:.2f} >= 0.9")


def test_criterion_7_sink_creation():
    t0 = time.perf_counter()
    alpha = 1.0 / 16
    pipe = build_sink_pipeline(k=1, d=2, eps=0.01, depth=2, n=12,
                               alpha=alpha, kappa=3.0)
    period = pipe.loop.period
    grid = [(a,) for a in np.linspace(-alpha, alpha, 13)[1:-1]]
    recs = detect_sinks(pipe.handle, pipe.region(), grid, period_bound=20,
                        seeds=pipe.seeds())
    ok = len(recs) == 11
    ok = ok and all(r.period == period for r in recs)
    ok = ok and all(abs(m) < 1.0 for r in recs for m in r.multipliers)
    ok = ok and all(r.avoids_band for r in recs)
    certs = []
    for (a,) in [grid[i] for i in (0, 3, 5, 7, 10)]:
        certs.append(trapping_box_check(pipe.handle, pipe.loop, (a,)))
    ok = ok and all(c.ok() and c.worst_norm < 1.0 for c in certs)
    ok = ok and all(c.norm_bound < 0.5 for c in certs)
    dt = time.perf_counter() - t0
    ok = ok and dt < 120.0
    _report("7 (sink creation)", ok,
            f"period {period} = N+n with n=12 at 11 grid points, "
            f"{len(certs)} boxes (worst norm "
            f"{max(c.worst_norm for c in certs):.3f}), orbits avoid the band, "
            f"{dt:.1f}s")


def test_criterion_8_dissipation_margins():
    oks, details = [], []
    for d in (1, 2, 3):
        h = make_family("dissipative", k=1, d=d, eps=0.002)
        pt = continue_fixed_point(h, (3.0, 0.0), param_jets(h))
        rep = dissipation_check(pt, d)
        dp = h.dp
        want_det = 4.0 ** (dp + 1) * 4.0 ** (-((dp + 2) ** 2))
        oks.append(rep.det == pytest.approx(want_det, rel=1e-10, abs=0.0)
                   and rep.det_margin > 0 and rep.line_field_margin > 0)
        details.append(f"d={d}: det {rep.det:.3e}, margin {rep.line_field_margin:.6f}")
    _report("8 (dissipation margins)", all(oks), "; ".join(details))


def test_criterion_9_sweep_determinism_localization(tmp_path):
    cfg = SweepConfig(lattice_N=3,
                      csv_path=str(tmp_path / "s.csv"),
                      json_path=str(tmp_path / "s.json"),
                      svg_path=str(tmp_path / "s.svg"))
    assert len(lattice_points(cfg.alpha, 3, 1)) == 8
    rep1 = run_sweep(cfg)
    rep2 = run_sweep(cfg)
    export_report(rep1, str(tmp_path / "r1.csv"), str(tmp_path / "r1.json"))
    export_report(rep2, str(tmp_path / "r2.csv"), str(tmp_path / "r2.json"))
    identical = ((tmp_path / "r1.csv").read_bytes()
                 == (tmp_path / "r2.csv").read_bytes())
    # toggle window 3 and verify changes stay inside its 2 * 2^{-N-1} band
    pts = lattice_points(cfg.alpha, 3, 1)
    toggle = 3
    cfg_t = SweepConfig(lattice_N=3,
                        windows_enabled=[i for i in range(8) if i != toggle],
                        csv_path=cfg.csv_path, json_path=cfg.json_path,
                        svg_path=cfg.svg_path)
    rep3 = run_sweep(cfg_t)
    win = 2.0 * 2.0 ** (-3 - 1)
    localized = True
    for r1, r3 in zip(rep1.rows, rep3.rows):
        if r1[1] != r3[1]:
            localized &= abs(r1[0][0] - pts[toggle][0]) < win
    _report("9 (sweep determinism + localization)", identical and localized,
            f"byte-identical CSV: {identical}; toggled diffs confined to "
            f"+-{win} around a0={pts[toggle][0]}")


def test_criterion_10_inclination_decay():
    h = make_family("expanding", k=1, d=1, eps=0.05)
    aj = param_jets(h)
    rng = np.random.default_rng(110)
    worst_ratio = 0.0
    for _ in range(20):
        period = int(rng.integers(1, 5))
        w = SymbolWord(tuple(tuple(rng.choice([-1, 1], 2))
                             for _ in range(period)), periodic=True)
        seed = PolyGraph(0.0, [rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3),
                               rng.uniform(-0.2, 0.2)], 1.0 + 0.01)
        dists = inclination_test(h, seed, w, aj, 14)
        for t in range(3, 13):
            if dists[t][1] > 1e-14:
                worst_ratio = max(worst_ratio, dists[t + 1][1] / dists[t][1])
    _report("10 (inclination decay)", worst_ratio <= 0.75,
            f"20 transversal seeds, worst C1 ratio {worst_ratio:.3f} <= 0.75")
