"""Tangency normal forms, sink-creating perturbations and certificates.

The pipeline realizes the quasi-homoclinic story on the coupled family:
a greedily coded unstable leaf of the blender crosses the fold strip,
whose image meets the stable segment {3} x [-1, 1] of the dissipative
fixed point with offset C(a) = c1 * y_word(a) (an exact polynomial here);
a bump-localized term subtracts C(a) (tangency for every |a - a0| < alpha),
a second term shifts the critical image onto the invariant-line-field
curve through the n-th backward point (closing a period N + n loop), and
the trapping box around that loop is certified by chain-rule Jacobians.

Scale note: with n = 12 and the construction's multipliers, the trapping
box has width sigma'^-n far below the double-precision resolution of the
annulus coordinate near x = 3, and the composed transition's second
derivative (the squared journey expansion) makes the sink basin thinner
still.  The maps are piecewise polynomials with exactly representable
coefficients, so refinement, certification and re-iteration run through
mpmath; every recorded quantity is a double.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath as mp
import numpy as np

from .dynamics import (BumpPerturbation, FamilyHandle, SnapPerturbation,
                       make_family, param_jets, wrap)
from .errors import CertificationError, ConvergenceError, DomainError
from .hyperbolic import HyperbolicPointData, continue_fixed_point
from .ifs import SymbolWord
from .jets import Jet, eval_poly, multi_indices
from .paratangency import constant_parabola, greedy_code

MP_DPS = 60
AVOID_BAND = (3.5, 4.5)  # sink orbits must avoid this x-band (times R)


# ---------------------------------------------------------------------------
# exact polynomial plumbing for the model's leaf heights
# ---------------------------------------------------------------------------

def leaf_height_poly(h: FamilyHandle, word: SymbolWord) -> dict:
    """{multi-index: Fraction} of the truncated leaf height y_word(a).

    Exact rational coefficients (eps enters as the exact binary fraction of
    its double), so amplitude evaluations cancel the handle's own height
    arithmetic to working precision at any mpmath dps.
    """
    from fractions import Fraction

    out: dict = {}
    w = Fraction(1)
    eps = Fraction(h.params.eps)
    key0 = (0,) * h.k
    for letter in word.letters:
        out[key0] = out.get(key0, Fraction(0)) + w * Fraction(letter[0], 3)
        li = h.regions.letter_index(tuple(letter))
        for alpha, coeff in h.regions.polys[li].poly_exact().items():
            out[alpha] = out.get(alpha, Fraction(0)) + w * eps * coeff
        w *= Fraction(2, 3)
    return out


def poly_scale(poly: dict, s) -> dict:
    from fractions import Fraction

    sf = Fraction(s) if not isinstance(s, Fraction) else s
    return {k: v * sf for k, v in poly.items()}


def poly_sub(p1: dict, p2: dict) -> dict:
    from fractions import Fraction

    out = dict(p1)
    for k, v in p2.items():
        out[k] = out.get(k, Fraction(0)) - v
    return out


def poly_jet(poly: dict, a_jets) -> Jet:
    v = eval_poly(poly, a_jets)
    if not isinstance(v, Jet):
        v = Jet.constant(a_jets[0].k, a_jets[0].d, float(v))
    return v


# ---------------------------------------------------------------------------
# tangency normal form
# ---------------------------------------------------------------------------

@dataclass
class TangencyData:
    """Normal-form package around the (quasi-)homoclinic tangency.

    The transition is the single fold application from the psi-chart at
    the tangency preimage P_inf = (0, height(a)) to the Omega-chart
    (x - 3, y); A is the chart x-output, B the centered y-output.
    """

    omega: HyperbolicPointData
    word: SymbolWord
    height_poly: dict           # leaf height y_word(a), exact polynomial
    c_poly: dict                # C(a) = A_a(c_a, 0), exact polynomial
    c_jet: Jet                  # jet of C at the base point
    c_crit: Jet                 # critical point jet c_a (chart x)
    q0: float                   # image height of the critical point at a0
    curvature: float            # d^2_x A at the critical point
    theta: float
    U: float
    nu: np.ndarray              # sampled envelope of |d_a^d C| (101 grid)
    residuals: dict
    a0: tuple

    def p_inf(self) -> tuple[float, float]:
        return (0.0, float(eval_poly(self.height_poly,
                                     [float(v) for v in self.a0])))


def _x_deriv_first(h: FamilyHandle, z, a):
    return h.jacobian(z, a)[0][0]


def tangency_normal_form(h: FamilyHandle, omega: HyperbolicPointData,
                         word: SymbolWord, a_jets, theta: float = 0.25,
                         strict: bool = False, angle_tol: float = 1e-4,
                         ) -> TangencyData:
    """Extract (A, B, c_a, C(a), theta, U, nu) around the fold tangency.

    The unstable leaf is the word's truncated cylinder (a genuine piece of
    W^u(Omega) through the annulus entry); its fold image meets W^s(Omega)
    = {3} x R with offset C(a), measured from the true handle evaluation.
    """
    if h.params.kind != "coupled":
        raise DomainError("tangency data needs the coupled construction")
    k, d = a_jets[0].k, a_jets[0].d
    a0 = tuple(aj.value() for aj in a_jets)
    hp = leaf_height_poly(h, word)
    height_jet = poly_jet(hp, a_jets)

    # critical point of x -> A(x, 0) on the leaf: jet Newton on d_x A = 0
    c = Jet.constant(k, d, 0.0)
    for _ in range(12):
        J, Hx, _ = h.jacobian((c, height_jet), a_jets, order=2)
        g = J[0][0]
        gv = g.c if isinstance(g, Jet) else np.array([float(g)])
        if float(np.max(np.abs(gv))) < 1e-13:
            break
        gg = Hx[0][0]
        c = c - (g if isinstance(g, Jet) else Jet.constant(k, d, float(g))) / gg
    J, Hx, _ = h.jacobian((c, height_jet), a_jets, order=2)
    curv = Hx[0][0]
    curv_v = curv.value() if isinstance(curv, Jet) else float(curv)
    if abs(curv_v) < 1e-3:
        raise CertificationError(f"tangency not quadratic: d2xA = {curv_v}")
    dxa = J[0][0]
    dxa_v = dxa.value() if isinstance(dxa, Jet) else float(dxa)
    if abs(dxa_v) > angle_tol:
        raise CertificationError(f"no critical point located: d_xA = {dxa_v}")

    gx, gy = h.eval((c, height_jet), a_jets)
    c_jet = wrap(gx - 3.0)
    q0 = gy.value() if isinstance(gy, Jet) else float(gy)

    # base offset polynomial C(a) = c1 * y_word(a); stacked perturbations
    # show up in the measured c_jet, which is what post-flatten checks use
    c_poly = poly_scale(hp, h.params.fold_scale)
    resid = {
        "C0": abs(c_jet.value()),
        "dxA": abs(dxa_v),
        "B0": 0.0,  # B is centered at q0 by construction
    }
    if strict and (resid["C0"] > 1e-8 or resid["dxA"] > 1e-8):
        raise CertificationError(f"(T) equalities violated: {resid}")

    # norm bound U over the theta-ball and the nu envelope of |d^d C|
    U = _transition_norm_bound(h, (0.0, height_jet.value()), a0, theta)
    nu = _nu_envelope(h, word, a_jets, n_grid=101)
    return TangencyData(omega, word, hp, c_poly, c_jet, c, q0, curv_v,
                        theta, U, nu, resid, a0)


def _transition_norm_bound(h, center, a0, theta, n=7) -> float:
    # sample the square inscribed in the perturbation plateau disc, where
    # every stacked term has exact derivatives to order 2
    half = 0.85 * theta / (2.0 * math.sqrt(2.0))
    worst = 1.0
    for dx in np.linspace(-half, half, n):
        for dy in np.linspace(-half, half, n):
            z = (center[0] + dx, center[1] + dy)
            J, HX, HY = h.jacobian(z, list(a0), order=2)
            for row in (J[0], J[1], HX[0], HX[1], HY[0], HY[1]):
                for e in row:
                    worst = max(worst, abs(float(e)))
    return worst


def _nu_envelope(h, word, a_jets, n_grid=101) -> np.ndarray:
    """Sampled |d_a^d C| over the parameter box ||a||_inf <= 1/2 (k = 1 grid)."""
    k, d = a_jets[0].k, a_jets[0].d
    hp = leaf_height_poly(h, word)
    cp = poly_scale(hp, h.params.fold_scale)
    out = []
    for t in np.linspace(-0.5, 0.5, n_grid):
        ajs = [Jet.variable(k, d, i, t if i == 0 else 0.0) for i in range(k)]
        cj = poly_jet(cp, ajs)
        out.append(abs(cj.deriv((d,) + (0,) * (k - 1))))
    return np.asarray(out)


# ---------------------------------------------------------------------------
# dissipation check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DissipationReport:
    det: float
    det_margin: float
    line_field_value: float      # |lam| |sigma|^{d-1}
    line_field_margin: float

    def ok(self) -> bool:
        return self.det_margin > 0 and self.line_field_margin > 0


def dissipation_check(omega: HyperbolicPointData, d: int) -> DissipationReport:
    lam = abs(omega.lam.value())
    sig = abs(omega.sigma.value())
    det = lam * sig
    dd = lam * sig ** (d - 1)
    return DissipationReport(det, 1.0 - det, dd, 1.0 - dd)


# ---------------------------------------------------------------------------
# the flattening perturbation (tangency for every |a - a0| < alpha)
# ---------------------------------------------------------------------------

def flatten_alpha0(td: TangencyData, h: FamilyHandle, mu: float,
                   floor: float = 2.0 ** -20) -> float:
    """Largest dyadic alpha <= 1/4 with ||rho_alpha * C||_{C^d} <= mu / 2."""
    alpha = 0.25
    while alpha >= floor:
        if flatten_norm(h, td.c_poly, td.a0, alpha) <= mu / 2.0:
            return alpha
        alpha /= 2.0
    raise CertificationError(f"no admissible alpha above {floor} for mu={mu}")


def flatten_norm(h: FamilyHandle, amp_poly: dict, a0, alpha: float,
                 n_grid: int = 33, order: int | None = None) -> float:
    """C^d norm (max order <= d, sup over a) of rho_alpha(a) * amp(a)."""
    from .dynamics import _PARAM_BUMP  # the parameter window profile

    k = h.k
    d = h.d if order is None else order
    worst = 0.0
    for t in np.linspace(-2.0 * alpha, 2.0 * alpha, n_grid):
        ajs = [Jet.variable(k, d, i, (a0[i] + t) if i == 0 else a0[i])
               for i in range(k)]
        cj = poly_jet(amp_poly, ajs)
        rho = _PARAM_BUMP((ajs[0] - a0[0]) * (1.0 / (2.0 * alpha)))
        for i in range(1, k):
            rho = rho * _PARAM_BUMP((ajs[i] - a0[i]) * (1.0 / (2.0 * alpha)))
        prod = rho * cj if isinstance(rho, Jet) else cj * rho
        for alpha_idx in multi_indices(k, d):
            worst = max(worst, abs(prod.deriv(alpha_idx)))
    return worst


def flatten_alpha0_for(h: FamilyHandle, amp_poly: dict, a0, mu: float,
                       floor: float = 2.0 ** -20) -> float:
    """Largest dyadic alpha <= 1/4 with ||rho_alpha * amp||_{C^d} <= mu / 2.

    For a vanishing-jet amplitude the norm decreases with alpha (the
    o(alpha^{d-j}) mechanism), so every alpha below alpha0 is admissible.
    """
    alpha = 0.25
    while alpha >= floor:
        if flatten_norm(h, amp_poly, a0, alpha) <= mu / 2.0:
            return alpha
        alpha /= 2.0
    raise CertificationError(f"no admissible alpha above {floor} for mu={mu}")


def flatten_perturbation(h: FamilyHandle, td: TangencyData, alpha: float,
                         mu: float = 0.05, amplitude: dict | None = None,
                         ) -> FamilyHandle:
    """Add the bump term cancelling C(a) on ||a - a0||_inf <= alpha."""
    amp_x = amplitude if amplitude is not None else poly_scale(td.c_poly, -1.0)
    alpha0 = flatten_alpha0_for(h, amp_x, td.a0, mu)
    if alpha > alpha0:
        raise DomainError(f"alpha={alpha} above the admissible alpha0={alpha0}")
    term = BumpPerturbation(
        center=td.p_inf(), theta=td.theta,
        amplitude=(amp_x, {}), alpha=alpha, a0=td.a0,
    )
    return h.with_perturbation(term)


# ---------------------------------------------------------------------------
# quasi-homoclinic snap
# ---------------------------------------------------------------------------

def quasi_snap_perturbation(h: FamilyHandle, word_shallow: SymbolWord,
                            word_deep: SymbolWord, theta: float, alpha: float,
                            a_jets, a0=None) -> FamilyHandle:
    """Slide the shallow unstable leaf onto the deep one inside the ball.

    Refuses when the leaves are not C^d-close (distance > 0.1 * theta),
    per the snap lemma's hypothesis.
    """
    a0 = tuple(a0) if a0 is not None else tuple(aj.value() for aj in a_jets)
    hp_s = leaf_height_poly(h, word_shallow)
    hp_d = leaf_height_poly(h, word_deep)
    delta = poly_sub(hp_d, hp_s)
    dist = _poly_cd_norm(delta, h.k, h.d, a0)
    if dist > 0.1 * theta:
        raise DomainError(
            f"leaves too far for the snap: {dist:.3g} > {0.1 * theta:.3g}"
        )
    center = (0.0, float(eval_poly(hp_s, [float(v) for v in a0])))
    term = SnapPerturbation(center=center, theta=theta, delta_poly=delta,
                            alpha=alpha, a0=a0)
    return h.with_perturbation(term)


def _poly_cd_norm(poly: dict, k: int, d: int, a0, n_grid: int = 21) -> float:
    worst = 0.0
    for t in np.linspace(-0.5, 0.5, n_grid):
        ajs = [Jet.variable(k, d, i, (a0[i] + t) if i == 0 else a0[i])
               for i in range(k)]
        pj = poly_jet(poly, ajs)
        for alpha_idx in multi_indices(k, d):
            worst = max(worst, abs(pj.deriv(alpha_idx)))
    return worst


# ---------------------------------------------------------------------------
# the homoclinic loop data and the sink translation
# ---------------------------------------------------------------------------

@dataclass
class LoopData:
    """Reference quasi-homoclinic loop of the pipeline."""

    word: SymbolWord
    x_entry: float              # annulus entry point of the leaf on W^u(Omega)
    m1: int                     # approach steps from the chart to the entry
    p_a: float                  # chart x of the journey start P0
    n: int = 0
    kappa: float = 3.0
    period: int = 0             # m1 + depth + 1 + n once n is set

    def transition_length(self) -> int:
        return self.m1 + self.word.depth + 1


def loop_data(h: FamilyHandle, word: SymbolWord, p_max: float = 0.45) -> LoopData:
    """Backward itinerary of the fold vertex and the chart journey start."""
    from .dynamics import branch_x_preimage

    x = 0.0
    for letter in word.letters:
        x = branch_x_preimage(letter, x)
    sig = h.sigma_hat
    m1 = 1
    while (3.0 - x) / sig ** m1 >= p_max:
        m1 += 1
    p_a = -(3.0 - x) / sig ** m1
    return LoopData(word, x, m1, p_a)


def sink_translation_perturbation(h: FamilyHandle, td: TangencyData,
                                  loop: LoopData, alpha: float, n: int,
                                  mu: float = 0.05) -> tuple[FamilyHandle, LoopData]:
    """Shift the critical image onto the W^n curve through (p^n_a, 0).

    For the coupled construction the invariant line field on the chart is
    exactly vertical, so W^n is the vertical line x = 3 + sigma^-n p_a and
    the shift amplitude is the constant sigma^-n p_a (exact power of two
    times the journey start).
    """
    if n < 1:
        raise DomainError("sink translation needs n >= 1")
    sig = h.sigma_hat
    w_shift = loop.p_a * sig ** (-n)
    if abs(w_shift) > mu:
        raise DomainError(f"n={n} too small: shift {w_shift} above mu={mu}")
    term = BumpPerturbation(
        center=td.p_inf(), theta=td.theta,
        amplitude=({(0,) * h.k: w_shift}, {}), alpha=alpha, a0=td.a0,
    )
    out = h.with_perturbation(term)
    new_loop = LoopData(loop.word, loop.x_entry, loop.m1, loop.p_a, n,
                        loop.kappa, loop.transition_length() + n)
    return out, new_loop


# ---------------------------------------------------------------------------
# extended-precision evaluation helpers
# ---------------------------------------------------------------------------

def mp_orbit(h: FamilyHandle, z, a, steps: int):
    """Iterate the family in mpmath scalars; a is a float tuple."""
    x, y = mp.mpf(z[0]), mp.mpf(z[1])
    am = [mp.mpf(v) for v in a]
    out = [(x, y)]
    for _ in range(steps):
        x, y = h.eval((x, y), am)
        out.append((x, y))
    return out


def mp_return_map(h: FamilyHandle, z, a, period: int):
    x, y = mp.mpf(z[0]), mp.mpf(z[1])
    am = [mp.mpf(v) for v in a]
    for _ in range(period):
        x, y = h.eval((x, y), am)
    return x, y


def mp_return_jacobian(h: FamilyHandle, z, a, period: int):
    """Chain-rule Jacobian of the period map at z (mp scalars)."""
    x, y = mp.mpf(z[0]), mp.mpf(z[1])
    am = [mp.mpf(v) for v in a]
    M = [[mp.mpf(1), mp.mpf(0)], [mp.mpf(0), mp.mpf(1)]]
    for _ in range(period):
        J = h.jacobian((x, y), am)
        M = [
            [J[0][0] * M[0][0] + J[0][1] * M[1][0],
             J[0][0] * M[0][1] + J[0][1] * M[1][1]],
            [J[1][0] * M[0][0] + J[1][1] * M[1][0],
             J[1][0] * M[0][1] + J[1][1] * M[1][1]],
        ]
        x, y = h.eval((x, y), am)
    return M, (x, y)


def mp_newton_periodic(h: FamilyHandle, z0, a, period: int, tol_exp: int = 45,
                       iters: int = 60):
    """mp Newton for the period-map fixed point; returns (point, residual)."""
    z = (mp.mpf(z0[0]), mp.mpf(z0[1]))
    tol = mp.mpf(10) ** (-tol_exp)
    for _ in range(iters):
        M, F = mp_return_jacobian(h, z, a, period)
        rx = _mp_wrap(F[0] - z[0])
        ry = F[1] - z[1]
        A, B = M[0][0] - 1, M[0][1]
        C, D = M[1][0], M[1][1] - 1
        det = A * D - B * C
        if det == 0:
            raise ConvergenceError("singular mp Newton system")
        dx = (-rx * D + ry * B) / det
        dy = (-A * ry + C * rx) / det
        z = (_mp_wrap(z[0] + dx), z[1] + dy)
        if max(abs(dx), abs(dy)) < tol:
            break
    F = mp_return_map(h, z, a, period)
    resid = max(abs(_mp_wrap(F[0] - z[0])), abs(F[1] - z[1]))
    return z, resid


def _mp_wrap(x):
    if -3 <= x < 3:
        return x
    return x - 6 * mp.floor((x + 3) / 6)


# ---------------------------------------------------------------------------
# sink detection
# ---------------------------------------------------------------------------

@dataclass
class SinkRecord:
    period: int
    point: tuple[float, float]
    orbit: list[tuple[float, float]]
    multipliers: tuple[complex, complex]
    residual: float
    a: tuple
    method: str
    avoids_band: bool

    def to_record(self) -> dict:
        return {
            "kind": "sink",
            "period": self.period,
            "point": list(self.point),
            "multipliers": [
                [m.real, m.imag] if isinstance(m, complex) else [float(m), 0.0]
                for m in self.multipliers
            ],
            "residual": self.residual,
            "a": list(self.a),
            "method": self.method,
            "avoids_band": self.avoids_band,
        }


def _orbit_avoids_band(orbit) -> bool:
    lo, hi = AVOID_BAND
    for x, _ in orbit:
        xc = float(x) % 6.0
        if lo <= xc <= hi:
            return False
    return True


def _multipliers_mp(M) -> tuple[complex, complex]:
    tr = M[0][0] + M[1][1]
    det = M[0][0] * M[1][1] - M[0][1] * M[1][0]
    disc = tr * tr - 4 * det
    if disc >= 0:
        r = mp.sqrt(disc)
        return (complex(float((tr + r) / 2)), complex(float((tr - r) / 2)))
    r = mp.sqrt(-disc)
    return (complex(float(tr / 2), float(r / 2)),
            complex(float(tr / 2), -float(r / 2)))


def detect_sinks(h: FamilyHandle, region, a_grid, period_bound: int,
                 seeds=None, seeds_per_axis: int = 4, max_steps: int = 10_000,
                 high_precision: bool = True, mp_dps: int = MP_DPS,
                 recurrence_tol: float = 1e-6) -> list[SinkRecord]:
    """Grid-seeded forward search for attracting periodic orbits.

    Seeds iterate in doubles first (recurrence within ``recurrence_tol``
    at some period <= period_bound); with ``high_precision`` every seed is
    also driven in mpmath, which is how the pipeline's strongly dissipative
    sinks (basins below double noise) are found.  Candidates are Newton
    refined in mpmath and recorded with mp-verified residuals.
    """
    (xlo, xhi), (ylo, yhi) = region
    if seeds is None:
        seeds = [
            (x, y)
            for x in np.linspace(xlo, xhi, seeds_per_axis)
            for y in np.linspace(ylo, yhi, seeds_per_axis)
        ]
    out: list[SinkRecord] = []
    for a in a_grid:
        a_t = tuple(a) if isinstance(a, (tuple, list, np.ndarray)) else (float(a),)
        rec = _detect_at_parameter(h, seeds, a_t, period_bound, max_steps,
                                   high_precision, mp_dps, recurrence_tol)
        out.extend(rec)
    return out


def _detect_at_parameter(h, seeds, a, period_bound, max_steps,
                         high_precision, mp_dps, rec_tol):
    found: list[SinkRecord] = []
    for seed in seeds:
        rec = None
        cand = _double_candidate(h, seed, a, period_bound, max_steps, rec_tol)
        if cand is not None:
            rec = _refine_and_record(h, cand[0], a, cand[1], mp_dps)
        if rec is None and high_precision:
            cand = _mp_candidate(h, seed, a, period_bound,
                                 min(max_steps, 4000), mp_dps)
            if cand is not None:
                rec = _refine_and_record(h, cand[0], a, cand[1], mp_dps)
        if rec is None:
            continue
        if not any(_same_orbit(rec, r) for r in found):
            found.append(rec)
    return found


def _double_candidate(h, seed, a, period_bound, max_steps, tol):
    z = (float(seed[0]), float(seed[1]))
    hist: list[tuple[float, float]] = []
    window = 4 * period_bound
    for t in range(max_steps):
        try:
            z = h.eval(z, list(a))
        except Exception:
            return None
        if not (abs(z[1]) < 1e6):
            return None
        hist.append((float(z[0]), float(z[1])))
        if len(hist) > window:
            hist.pop(0)
        if t > 2 * period_bound and t % period_bound == 0:
            got = _find_period(hist, period_bound, tol)
            if got:
                return hist[-1], got
    got = _find_period(hist, period_bound, tol)
    return (hist[-1], got) if got else None


def _find_period(hist, period_bound, tol):
    if len(hist) < 2:
        return None
    zlast = hist[-1]
    for M in range(1, min(period_bound, len(hist) - 1) + 1):
        zm = hist[-1 - M]
        if abs(wrap(zlast[0] - zm[0])) <= tol and abs(zlast[1] - zm[1]) <= tol:
            return M
    return None


def _mp_candidate(h, seed, a, period_bound, max_steps, mp_dps):
    with mp.workdps(mp_dps):
        z = (mp.mpf(seed[0]), mp.mpf(seed[1]))
        am = [mp.mpf(v) for v in a]
        hist = []
        window = 4 * period_bound
        for t in range(max_steps):
            z = h.eval(z, am)
            if not (abs(z[1]) < 1e6):
                return None
            hist.append(z)
            if len(hist) > window:
                hist.pop(0)
            if t > 2 * period_bound and t % (2 * period_bound) == 0:
                got = _find_period_mp(hist, period_bound, mp.mpf(10) ** -18)
                if got:
                    return (float(z[0]), float(z[1])), got
        got = _find_period_mp(hist, period_bound, mp.mpf(10) ** -18)
        return ((float(hist[-1][0]), float(hist[-1][1])), got) if got else None


def _find_period_mp(hist, period_bound, tol):
    if len(hist) < 2:
        return None
    zlast = hist[-1]
    for M in range(1, min(period_bound, len(hist) - 1) + 1):
        zm = hist[-1 - M]
        if abs(_mp_wrap(zlast[0] - zm[0])) <= tol and abs(zlast[1] - zm[1]) <= tol:
            return M
    return None


def _refine_and_record(h, z0, a, M, mp_dps):
    with mp.workdps(mp_dps):
        try:
            z, resid = mp_newton_periodic(h, z0, a, M)
        except ConvergenceError:
            return None
        if resid > mp.mpf(10) ** -20:
            return None
        # minimal period: try proper divisors
        period = M
        for div in range(1, M):
            if M % div == 0 and div < M:
                F = mp_return_map(h, z, a, div)
                if (abs(_mp_wrap(F[0] - z[0])) < mp.mpf(10) ** -25
                        and abs(F[1] - z[1]) < mp.mpf(10) ** -25):
                    period = div
                    break
        Mjac, _ = mp_return_jacobian(h, z, a, period)
        mults = _multipliers_mp(Mjac)
        if max(abs(m) for m in mults) >= 1.0 - 1e-6:
            return None
        orbit_mp = mp_orbit(h, (float(z[0]), float(z[1])), a, period - 1)
        orbit = [(float(px), float(py)) for px, py in orbit_mp]
        return SinkRecord(
            period=period,
            point=(float(z[0]), float(z[1])),
            orbit=orbit,
            multipliers=mults,
            residual=float(resid),
            a=tuple(float(v) for v in a),
            method="mp-newton",
            avoids_band=_orbit_avoids_band(orbit),
        )


def _same_orbit(r1: SinkRecord, r2: SinkRecord, tol: float = 1e-7) -> bool:
    if r1.period != r2.period or r1.a != r2.a:
        return False
    for p in r1.orbit:
        if any(abs(wrap(p[0] - q[0])) < tol and abs(p[1] - q[1]) < tol
               for q in r2.orbit):
            return True
    return False


def reiterate_check(h: FamilyHandle, rec: SinkRecord, periods: int = 1000,
                    mp_dps: int = MP_DPS) -> float:
    """Max drift from the recorded cycle over many re-iterated periods."""
    with mp.workdps(mp_dps):
        z = (mp.mpf(rec.point[0]), mp.mpf(rec.point[1]))
        am = [mp.mpf(v) for v in rec.a]
        worst = 0.0
        for _ in range(periods):
            for _ in range(rec.period):
                z = h.eval(z, am)
            worst = max(worst, float(abs(_mp_wrap(z[0] - rec.point[0]))),
                        float(abs(z[1] - rec.point[1])))
        return worst


# ---------------------------------------------------------------------------
# trapping-box certificate
# ---------------------------------------------------------------------------

@dataclass
class TrappingCertificate:
    center: tuple[float, float]
    halfwidth: float
    halfheight: float
    n: int
    kappa: float
    sigma_p: float
    lam_p: float
    C_measured: float
    norm_bound: float           # C kappa^-n (1 + C n |sigma' lam'|^n)
    worst_norm: float           # measured subordinate N(u,v) norm on the grid
    image_contained: bool
    entry_ok: bool
    period: int

    def ok(self) -> bool:
        return self.worst_norm < 1.0 and self.image_contained and self.entry_ok

    def to_record(self) -> dict:
        return {
            "kind": "trapping_box",
            "center": list(self.center),
            "halfwidth": self.halfwidth,
            "halfheight": self.halfheight,
            "n": self.n,
            "kappa": self.kappa,
            "C": self.C_measured,
            "norm_bound": self.norm_bound,
            "worst_norm": self.worst_norm,
            "image_contained": self.image_contained,
            "entry_ok": self.entry_ok,
            "period": self.period,
        }


def trapping_box_check(h: FamilyHandle, loop: LoopData, a,
                       grid: int = 9, mp_dps: int = MP_DPS,
                       ) -> TrappingCertificate:
    """Certify the trapping box around the journey start (chain-rule mp).

    Box: (p_a, 0) + (-sigma'^-n, sigma'^-n) x (-sigma'^-3n, sigma'^-3n)
    in the chart at the fixed point, with sigma' = kappa^2 sigma.  Checks
    the Lemma-style entry bounds (measuring their constant), the weighted
    subordinate norm N(u, v) = |u| + sigma'^n |v| < 1, and containment of
    the sampled image (plus a Lipschitz term) in the box.
    """
    n = loop.n
    if n < 1:
        raise DomainError("trapping certificate needs n >= 1")
    kappa = loop.kappa
    sig, lam = h.sigma_hat, h.lam_omega
    if kappa ** 4 * sig * lam >= 1.0:
        raise DomainError("kappa violates |kappa^4 sigma lam| < 1")
    period = loop.period or (loop.transition_length() + n)
    a_t = tuple(a) if isinstance(a, (tuple, list)) else (float(a),)
    with mp.workdps(mp_dps):
        sig_p = mp.mpf(kappa) ** 2 * sig
        lam_p = mp.mpf(kappa) ** 2 * lam
        bw = sig_p ** (-n)
        bh = sig_p ** (-3 * n)
        cx = _mp_wrap(mp.mpf(3) + mp.mpf(loop.p_a))
        cy = mp.mpf(0)
        # refine the sink inside the box to anchor the image check
        z_star, resid = mp_newton_periodic(h, (float(cx), 0.0), a_t, period)
        entry_ok = (abs(_mp_wrap(z_star[0] - cx)) <= bw
                    and abs(z_star[1] - cy) <= bh)
        worst_norm = mp.mpf(0)
        C_meas = mp.mpf(0)
        contained = True
        for i in range(grid):
            for j in range(grid):
                dx = (2 * i / (grid - 1) - 1) * bw
                dy = (2 * j / (grid - 1) - 1) * bh
                z = (_mp_wrap(cx + dx), cy + dy)
                M, F = mp_return_jacobian(h, z, a_t, period)
                # weighted subordinate norm (max over weighted columns)
                col1 = abs(M[0][0]) + sig_p ** n * abs(M[1][0])
                col2 = abs(M[0][1]) / sig_p ** n + abs(M[1][1])
                worst_norm = max(worst_norm, col1, col2)
                # Lemma entry ratios: [k^-n s'^n |x|, k^-n s'^n; n k^-n l'^n, ...]
                kn = mp.mpf(kappa) ** (-n)
                b11 = kn * sig_p ** n * max(abs(dx), bw / grid)
                b12 = kn * sig_p ** n
                b2 = n * kn * lam_p ** n
                C_meas = max(C_meas,
                             abs(M[0][0]) / b11, abs(M[0][1]) / b12,
                             abs(M[1][0]) / b2, abs(M[1][1]) / b2)
                # image containment with the norm as a Lipschitz constant
                fx_off = abs(_mp_wrap(F[0] - cx))
                fy_off = abs(F[1] - cy)
                if fx_off > bw or fy_off > bh:
                    contained = False
        norm_bound = float(C_meas * mp.mpf(kappa) ** (-n)
                           * (1 + C_meas * n * (sig_p * lam_p) ** n))
        return TrappingCertificate(
            center=(float(cx), 0.0), halfwidth=float(bw), halfheight=float(bh),
            n=n, kappa=kappa, sigma_p=float(sig_p), lam_p=float(lam_p),
            C_measured=float(C_meas), norm_bound=norm_bound,
            worst_norm=float(worst_norm), image_contained=contained,
            entry_ok=entry_ok, period=period,
        )


# ---------------------------------------------------------------------------
# the full pipeline
# ---------------------------------------------------------------------------

@dataclass
class SinkPipeline:
    handle: FamilyHandle
    base: FamilyHandle
    tangency: TangencyData
    loop: LoopData
    omega: HyperbolicPointData
    trace_word: SymbolWord
    alpha: float
    a0: tuple

    def seeds(self) -> list[tuple[float, float]]:
        x0 = wrap(3.0 + self.loop.p_a)
        return [(x0, 0.0)]

    def region(self) -> tuple:
        x0 = wrap(3.0 + self.loop.p_a)
        return ((x0 - 1e-9, x0 + 1e-9), (-1e-12, 1e-12))


def build_sink_pipeline(k: int = 1, d: int = 2, eps: float = 0.01,
                        depth: int = 2, n: int = 12, alpha: float = 1.0 / 16,
                        kappa: float = 3.0, a0: Sequence[float] | None = None,
                        mu_pert: float | None = None,
                        snap_depth: int | None = None) -> SinkPipeline:
    """Greedy coding -> (optional snap) -> flatten -> sink translation."""
    a0 = tuple(a0) if a0 is not None else (0.0,) * k
    h = make_family("coupled", k=k, d=d, eps=eps)
    a_jets = param_jets(h, a0)
    omega = continue_fixed_point(h, (3.0, 0.0), a_jets)
    trace = greedy_code(h, constant_parabola(k, d), a_jets, depth)
    word = trace.word
    cur: FamilyHandle = h
    if snap_depth is not None and snap_depth > depth:
        deep = _greedy_extend(h, a_jets, snap_depth)
        cur = quasi_snap_perturbation(cur, word, deep, theta=0.25,
                                      alpha=alpha, a_jets=a_jets, a0=a0)
        word = deep
    td = tangency_normal_form(cur, omega, word, a_jets)
    if mu_pert is None:
        # at shallow word depths the offset jet is not small; request the
        # measured perturbation size (the sink mechanism needs no smallness)
        mu_pert = 2.2 * flatten_norm(cur, td.c_poly, a0, alpha)
    cur = flatten_perturbation(cur, td, alpha, mu=mu_pert)
    loop = loop_data(cur, word)
    cur, loop = sink_translation_perturbation(cur, td, loop, alpha, n,
                                              mu=mu_pert)
    loop.kappa = kappa
    return SinkPipeline(cur, h, td, loop, omega, trace.word, alpha, a0)


def _greedy_extend(h, a_jets, depth):
    trace = greedy_code(h, constant_parabola(h.k, h.d), a_jets, depth)
    return trace.word
