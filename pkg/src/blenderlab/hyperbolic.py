"""Hyperbolic toolbox: continuation, invariant graphs, line fields, charts.

Everything is jet-valued in the parameter: fixed points and coded orbits
are continued order by order (Newton at the constant level, then a
contracting jet iteration with the constant-level Jacobian), and local
stable/unstable manifolds are polynomial graphs with jet coefficients
obtained as fixed points of the branch graph transform.

The constructions' branch maps are affine in x and y region by region, so
the graph transform acts exactly on polynomial graphs; no sampling is
needed on the tracks the package certifies (cylinders and the fixed-point
chart), and the transform refuses tracks that meet a perturbation support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .dynamics import FamilyHandle, branch_x_preimage, wrap
from .errors import ConvergenceError, DomainError, NonHyperbolicError, SupportError
from .ifs import SymbolWord, y_series
from .jets import Jet

STALL = 1e-12
MAX_GT_ITERS = 500


def _as_jet(v, k, d):
    return v if isinstance(v, Jet) else Jet.constant(k, d, float(v))


# ---------------------------------------------------------------------------
# fixed points and coded orbits
# ---------------------------------------------------------------------------

@dataclass
class HyperbolicPointData:
    """Continued fixed point with jet-valued multipliers and directions."""

    x: Jet
    y: Jet
    lam: Jet
    sigma: Jet
    stable_dir: tuple[Jet, Jet]
    unstable_dir: tuple[Jet, Jet]
    eta: float = 0.2

    def location(self) -> tuple[float, float]:
        return self.x.value(), self.y.value()


def _newton_fixed_point(h: FamilyHandle, guess, a0, tol=1e-13, iters=80):
    x, y = float(guess[0]), float(guess[1])
    for _ in range(iters):
        fx, fy = h.eval((x, y), a0)
        rx, ry = wrap(fx - x), fy - y
        J = h.jacobian((x, y), a0)
        A, B = J[0][0] - 1.0, J[0][1]
        C, D = J[1][0], J[1][1] - 1.0
        det = A * D - B * C
        if det == 0.0:
            raise ConvergenceError("singular Newton system at the fixed point")
        dx = (-rx * D + ry * B) / det
        dy = (-A * ry + C * rx) / det
        x, y = wrap(x + dx), y + dy
        if max(abs(dx), abs(dy)) < tol:
            return x, y
    raise ConvergenceError("fixed-point Newton did not converge")


def _jet_solve_orbit(h: FamilyHandle, pts, a_jets, iters=60):
    """Lift a float periodic orbit to jets by the contracting Newton update."""
    p = len(pts)
    k, d = a_jets[0].k, a_jets[0].d
    n = 2 * p
    J0 = np.zeros((n, n))
    a0 = [aj.value() for aj in a_jets]
    # equation i: G_i = z_{i+1} - F(z_i) = 0
    for i, (x, y) in enumerate(pts):
        Ji = h.jacobian((x, y), a0)
        J0[2 * i, 2 * i] -= Ji[0][0]
        J0[2 * i, 2 * i + 1] -= Ji[0][1]
        J0[2 * i + 1, 2 * i] -= Ji[1][0]
        J0[2 * i + 1, 2 * i + 1] -= Ji[1][1]
        t = 2 * ((i + 1) % p)
        J0[2 * i, t] += 1.0
        J0[2 * i + 1, t + 1] += 1.0
    J0inv = np.linalg.inv(J0)
    zs = [(_as_jet(x, k, d), _as_jet(y, k, d)) for x, y in pts]
    for _ in range(iters):
        res = []
        for i in range(p):
            fx, fy = h.eval(zs[i], a_jets)
            xn, yn = zs[(i + 1) % p]
            res.append(wrap(xn - fx))
            res.append(yn - fy)
        if max(float(np.max(np.abs(r.c))) for r in res) < STALL:
            break
        for i in range(p):
            accx = accy = None
            for c in range(n):
                wx, wy = J0inv[2 * i, c], J0inv[2 * i + 1, c]
                if wx != 0.0:
                    accx = res[c] * wx if accx is None else accx + res[c] * wx
                if wy != 0.0:
                    accy = res[c] * wy if accy is None else accy + res[c] * wy
            dx = accx if accx is not None else Jet.constant(k, d, 0.0)
            dy = accy if accy is not None else Jet.constant(k, d, 0.0)
            zs[i] = (wrap(zs[i][0] - dx), zs[i][1] - dy)
    return zs


def _eigen_jets(J) -> tuple[Jet, Jet]:
    """(lam, sigma) eigenvalue jets of a 2x2 jet matrix, real distinct.

    The larger root comes from the quadratic formula with the sign chosen
    against cancellation; the smaller from det / big (stable for strongly
    dissipative saddles where tr - sqrt(disc) underflows).
    """
    tr = J[0][0] + J[1][1]
    det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
    disc = tr * tr - 4.0 * det
    if disc.value() <= 0:
        raise NonHyperbolicError("complex or defective multipliers")
    root = disc.sqrt()
    big = (tr + root) * 0.5 if tr.value() >= 0 else (tr - root) * 0.5
    small = det / big
    return small, big


def _eigendir(J, m: Jet, prefer_x: bool) -> tuple[Jet, Jet]:
    A, B = J[0][0], J[0][1]
    C, D = J[1][0], J[1][1]
    cand1 = (B, m - A)
    cand2 = (m - D, C)
    n1 = abs(cand1[0].value()) + abs(cand1[1].value())
    n2 = abs(cand2[0].value()) + abs(cand2[1].value())
    v = cand1 if n1 >= n2 else cand2
    norm = (v[0] * v[0] + v[1] * v[1]).sqrt()
    v = (v[0] / norm, v[1] / norm)
    lead = v[0].value() if prefer_x else v[1].value()
    if lead < 0:
        v = (-v[0], -v[1])
    return v


def continue_fixed_point(h: FamilyHandle, guess, a_jets) -> HyperbolicPointData:
    """Newton-continue a hyperbolic fixed point, jets included."""
    a0 = [aj.value() for aj in a_jets]
    x0, y0 = _newton_fixed_point(h, guess, a0)
    (zx, zy), = _jet_solve_orbit(h, [(x0, y0)], a_jets)
    k, d = a_jets[0].k, a_jets[0].d
    J = h.jacobian((zx, zy), a_jets)
    J = tuple(tuple(_as_jet(e, k, d) for e in row) for row in J)
    lam, sig = _eigen_jets(J)
    if abs(abs(lam.value()) - 1.0) < 1e-6 or abs(abs(sig.value()) - 1.0) < 1e-6:
        raise NonHyperbolicError(
            f"multiplier too close to the unit circle: {lam.value()}, {sig.value()}"
        )
    if not (abs(lam.value()) < 1.0 < abs(sig.value())):
        raise NonHyperbolicError("not a saddle (multipliers on one side)")
    sdir = _eigendir(J, lam, prefer_x=False)
    udir = _eigendir(J, sig, prefer_x=True)
    return HyperbolicPointData(zx, zy, lam, sig, sdir, udir)


def _periodic_itinerary(fwd_letters) -> list[float]:
    """x-coordinates of the periodic orbit with the given forward itinerary."""
    p = len(fwd_letters)
    x, prev = 0.0, None
    for _ in range(200):
        for j in range(p - 1, -1, -1):
            x = branch_x_preimage(fwd_letters[j], x)
        if prev is not None and abs(x - prev) < 1e-15:
            break
        prev = x
    xs = []
    for j in range(p):
        xs.append(x)
        x = _forward_branch_x(fwd_letters[j], x)
    return xs


def _forward_branch_x(letter, x):
    # exact affine forward step through the letter's branch
    m = 4.0 ** len(letter)
    t = sum(3.0 * s / 4.0 ** (i + 1) for i, s in enumerate(letter))
    return m * (x - t)


def continue_coded_orbit(h: FamilyHandle, word: SymbolWord, a_jets):
    """Periodic orbit shadowing a periodic coding, jet-valued.

    ``word`` lists (delta_{-1}, ..., delta_{-p}); the returned orbit starts
    at the point whose preimage letter is delta_{-1} (so its image under
    the family is the point of the once-shifted word).
    """
    if not word.periodic:
        raise DomainError("coded continuation needs a periodic word")
    p = word.depth
    fwd = list(reversed(word.letters))
    xs = _periodic_itinerary(fwd)
    ys = []
    for i in range(p):
        rot = SymbolWord(
            tuple(word.letters[(j - i) % p] for j in range(p)), periodic=True
        )
        ys.append(y_series(rot, h.params.eps, a_jets, k=h.k, d=h.d).jet.value())
    pts = [(xs[i], ys[i]) for i in range(p)]
    pts = _align_heights(h, pts, [aj.value() for aj in a_jets])
    return _jet_solve_orbit(h, pts, a_jets)


def _align_heights(h, pts, a0):
    """Float-polish the height guesses by forward relaxation (factor 2/3)."""
    pts = list(pts)
    for _ in range(120):
        moved = 0.0
        for i in range(len(pts)):
            x, y = pts[i]
            xn, yn = pts[(i + 1) % len(pts)]
            _, fy = h.eval((x, y), a0)
            pts[(i + 1) % len(pts)] = (xn, fy)
            moved = max(moved, abs(yn - fy))
        if moved < 1e-15:
            break
    return pts


# ---------------------------------------------------------------------------
# polynomial graphs and the graph transform
# ---------------------------------------------------------------------------

@dataclass
class PolyGraph:
    """Graph of sum_j c_j (t - center)^j over |t - center| <= halfwidth.

    axis "x": y as a function of x (unstable side);
    axis "y": x as a function of y (stable side, center is the y-origin).
    """

    center: float
    coeffs: list
    halfwidth: float
    axis: str = "x"

    def eval(self, t):
        acc = None
        u = t - self.center
        for c in reversed(self.coeffs):
            acc = c if acc is None else acc * u + c
        return acc

    def deriv(self, t):
        acc = None
        u = t - self.center
        for j in range(len(self.coeffs) - 1, 0, -1):
            c = self.coeffs[j] * float(j)
            acc = c if acc is None else acc * u + c
        if acc is None:
            acc = self.coeffs[0] * 0.0
        return acc

    def values(self) -> list[float]:
        return [c.value() if isinstance(c, Jet) else float(c) for c in self.coeffs]


@dataclass
class LocalManifold:
    graph: PolyGraph
    side: str
    base_word: SymbolWord | None
    iterations: int


def compose_affine(coeffs: list, m: float, q, degree: int) -> list:
    """Coefficients of G(m*u + q) truncated at ``degree``; q float or jet."""
    zero = coeffs[0] * 0.0
    out = [zero for _ in range(degree + 1)]
    q_pows = [1.0]
    for _ in range(len(coeffs)):
        q_pows.append(q_pows[-1] * q)
    for j, c in enumerate(coeffs):
        for i in range(min(j, degree) + 1):
            out[i] = out[i] + c * math.comb(j, i) * (m ** i) * q_pows[j - i]
    return out


@dataclass(frozen=True)
class BranchStep:
    """Forward step x' = mx*x + bx, y' = sy*y + off along one branch.

    center_to is the x-center of image-side graphs (0 for cylinder-width
    manifolds, 3 for the fixed-point chart); graph pushes recenter there.
    """

    mx: float
    bx: float
    sy: float
    off: object          # jet (includes the letter's constant delta(0)/3 term)
    x_from: float
    x_to: float
    center_to: float = 0.0


def word_track(h: FamilyHandle, fwd_letters, a_jets) -> list[BranchStep]:
    """Branch steps realizing one period of a periodic forward itinerary."""
    xs = _periodic_itinerary(fwd_letters)
    steps = []
    for i, letter in enumerate(fwd_letters):
        li = h.regions.letter_index(tuple(letter))
        mx, bx = h.branch_x_affine(li)
        off = h.branch_y_offset(li, a_jets)
        _check_track_clear(h, xs[i])
        steps.append(BranchStep(mx, bx, 2.0 / 3.0, off,
                                xs[i], xs[(i + 1) % len(fwd_letters)]))
    return steps


def _check_track_clear(h: FamilyHandle, x: float) -> None:
    for term in h.perturbation_stack():
        if abs(wrap(x - term.center[0])) <= term.theta:
            raise SupportError("graph-transform track meets a perturbation support")


def omega_step(h: FamilyHandle, a_jets) -> BranchStep:
    k, d = a_jets[0].k, a_jets[0].d
    sy = 2.0 / 3.0 if h.params.kind == "expanding" else h.lam_omega
    return BranchStep(h.sigma_hat, 3.0 * (1.0 - h.sigma_hat), sy,
                      Jet.constant(k, d, 0.0), 3.0, 3.0, center_to=3.0)


def push_graph(g: PolyGraph, st: BranchStep, order: int) -> PolyGraph:
    """Image of an unstable graph under one branch step."""
    # x = (x' - bx)/mx; in centered coordinates u = u'/mx + q
    q = (st.center_to - st.bx) / st.mx - g.center
    coeffs = compose_affine(g.coeffs, 1.0 / st.mx, q, order)
    coeffs = [c * st.sy for c in coeffs]
    coeffs[0] = coeffs[0] + st.off
    return PolyGraph(st.center_to, coeffs, g.halfwidth, axis="x")


def pull_graph_stable(g: PolyGraph, st: BranchStep, order: int) -> PolyGraph:
    """Preimage of a stable graph x = psi(y) under one branch step."""
    # x = (psi(sy*y + off) - bx)/mx, y-centers at 0 on both sides
    inner = compose_affine(g.coeffs, st.sy, st.off, order)
    coeffs = [c * (1.0 / st.mx) for c in inner]
    coeffs[0] = coeffs[0] - st.bx / st.mx
    return PolyGraph(0.0, coeffs, g.halfwidth, axis="y")


def graph_transform_manifold(h: FamilyHandle, base, side: str, a_jets,
                             order: int = 5, halfwidth: float | None = None,
                             ) -> LocalManifold:
    """Fixed polynomial graph of the branch graph transform.

    base: a periodic SymbolWord, or a HyperbolicPointData for the fixed
    point.  For the unstable side the word lists (delta_{-1}, delta_{-2},
    ...) as usual; for the stable side it is read as the forward itinerary.
    """
    if side not in ("stable", "unstable"):
        raise ValueError("side must be 'stable' or 'unstable'")
    k, d = a_jets[0].k, a_jets[0].d
    zero = Jet.constant(k, d, 0.0)
    word = base if isinstance(base, SymbolWord) else None

    if word is not None:
        if not word.periodic:
            raise DomainError("graph transform needs a periodic word")
        fwd = list(reversed(word.letters)) if side == "unstable" else list(word.letters)
        steps = word_track(h, fwd, a_jets)
        if max(abs(s.sy) for s in steps) > 0.95:
            raise NonHyperbolicError("insufficient vertical contraction margin")
        hw = halfwidth if halfwidth is not None else 1.0 + h.regions.mu / 2.0
    else:
        steps = [omega_step(h, a_jets)]
        hw = halfwidth if halfwidth is not None else base.eta

    if side == "unstable":
        g = PolyGraph(steps[-1].center_to, [zero] * (order + 1), hw, axis="x")
        prev_norms: list[float] = []
        for it in range(MAX_GT_ITERS):
            new = g
            for st in steps:
                new = push_graph(new, st, order)
            delta = _graph_delta(g, new)
            g = new
            prev_norms.append(_graph_norm(g))
            if delta < STALL:
                return LocalManifold(g, side, word, it + 1)
            if len(prev_norms) > 10 and prev_norms[-1] > 2.0 * prev_norms[-11] + 10.0:
                raise ConvergenceError("graph transform is not contracting")
        raise ConvergenceError("graph transform did not stall in 500 iterations")

    x_anchor = steps[0].x_from if word is not None else 3.0
    g = PolyGraph(0.0, [Jet.constant(k, d, x_anchor)] + [zero] * order, hw, axis="y")
    for it in range(MAX_GT_ITERS):
        new = g
        for st in reversed(steps):
            new = pull_graph_stable(new, st, order)
        delta = _graph_delta(g, new)
        g = new
        if delta < STALL:
            return LocalManifold(g, side, word, it + 1)
    raise ConvergenceError("stable graph transform did not stall")


def _graph_delta(g1: PolyGraph, g2: PolyGraph) -> float:
    m = 0.0
    for c1, c2 in zip(g1.coeffs, g2.coeffs):
        diff = c1 - c2
        arr = diff.c if isinstance(diff, Jet) else np.array([float(diff)])
        m = max(m, float(np.max(np.abs(arr))))
    return m


def _graph_norm(g: PolyGraph) -> float:
    m = 0.0
    for c in g.coeffs:
        arr = c.c if isinstance(c, Jet) else np.array([float(c)])
        m = max(m, float(np.max(np.abs(arr))))
    return m


def conjugation_residual(h: FamilyHandle, man: LocalManifold, a_jets,
                         n_samples: int = 17) -> float:
    """Invariance defect of an unstable graph under the true family.

    Over each cylinder the graph's true image must lie on the graph
    obtained by the exact branch push; the sup distance over samples of
    every cylinder (or the chart, for fixed-point manifolds) is returned.
    """
    if man.side != "unstable":
        raise DomainError("residual check implemented for unstable manifolds")
    a0 = [aj.value() for aj in a_jets]
    g = man.graph
    order = len(g.coeffs) - 1
    worst = 0.0
    if man.base_word is None:
        steps = [omega_step(h, a_jets)]
        spans = [(3.0 - g.halfwidth, 3.0 + g.halfwidth)]
    else:
        steps = []
        spans = []
        for li, (lo, hi) in enumerate(h.regions.intervals):
            mx, bx = h.branch_x_affine(li)
            off = h.branch_y_offset(li, a_jets)
            steps.append(BranchStep(mx, bx, 2.0 / 3.0, off, lo, hi))
            spans.append((lo, hi))
    for st, (lo, hi) in zip(steps, spans):
        pushed = push_graph(g, st, order)
        for x in np.linspace(lo, hi, n_samples):
            y = g.eval(x if man.base_word is not None else x)
            yv = y.value() if isinstance(y, Jet) else float(y)
            fx, fy = h.eval((x, yv), a0)
            u = wrap(fx - pushed.center)
            target = pushed.eval(pushed.center + u)
            tv = target.value() if isinstance(target, Jet) else float(target)
            worst = max(worst, abs(fy - tv))
    return worst


# ---------------------------------------------------------------------------
# invariant line fields
# ---------------------------------------------------------------------------

def invariant_line_field(h: FamilyHandle, box, a_jets, grid: int = 9,
                         tol: float = 1e-10, max_depth: int = 40):
    """Df-invariant line field extending the stable direction on a chart box.

    Returns (points, slopes): slopes are jets of dx/dy (0 = vertical),
    computed by pulling a seed line back along each point's forward orbit
    until the slope stalls; Df e(z) = e(f z) holds by construction.
    """
    (xlo, xhi), (ylo, yhi) = box
    pts, slopes = [], []
    k, d = a_jets[0].k, a_jets[0].d
    for x in np.linspace(xlo, xhi, grid):
        for y in np.linspace(ylo, yhi, grid):
            s_prev = None
            for depth in range(1, max_depth + 1):
                s = _pullback_slope(h, (x, y), a_jets, depth, box)
                if s_prev is not None and abs(s.value() - s_prev.value()) <= tol:
                    break
                s_prev = s
            pts.append((x, y))
            slopes.append(s)
    return pts, slopes


def _pullback_slope(h: FamilyHandle, z, a_jets, depth: int, box):
    k, d = a_jets[0].k, a_jets[0].d
    orbit = [z]
    for _ in range(depth):
        zz = h.eval(orbit[-1], [aj.value() for aj in a_jets])
        orbit.append(zz)
        if not _in_box(zz, box):
            break
    xi = Jet.constant(k, d, 0.0)  # vertical seed at the deepest point
    for zz in reversed(orbit[:-1]):
        J = h.jacobian(zz, a_jets)
        A, B = J[0][0], J[0][1]
        C, D = J[1][0], J[1][1]
        # Df^{-1}(xi, 1) direction: ((D xi - B), (A - C xi)) / det
        num = D * xi - B
        den = A - C * xi
        xi = num / den
    return xi


def _in_box(z, box) -> bool:
    (xlo, xhi), (ylo, yhi) = box
    x = z[0].value() if isinstance(z[0], Jet) else float(z[0])
    y = z[1].value() if isinstance(z[1], Jet) else float(z[1])
    return xlo - 1e-12 <= x <= xhi + 1e-12 and ylo - 1e-12 <= y <= yhi + 1e-12


def line_field_residual(h: FamilyHandle, pts, slopes, a_jets) -> float:
    """sup ||Df e(z) - e(f z)|| over the sampled field (unit directions)."""
    a0 = [aj.value() for aj in a_jets]
    slope_at = {p: s for p, s in zip(pts, slopes)}
    worst = 0.0
    for (x, y), s in zip(pts, slopes):
        J = h.jacobian((x, y), a0)
        sv = s.value()
        v = np.array([J[0][0] * sv + J[0][1], J[1][0] * sv + J[1][1]])
        v /= np.hypot(*v)
        fz = h.eval((x, y), a0)
        s_im = _pullback_slope(h, fz, a_jets, 8, ((-1e9, 1e9), (-1e9, 1e9)))
        w = np.array([s_im.value(), 1.0])
        w /= np.hypot(*w)
        if v[1] * w[1] < 0 or (v[1] == 0 and v[0] * w[0] < 0):
            w = -w
        worst = max(worst, float(np.linalg.norm(v - w)))
    return worst


# ---------------------------------------------------------------------------
# adapted charts
# ---------------------------------------------------------------------------

@dataclass
class AdaptedChart:
    """Chart straightening W^u onto the horizontal and W^s onto the vertical.

    xi = x - psi_s(y), upsilon = y - gamma_u(x); both manifolds are graphs,
    so the chart maps them exactly onto the axes and the base to 0.
    """

    base: tuple[Jet, Jet]
    unstable: PolyGraph
    stable: PolyGraph
    eta: float

    def forward(self, z):
        x, y = z
        xi = wrap(x - self.stable.eval(y - _cval(self.base[1]) + self.stable.center))
        ups = y - self.unstable.eval(x)
        return xi, ups

    def inverse(self, w, iters: int = 60):
        xi, ups = w
        x = wrap(_cval(self.base[0]) + _cval(xi))
        y = _cval(self.base[1]) + _cval(ups)
        for _ in range(iters):
            fx, fy = self.forward((x, y))
            rx = _cval(fx) - _cval(xi)
            ry = _cval(fy) - _cval(ups)
            if max(abs(rx), abs(ry)) < 1e-14:
                break
            x = wrap(x - rx)
            y = y - ry
        return x, y


def _cval(v) -> float:
    return v.value() if isinstance(v, Jet) else float(v)


def adapted_chart(h: FamilyHandle, point: HyperbolicPointData, a_jets,
                  order: int = 5) -> AdaptedChart:
    wu = graph_transform_manifold(h, point, "unstable", a_jets, order=order)
    ws = graph_transform_manifold(h, point, "stable", a_jets, order=order)
    return AdaptedChart((point.x, point.y), wu.graph, ws.graph, point.eta)


# ---------------------------------------------------------------------------
# inclination test
# ---------------------------------------------------------------------------

def inclination_test(h: FamilyHandle, seed: PolyGraph, word: SymbolWord,
                     a_jets, n: int, order: int = 5):
    """Push a transversal seed curve n times through the word's branches.

    Returns per-step (C0, C1, jet-sup) distances to the unstable manifold
    of the correspondingly shifted coding (both curves are pushed by the
    same exact branch steps, so this is the inclination-lemma contraction).
    """
    if not word.periodic:
        raise DomainError("inclination test needs a periodic target word")
    target = graph_transform_manifold(h, word, "unstable", a_jets, order=order,
                                      halfwidth=seed.halfwidth)
    fwd = list(reversed(word.letters))
    steps = word_track(h, fwd, a_jets)
    k, d = a_jets[0].k, a_jets[0].d
    cur = PolyGraph(seed.center,
                    [_as_jet(c, k, d) for c in seed.coeffs]
                    + [Jet.constant(k, d, 0.0)] * max(0, order + 1 - len(seed.coeffs)),
                    seed.halfwidth, axis="x")
    tgt = target.graph
    out = []
    for t in range(n):
        st = steps[t % len(steps)]
        cur = push_graph(cur, st, order)
        tgt = push_graph(tgt, st, order)
        out.append(_graph_distances(cur, tgt))
    return out


def _graph_distances(g1: PolyGraph, g2: PolyGraph):
    hw = min(g1.halfwidth, g2.halfwidth)
    ts = np.linspace(-hw, hw, 33)
    c0 = c1 = cj = 0.0
    for t in ts:
        v1 = g1.eval(g1.center + t)
        v2 = g2.eval(g2.center + t)
        d1 = g1.deriv(g1.center + t)
        d2 = g2.deriv(g2.center + t)
        dv = v1 - v2
        dd = d1 - d2
        c0 = max(c0, abs(_cval(dv)))
        c1 = max(c1, abs(_cval(dd)))
        if isinstance(dv, Jet):
            cj = max(cj, float(np.max(np.abs(dv.c))))
    return c0, c0 + c1, cj
