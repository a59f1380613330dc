"""The explicit annulus families and their localized perturbation stacks.

Three constructions on the circle R/6Z (canonical representative [-3, 3))
times R:

* ``expanding``   -- the base skew product (Q^{d'+1}(x), 2y/3 + rho(x)/3)
                     with the 2^{d'+1} branch shifts eps * P_delta(a),
* ``dissipative`` -- the same map deformed near x = 3 so the fixed point
                     (3, 0) gets the strongly contracted vertical factor
                     4^{-(d'+2)^2},
* ``coupled``     -- the dissipative map further deformed on a narrow
                     strip |x| <= 2*eta into an explicit quadratic fold
                     sending (0, 0) to (3, 1), whose preimage of the
                     stable segment {3} x [-1, 1] is the graph of 2x^2.

Evaluation is polymorphic over floats, mpmath scalars and parameter jets;
everything is piecewise polynomial, so all three paths are exact region
by region.  Handles are immutable; perturbations wrap a handle with an
additive, compactly supported term (exact zero outside its support).

The vertical multiplier of the expanding map's fixed point is 2/3 by
direct differentiation of the second coordinate; the computed Jacobian is
authoritative everywhere.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DomainError, SeamError, SupportError
from .jets import Jet, SignedPolynomial, d_prime, eval_poly, identity_jets
from .profiles import PiecewisePoly, bump, circle_step_profile, plateau_on

CIRCUMFERENCE = 6.0


# ---------------------------------------------------------------------------
# circle arithmetic
# ---------------------------------------------------------------------------

def wrap(x):
    """Canonical representative in [-3, 3); exact when already canonical."""
    if isinstance(x, Jet):
        c = x.c.copy()
        c[0] = wrap(float(c[0]))
        return Jet(x.k, x.d, c)
    if -3.0 <= x < 3.0:
        return x
    n = math.floor((x + 3.0) / 6.0) if isinstance(x, float) else _mp_floor((x + 3.0) / 6.0)
    return x - 6.0 * n


def _mp_floor(v):
    import mpmath

    return mpmath.floor(v)


def circle_dist(x: float, y: float) -> float:
    d = abs(wrap(x - y))
    return min(d, 6.0 - d)


def _const(v) -> float:
    return float(v.value()) if isinstance(v, Jet) else float(v)


@dataclass(frozen=True)
class CircleValue:
    """Point of R/6Z, stored canonically in [-3, 3)."""

    x: float

    def __post_init__(self):
        object.__setattr__(self, "x", wrap(float(self.x)))

    def dist(self, other: "CircleValue | float") -> float:
        o = other.x if isinstance(other, CircleValue) else other
        return circle_dist(self.x, o)


def eval_Q(x: "CircleValue | float", power: int = 1) -> CircleValue:
    """Q(x) = 4x - 3 on R/6Z, iterated ``power`` times."""
    if power < 1:
        raise ValueError("power must be >= 1")
    v = x.x if isinstance(x, CircleValue) else wrap(float(x))
    for _ in range(power):
        v = wrap(4.0 * v - 3.0)
    return CircleValue(v)


# ---------------------------------------------------------------------------
# the symbol alphabet and region table
# ---------------------------------------------------------------------------

def letters(k: int, d: int) -> tuple[tuple[int, ...], ...]:
    """Delta_{d'} = {-1,+1}^{d'+1} in lexicographic order (-1 first)."""
    return tuple(itertools.product((-1, 1), repeat=d_prime(k, d) + 1))


def branch_interval(letter: Sequence[int]) -> tuple[float, float]:
    """I_delta = g_{delta(0)} o ... o g_{delta(d')} ([-1, 1])."""
    lo, hi = -1.0, 1.0
    for s in reversed(letter):
        lo, hi = (lo + 3.0 * s) / 4.0, (hi + 3.0 * s) / 4.0
    return lo, hi


def branch_x_preimage(letter: Sequence[int], ximg):
    """The unique preimage of ximg in I_delta under Q^{d'+1}."""
    x = ximg
    for s in reversed(letter):
        x = (x + 3.0 * s) / 4.0
    return x


@dataclass(frozen=True)
class RegionTable:
    """Branch intervals, their mu-fattened windows and signed polynomials."""

    k: int
    d: int
    mu: float
    fade: float
    smooth_order: int
    letters: tuple[tuple[int, ...], ...] = field(init=False)
    intervals: tuple[tuple[float, float], ...] = field(init=False)
    windows: tuple[PiecewisePoly, ...] = field(init=False)
    polys: tuple[SignedPolynomial, ...] = field(init=False)

    def __post_init__(self):
        letts = letters(self.k, self.d)
        ivals = tuple(branch_interval(l) for l in letts)
        object.__setattr__(self, "letters", letts)
        object.__setattr__(self, "intervals", ivals)
        object.__setattr__(
            self,
            "windows",
            tuple(
                plateau_on(lo - self.mu, hi + self.mu, self.fade, self.smooth_order)
                for lo, hi in ivals
            ),
        )
        object.__setattr__(
            self, "polys", tuple(SignedPolynomial(l, self.k, self.d) for l in letts)
        )
        # windows must stay pairwise disjoint
        spans = sorted((lo - self.mu - self.fade, hi + self.mu + self.fade) for lo, hi in ivals)
        for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
            if b0 >= a1:
                raise DomainError(
                    f"cylinder windows overlap at mu={self.mu}, fade={self.fade}"
                )

    def letter_index(self, letter: Sequence[int]) -> int:
        return self.letters.index(tuple(letter))

    def locate(self, x: float) -> int | None:
        """Index of the letter whose window support contains x (ties: lowest lex)."""
        for i, (lo, hi) in enumerate(self.intervals):
            if lo - self.mu - self.fade <= x <= hi + self.mu + self.fade:
                return i
        return None

    def in_tilde_region(self, x: float, y: float, letter_idx: int) -> bool:
        lo, hi = self.intervals[letter_idx]
        return (lo - self.mu <= x <= hi + self.mu) and (abs(y) <= 1.5 + self.mu)


def default_mu(dp: int) -> float:
    # adjacent windows at alphabet level d'+1 are 4^{-d'} apart
    return 0.02 if dp <= 2 else 4.0 ** (-dp) / 4.0


# ---------------------------------------------------------------------------
# family handles
# ---------------------------------------------------------------------------

KINDS = ("expanding", "dissipative", "coupled")


@dataclass(frozen=True)
class FamilyParams:
    kind: str = "expanding"
    k: int = 1
    d: int = 1
    eps: float = 0.05
    mu: float | None = None
    eta: float | None = None
    fold_scale: float = 1.0 / 32.0  # c1 of the strip fold
    smooth_order: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown construction kind {self.kind!r}")
        dp = d_prime(self.k, self.d)
        if self.mu is None:
            object.__setattr__(self, "mu", default_mu(dp))
        if self.eta is None:
            object.__setattr__(self, "eta", 4.0 ** (-dp - 2) / 2.0)
        # vertical band containment: eps * sup|P_delta| must stay well below 1/6
        sup_p = math.e ** 0.5 - 1.0  # sum |a|^i / i! at ||a|| = 1/2
        if self.eps * sup_p >= 1.0 / 6.0 + self.mu / 3.0:
            raise DomainError(f"eps={self.eps} too large for the vertical band margin")


class FamilyHandle:
    """Common interface: eval, jacobian, perturbation stacking."""

    params: FamilyParams
    regions: RegionTable

    # -- queries --------------------------------------------------------
    @property
    def k(self) -> int:
        return self.params.k

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def dp(self) -> int:
        return d_prime(self.params.k, self.params.d)

    @property
    def sigma_hat(self) -> float:
        return 4.0 ** (self.dp + 1)

    @property
    def lam_omega(self) -> float:
        return 4.0 ** (-((self.dp + 2) ** 2))

    def _as_param(self, a):
        k = self.k
        if a is None:
            return (0.0,) * k
        if isinstance(a, Jet):
            a = [a]
        if isinstance(a, (int, float)):
            a = [float(a)]
        a = tuple(a)
        if len(a) != k:
            raise DomainError(f"parameter has {len(a)} coordinates, family has k={k}")
        return a

    def eval(self, z, a=None):
        raise NotImplementedError

    def jacobian(self, z, a=None, order: int = 1):
        raise NotImplementedError

    def with_perturbation(self, term: "PerturbationTerm") -> "FamilyHandle":
        term.check_support(self)
        return PerturbedFamily(self, term)

    def perturbation_stack(self) -> tuple["PerturbationTerm", ...]:
        return ()

    def base(self) -> "BaseFamily":
        h = self
        while isinstance(h, PerturbedFamily):
            h = h.inner
        return h

    # -- exact branch data (used by the model-exact fast paths) ---------
    def branch_x_affine(self, letter_idx: int) -> tuple[float, float]:
        """Forward x-map on I_delta as x -> sigma_hat * x + c."""
        sig = self.sigma_hat
        t = sum(
            3.0 * s / 4.0 ** (i + 1) for i, s in enumerate(self.regions.letters[letter_idx])
        )
        return sig, -sig * t

    def branch_y_offset(self, letter_idx: int, a):
        """delta(0)/3 + eps * P_delta(a); exact on the letter's window plateau."""
        a = self._as_param(a)
        letter = self.regions.letters[letter_idx]
        shift = self.params.eps * self.regions.polys[letter_idx].eval(list(a))
        return letter[0] / 3.0 + shift


def _phi3_profile(s: int) -> PiecewisePoly:
    return bump(radius=1.0, plateau=0.5, s=s)


class BaseFamily(FamilyHandle):
    """One of the three explicit constructions, with the eps-branch shifts."""

    def __init__(self, params: FamilyParams):
        self.params = params
        dp = d_prime(params.k, params.d)
        gap = 4.0 ** (-dp)
        fade = min(params.mu, (gap - 2 * params.mu) / 2.0) * 0.9
        if fade <= 0:
            raise DomainError(f"mu={params.mu} leaves no fade room at d'={dp}")
        self.regions = RegionTable(params.k, params.d, params.mu, fade, params.smooth_order)
        s = params.smooth_order
        self._rho = circle_step_profile(s)
        self._phi3 = _phi3_profile(s)
        self._chi = bump(radius=2.0 * params.eta, plateau=params.eta, s=s)

    # -- helpers ---------------------------------------------------------
    def _shift(self, x, a, deriv: int = 0):
        """Branch shift sum_delta w_delta(x) eps P_delta(a), or its x-derivative."""
        idx = self.regions.locate(_const(x))
        if idx is None:
            return 0.0
        w = self.regions.windows[idx](x, deriv)
        if isinstance(w, float) and w == 0.0:
            return 0.0
        p = self.regions.polys[idx].eval(list(a))
        return w * (self.params.eps * p)

    def _in_strip(self, xc: float) -> bool:
        return self.params.kind == "coupled" and abs(xc) <= 2.0 * self.params.eta

    def _near_omega(self, xc: float) -> bool:
        return self.params.kind != "expanding" and circle_dist(xc, 3.0) <= 0.5

    def _qpow(self, x):
        for _ in range(self.dp + 1):
            x = wrap(4.0 * x - 3.0)
        return x

    # -- evaluation --------------------------------------------------------
    def eval(self, z, a=None):
        x, y = z
        a = self._as_param(a)
        xc = wrap(_const(x))
        if self._near_omega(xc):
            u = wrap(x - 3.0)
            return wrap(3.0 + self.sigma_hat * u), self.lam_omega * y
        if self._in_strip(xc):
            return self._eval_strip(x, y)
        gx = self._qpow(x)
        rho = self._rho(x)
        base = y * 2.0 / 3.0 + rho / 3.0 + self._shift(x, a)
        if self.params.kind == "expanding":
            return gx, base
        phi3 = self._phi3(wrap(x - 3.0))
        if isinstance(phi3, float) and phi3 == 0.0:
            return gx, base
        return gx, (1.0 - phi3) * base + phi3 * (self.lam_omega * y)

    def _eval_strip(self, x, y):
        c1 = self.params.fold_scale
        chi = self._chi(x)
        fold_x = 3.0 + c1 * (y - 2.0 * x * x)
        if isinstance(chi, float) and chi == 1.0:
            return wrap(fold_x), 1.0 + y * 2.0 / 3.0 - x
        gx = (1.0 - chi) * (3.0 + self.sigma_hat * x) + chi * fold_x
        gy = y * 2.0 / 3.0 + chi * (1.0 - x)
        return wrap(gx), gy

    # -- spatial derivatives ------------------------------------------------
    def jacobian(self, z, a=None, order: int = 1):
        """First (and optionally second) spatial derivatives at z.

        Returns J = ((dX/dx, dX/dy), (dY/dx, dY/dy)); with order=2 also the
        tensors (Hx, Hy), each ((dxx, dxy), (dxy, dyy)).
        """
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        x, y = z
        a = self._as_param(a)
        xc = wrap(_const(x))
        if order == 2 and self.params.smooth_order < 3 and self._on_knot(xc):
            raise SeamError(f"second derivatives at a profile knot x={xc}")
        if self._near_omega(xc):
            J = ((self.sigma_hat, 0.0), (0.0, self.lam_omega))
            return J if order == 1 else (J, _zero_tensor(), _zero_tensor())
        if self._in_strip(xc):
            return self._jac_strip(x, y, order)

        sig = self.sigma_hat
        rho, drho, ddrho = self._rho(x), self._rho(x, 1), self._rho(x, 2)
        sh0, sh1, sh2 = (self._shift(x, a, n) for n in range(3))
        base = y * 2.0 / 3.0 + rho / 3.0 + sh0
        base_x = drho / 3.0 + sh1
        base_xx = ddrho / 3.0 + sh2
        if self.params.kind == "expanding":
            J = ((sig, 0.0), (base_x, 2.0 / 3.0))
            if order == 1:
                return J
            Hy = ((base_xx, 0.0), (0.0, 0.0))
            return J, _zero_tensor(), Hy
        u3 = wrap(x - 3.0)
        phi, dphi, ddphi = self._phi3(u3), self._phi3(u3, 1), self._phi3(u3, 2)
        lam = self.lam_omega
        Vx = -dphi * base + (1.0 - phi) * base_x + dphi * lam * y
        Vy = (1.0 - phi) * (2.0 / 3.0) + phi * lam
        J = ((sig, 0.0), (Vx, Vy))
        if order == 1:
            return J
        Vxx = -ddphi * base - 2.0 * dphi * base_x + (1.0 - phi) * base_xx + ddphi * lam * y
        Vxy = -dphi * (2.0 / 3.0) + dphi * lam
        Hy = ((Vxx, Vxy), (Vxy, 0.0))
        return J, _zero_tensor(), Hy

    def _jac_strip(self, x, y, order: int):
        c1 = self.params.fold_scale
        sig = self.sigma_hat
        chi, dchi, ddchi = self._chi(x), self._chi(x, 1), self._chi(x, 2)
        fold = c1 * (y - 2.0 * x * x)
        Xx = (1.0 - chi) * sig - dchi * sig * x + dchi * fold - 4.0 * chi * c1 * x
        Xy = chi * c1
        Yx = dchi * (1.0 - x) - chi
        Yy = 2.0 / 3.0
        J = ((Xx, Xy), (Yx, Yy))
        if order == 1:
            return J
        Xxx = (
            -2.0 * dchi * sig
            - ddchi * sig * x
            + ddchi * fold
            - 8.0 * dchi * c1 * x
            - 4.0 * chi * c1
        )
        Xxy = dchi * c1
        Hx = ((Xxx, Xxy), (Xxy, 0.0))
        Hy = ((ddchi * (1.0 - x) - 2.0 * dchi, 0.0), (0.0, 0.0))
        return J, Hx, Hy

    def _on_knot(self, xc: float) -> bool:
        knots = {0.25, 0.5, 1.0, 1.5}
        return any(abs(abs(xc) - t) == 0.0 for t in knots)

    def region_of(self, z) -> tuple:
        """Classify a point; boundary ties go to the lowest-lex letter."""
        x, y = _const(z[0]), _const(z[1])
        xc = wrap(x)
        if self._in_strip(xc):
            return ("strip",)
        if self._near_omega(xc):
            return ("omega",)
        idx = self.regions.locate(xc)
        if idx is not None and self.regions.in_tilde_region(xc, y, idx):
            return ("cylinder", self.regions.letters[idx])
        return ("neutral",)


def _zero_tensor():
    return ((0.0, 0.0), (0.0, 0.0))


# ---------------------------------------------------------------------------
# perturbation terms
# ---------------------------------------------------------------------------

class PerturbationTerm:
    """Additive term p(z, a), exactly zero outside its spatial/parameter support."""

    center: tuple[float, float]
    theta: float
    alpha: float | None
    a0: tuple[float, ...]

    def check_support(self, handle: FamilyHandle) -> None:
        lo, hi = self.center[0] - self.theta, self.center[0] + self.theta
        for (ilo, ihi) in handle.regions.intervals:
            wlo = ilo - handle.regions.mu - handle.regions.fade
            whi = ihi + handle.regions.mu + handle.regions.fade
            if hi >= wlo and lo <= whi:
                raise SupportError(
                    f"perturbation support [{lo}, {hi}] meets cylinder window "
                    f"[{wlo}, {whi}]"
                )

    def param_factor(self, a, handle: FamilyHandle):
        """rho((a - a0) / 2 alpha); exactly 0 for ||a - a0||_inf >= 2 alpha."""
        if self.alpha is None:
            return 1.0
        out = 1.0
        for i, ai in enumerate(a):
            u = (ai - self.a0[i]) / (2.0 * self.alpha)
            f = self._param_profile(u)
            if isinstance(f, float) and f == 0.0:
                return 0.0
            out = out * f
        return out

    def _param_profile(self, u):
        return _PARAM_BUMP(u)

    def spatial_factor(self, z, deriv: bool = False):
        x, y = z
        dx = wrap(x - self.center[0])
        dy = y - self.center[1]
        r2 = dx * dx + dy * dy
        r2c = _const(r2)
        prof = _spatial_profile(self.theta)
        if r2c <= (self.theta / 2.0) ** 2:
            if deriv:
                return 1.0, (0.0, 0.0)
            return 1.0
        if r2c >= self.theta ** 2:
            if deriv:
                return 0.0, (0.0, 0.0)
            return 0.0
        r = r2.sqrt() if isinstance(r2, Jet) else math.sqrt(r2) if isinstance(r2, float) else r2 ** 0.5
        val = prof(r)
        if not deriv:
            return val
        dp = prof(r, 1)
        return val, (dp * dx / r, dp * dy / r)

    def term(self, z, a, handle: FamilyHandle):
        raise NotImplementedError

    def term_jacobian(self, z, a, handle: FamilyHandle, order: int):
        raise NotImplementedError


_PARAM_BUMP = bump(radius=1.0, plateau=0.5, s=4)
_SPATIAL_CACHE: dict[float, PiecewisePoly] = {}


def _spatial_profile(theta: float) -> PiecewisePoly:
    if theta not in _SPATIAL_CACHE:
        _SPATIAL_CACHE[theta] = bump(radius=theta, plateau=theta / 2.0, s=4)
    return _SPATIAL_CACHE[theta]


@dataclass(frozen=True)
class BumpPerturbation(PerturbationTerm):
    """phi(|z - c|/theta) * rho((a-a0)/2alpha) * amplitude(a) with polynomial amplitude.

    amplitude: pair of {multi-index: coeff} dicts, one per output component.
    """

    center: tuple[float, float]
    theta: float
    amplitude: tuple[dict, dict]
    alpha: float | None = None
    a0: tuple[float, ...] = (0.0,)

    def _amp(self, a):
        return (eval_poly(self.amplitude[0], a), eval_poly(self.amplitude[1], a))

    def term(self, z, a, handle: FamilyHandle):
        pf = self.param_factor(a, handle)
        if isinstance(pf, float) and pf == 0.0:
            return (0.0, 0.0)
        sf = self.spatial_factor(z)
        if isinstance(sf, float) and sf == 0.0:
            return (0.0, 0.0)
        ax, ay = self._amp(a)
        return (pf * sf * ax, pf * sf * ay)

    def term_jacobian(self, z, a, handle: FamilyHandle, order: int):
        pf = self.param_factor(a, handle)
        zero = ((0.0, 0.0), (0.0, 0.0))
        if isinstance(pf, float) and pf == 0.0:
            return zero if order == 1 else (zero, _zero_tensor(), _zero_tensor())
        sf, (gx, gy) = self.spatial_factor(z, deriv=True)
        ax, ay = self._amp(a)
        J = ((pf * gx * ax, pf * gy * ax), (pf * gx * ay, pf * gy * ay))
        if order == 1:
            return J
        Hx, Hy = self._spatial_hessian(z)
        HX = tuple(tuple(pf * h * ax for h in row) for row in Hx)
        HY = tuple(tuple(pf * h * ay for h in row) for row in Hx)
        return J, HX, HY

    def _spatial_hessian(self, z):
        x, y = z
        dx = wrap(x - self.center[0])
        dy = y - self.center[1]
        r2 = dx * dx + dy * dy
        r2c = _const(r2)
        if r2c <= (self.theta / 2.0) ** 2 or r2c >= self.theta ** 2:
            return _zero_tensor(), _zero_tensor()
        prof = _spatial_profile(self.theta)
        r = r2.sqrt() if isinstance(r2, Jet) else math.sqrt(r2)
        b1, b2 = prof(r, 1), prof(r, 2)
        rxx = b2 * dx * dx / r2 + b1 * (1.0 / r - dx * dx / (r2 * r))
        rxy = b2 * dx * dy / r2 - b1 * dx * dy / (r2 * r)
        ryy = b2 * dy * dy / r2 + b1 * (1.0 / r - dy * dy / (r2 * r))
        H = ((rxx, rxy), (rxy, ryy))
        return H, H


@dataclass(frozen=True)
class SnapPerturbation(PerturbationTerm):
    """rho((a-a0)/2alpha) * (g_a(tau_a(z)) - g_a(z)) on the theta-ball.

    tau_a slides vertically by delta_poly(a) inside the ball — the curve
    alignment map of the quasi-homoclinic snap.
    """

    center: tuple[float, float]
    theta: float
    delta_poly: dict
    alpha: float | None = None
    a0: tuple[float, ...] = (0.0,)

    def _tau_offset(self, z, a):
        beta = self.spatial_factor(z)
        if isinstance(beta, float) and beta == 0.0:
            return None
        return beta * eval_poly(self.delta_poly, a)

    def term(self, z, a, handle: FamilyHandle):
        pf = self.param_factor(a, handle)
        if isinstance(pf, float) and pf == 0.0:
            return (0.0, 0.0)
        off = self._tau_offset(z, a)
        if off is None:
            return (0.0, 0.0)
        x, y = z
        gx1, gy1 = handle.eval((x, y + off), a)
        gx0, gy0 = handle.eval((x, y), a)
        return (pf * wrap(gx1 - gx0), pf * (gy1 - gy0))

    def term_jacobian(self, z, a, handle: FamilyHandle, order: int):
        pf = self.param_factor(a, handle)
        zero = ((0.0, 0.0), (0.0, 0.0))
        if isinstance(pf, float) and pf == 0.0:
            return zero if order == 1 else (zero, _zero_tensor(), _zero_tensor())
        off = self._tau_offset(z, a)
        if off is None:
            return zero if order == 1 else (zero, _zero_tensor(), _zero_tensor())
        if order == 2:
            # exact on the slide plateau, where tau is a constant offset
            beta, (bx, by) = self.spatial_factor(z, deriv=True)
            if not (_const(beta) == 1.0 and _const(bx) == 0.0
                    and _const(by) == 0.0):
                raise SeamError(
                    "snap second derivatives only on the slide plateau")
            x, y = z
            J1, HX1, HY1 = handle.jacobian((x, y + off), a, order=2)
            J0, HX0, HY0 = handle.jacobian((x, y), a, order=2)
            J = tuple(tuple(pf * (e1 - e0) for e1, e0 in zip(r1, r0))
                      for r1, r0 in zip(J1, J0))
            HX = tuple(tuple(pf * (e1 - e0) for e1, e0 in zip(r1, r0))
                       for r1, r0 in zip(HX1, HX0))
            HY = tuple(tuple(pf * (e1 - e0) for e1, e0 in zip(r1, r0))
                       for r1, r0 in zip(HY1, HY0))
            return J, HX, HY
        x, y = z
        beta, (bx, by) = self.spatial_factor(z, deriv=True)
        delta = eval_poly(self.delta_poly, a)
        J1 = handle.jacobian((x, y + off), a)
        J0 = handle.jacobian((x, y), a)
        # d/dz of g(x, y + beta(z) delta): J1 plus chain through the offset
        tx, ty = bx * delta, 1.0 + by * delta
        out = (
            (
                pf * (J1[0][0] + J1[0][1] * tx - J0[0][0]),
                pf * (J1[0][1] * ty - J0[0][1]),
            ),
            (
                pf * (J1[1][0] + J1[1][1] * tx - J0[1][0]),
                pf * (J1[1][1] * ty - J0[1][1]),
            ),
        )
        return out


class PerturbedFamily(FamilyHandle):
    def __init__(self, inner: FamilyHandle, term: PerturbationTerm):
        self.inner = inner
        self.term = term
        self.params = inner.params
        self.regions = inner.regions

    def eval(self, z, a=None):
        a = self._as_param(a)
        gx, gy = self.inner.eval(z, a)
        tx, ty = self.term.term(z, a, self.inner)
        if isinstance(tx, float) and tx == 0.0 and isinstance(ty, float) and ty == 0.0:
            return gx, gy
        return wrap(gx + tx), gy + ty

    def jacobian(self, z, a=None, order: int = 1):
        a = self._as_param(a)
        base = self.inner.jacobian(z, a, order)
        tj = self.term.term_jacobian(z, a, self.inner, order)
        if order == 1:
            return _mat_add(base, tj)
        J, Hx, Hy = base
        TJ, THx, THy = tj
        return _mat_add(J, TJ), _mat_add(Hx, THx), _mat_add(Hy, THy)

    def region_of(self, z):
        return self.base().region_of(z)

    def perturbation_stack(self):
        return self.inner.perturbation_stack() + (self.term,)


def _mat_add(A, B):
    return tuple(tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(A, B))


# ---------------------------------------------------------------------------
# free-function operations
# ---------------------------------------------------------------------------

def make_family(kind: str = "expanding", k: int = 1, d: int = 1, eps: float = 0.05,
                **kw) -> BaseFamily:
    return BaseFamily(FamilyParams(kind=kind, k=k, d=d, eps=eps, **kw))


def eval_family(h: FamilyHandle, z, a=None):
    """Image of z, jet-valued in a when a is given as jets."""
    return h.eval(z, a)


def jacobian(h: FamilyHandle, z, a=None, spatial_order: int = 1):
    return h.jacobian(z, a, spatial_order)


def push_perturbation(h: FamilyHandle, pert: PerturbationTerm) -> FamilyHandle:
    return h.with_perturbation(pert)


def param_jets(h: FamilyHandle, a0=None) -> list[Jet]:
    """Coordinate jets of the parameter at a0 for this family's (k, d)."""
    base = [0.0] * h.k if a0 is None else list(a0)
    return identity_jets(h.k, h.d, base)


def from_config(cfg: dict) -> FamilyHandle:
    """Build a (possibly perturbed) family from a declarative mapping."""
    h: FamilyHandle = make_family(
        kind=cfg.get("construction", "expanding"),
        k=int(cfg.get("k", 1)),
        d=int(cfg.get("d", 1)),
        eps=float(cfg.get("epsilon", 0.05)),
        mu=cfg.get("mu"),
        eta=cfg.get("eta"),
    )
    for p in cfg.get("perturbations", []):
        amp = p.get("amplitude", [{}, {}])
        term = BumpPerturbation(
            center=tuple(p["center"]),
            theta=float(p["theta"]),
            amplitude=(_poly_from_cfg(amp[0]), _poly_from_cfg(amp[1])),
            alpha=p.get("alpha"),
            a0=tuple(p.get("a0", (0.0,) * h.k)),
        )
        h = h.with_perturbation(term)
    return h


def _poly_from_cfg(m: dict) -> dict:
    out = {}
    for key, val in m.items():
        alpha = tuple(int(t) for t in str(key).split(","))
        out[alpha] = float(val)
    return out
