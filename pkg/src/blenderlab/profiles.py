"""Piecewise-polynomial plateau profiles and their derivatives.

All transition pieces are built from the integer-coefficient smoothstep

    S(t) = t^{s+1} * sum_{m=0}^{s} C(s+m, m) C(2s+1, s-m) (-t)^m,

which has S(0) = 0, S(1) = 1 and s vanishing derivatives at both knots,
so every profile is C^s across its (dyadic) breakpoints and exactly 0 / 1
(or -1) on its flats.  Evaluation is Horner on plain scalars, which keeps
the same code path valid for floats, numpy scalars, mpmath numbers and
jets (via compose_scalar on the stored derivative values).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .jets import Jet


@lru_cache(maxsize=None)
def smoothstep_coeffs(s: int) -> tuple[float, ...]:
    """Coefficients of S as a polynomial in t (degree 2s+1, ascending)."""
    coeffs = [0.0] * (2 * s + 2)
    for m in range(s + 1):
        coeffs[s + 1 + m] = (-1.0) ** m * math.comb(s + m, m) * math.comb(2 * s + 1, s - m)
    return tuple(coeffs)


def _poly_eval(coeffs, x):
    out = 0.0
    for c in reversed(coeffs):
        out = out * x + c
    return out


def _poly_deriv(coeffs):
    return tuple(c * i for i, c in enumerate(coeffs))[1:] or (0.0,)


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    coeffs: tuple[float, ...]  # polynomial in (x - lo), ascending


class PiecewisePoly:
    """Compactly supported piecewise polynomial with closed-form derivatives.

    Outside the stored pieces the value is exactly the constant `fill`
    (0 for bumps).  `order` bounds how many derivatives are continuous
    across knots; deriv() is still exact on piece interiors beyond that.
    """

    def __init__(self, pieces: list[Piece], order: int, fill: float = 0.0):
        self.pieces = sorted(pieces, key=lambda p: p.lo)
        self.order = order
        self.fill = fill
        self._derivs: dict[int, list[tuple[float, ...]]] = {0: [p.coeffs for p in self.pieces]}

    def _coeffs_at_order(self, n: int) -> list[tuple[float, ...]]:
        while n not in self._derivs:
            m = max(self._derivs)
            self._derivs[m + 1] = [_poly_deriv(c) for c in self._derivs[m]]
        return self._derivs[n]

    def _locate(self, x: float) -> int | None:
        for i, p in enumerate(self.pieces):
            if p.lo <= x <= p.hi:
                return i
        return None

    def eval(self, x: float, n: int = 0):
        """n-th derivative at x (scalar path)."""
        i = self._locate(x)
        if i is None:
            return 0.0 if n else self.fill
        p = self.pieces[i]
        return _poly_eval(self._coeffs_at_order(n)[i], x - p.lo)

    def eval_jet(self, x: Jet) -> Jet:
        x0 = x.value()
        derivs = [self.eval(x0, n) for n in range(x.d + 1)]
        return x.compose_scalar(derivs)

    def __call__(self, x, n: int = 0):
        if isinstance(x, Jet):
            if n:
                derivs = [self.eval(x.value(), n + m) for m in range(x.d + 1)]
                return x.compose_scalar(derivs)
            return self.eval_jet(x)
        return self.eval(x, n)


def _transition(lo: float, hi: float, start: float, end: float, s: int) -> Piece:
    """Piece interpolating start -> end over [lo, hi] with C^s flat contact."""
    base = smoothstep_coeffs(s)
    width = hi - lo
    scale = end - start
    coeffs = [scale * c / width ** i for i, c in enumerate(base)]
    coeffs[0] += start
    return Piece(lo, hi, tuple(coeffs))


def _flat(lo: float, hi: float, value: float) -> Piece:
    return Piece(lo, hi, (value,))


def bump(radius: float = 1.0, plateau: float = 0.5, s: int = 3) -> PiecewisePoly:
    """Even bump: 1 on |x| <= plateau, 0 on |x| >= radius, C^s."""
    return PiecewisePoly(
        [
            _transition(-radius, -plateau, 0.0, 1.0, s),
            _flat(-plateau, plateau, 1.0),
            _transition(plateau, radius, 1.0, 0.0, s),
        ],
        order=s,
    )


def plateau_on(lo: float, hi: float, fade: float, s: int = 3) -> PiecewisePoly:
    """1 on [lo, hi], 0 outside [lo - fade, hi + fade], C^s."""
    return PiecewisePoly(
        [
            _transition(lo - fade, lo, 0.0, 1.0, s),
            _flat(lo, hi, 1.0),
            _transition(hi, hi + fade, 1.0, 0.0, s),
        ],
        order=s,
    )


def circle_step_profile(s: int = 3) -> PiecewisePoly:
    """The odd height profile of the expanding base map on [-3, 3).

    -1 on [-1, -1/2], +1 on [1/2, 1], 0 off [-3/2, -1/4] u [1/4, 3/2].
    """
    return PiecewisePoly(
        [
            _transition(-1.5, -1.0, 0.0, -1.0, s),
            _flat(-1.0, -0.5, -1.0),
            _transition(-0.5, -0.25, -1.0, 0.0, s),
            _flat(-0.25, 0.25, 0.0),
            _transition(0.25, 0.5, 0.0, 1.0, s),
            _flat(0.5, 1.0, 1.0),
            _transition(1.0, 1.5, 1.0, 0.0, s),
        ],
        order=s,
    )
