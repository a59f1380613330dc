"""Truncated multivariate Taylor jets in the parameter a ∈ R^k.

A jet stores the coefficients c_alpha = d^alpha f / alpha! for all
multi-indices alpha with |alpha| <= d (Taylor convention), so that

    f(a0 + b) = sum_alpha c_alpha * b^alpha + O(|b|^{d+1}).

With this normalization the truncated product is a plain convolution
(the binomial factors of the Leibniz rule cancel against the 1/alpha!),
and the signed polynomials P_delta have jet coefficients equal to the
signs themselves.  Double precision throughout.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch

MultiIndex = tuple[int, ...]


@lru_cache(maxsize=None)
def multi_indices(k: int, d: int) -> tuple[MultiIndex, ...]:
    """All exponent tuples of length k with total order <= d, graded lex."""
    if k < 1 or d < 0:
        raise ValueError(f"need k >= 1 and d >= 0, got k={k}, d={d}")
    out: list[MultiIndex] = []
    for order in range(d + 1):
        out.extend(_compositions(order, k))
    return tuple(out)


def _compositions(total: int, k: int) -> list[MultiIndex]:
    # descending-lex within one total order (x1-major)
    if k == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        out.extend((first,) + rest for rest in _compositions(total - first, k - 1))
    return out


@lru_cache(maxsize=None)
def _index_of(k: int, d: int) -> dict[MultiIndex, int]:
    return {alpha: i for i, alpha in enumerate(multi_indices(k, d))}


@lru_cache(maxsize=None)
def _mul_table(k: int, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index triples (i, j, t) with alpha_i + alpha_j = alpha_t, |alpha_t| <= d."""
    idx = _index_of(k, d)
    mono = multi_indices(k, d)
    ii, jj, tt = [], [], []
    for i, a in enumerate(mono):
        for j, b in enumerate(mono):
            if sum(a) + sum(b) > d:
                continue
            s = tuple(x + y for x, y in zip(a, b))
            ii.append(i)
            jj.append(j)
            tt.append(idx[s])
    return np.asarray(ii), np.asarray(jj), np.asarray(tt)


def d_prime(k: int, d: int) -> int:
    """dim { P in R[X_1..X_k] : deg P <= d, P(0) = 0 } = C(k+d, d) - 1."""
    return math.comb(k + d, d) - 1


class Jet:
    """Taylor jet of a scalar quantity in k parameters, truncated at order d."""

    __slots__ = ("k", "d", "c")

    def __init__(self, k: int, d: int, c: np.ndarray):
        self.k = k
        self.d = d
        self.c = c

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, k: int, d: int, value: float) -> "Jet":
        c = np.zeros(len(multi_indices(k, d)))
        c[0] = value
        return cls(k, d, c)

    @classmethod
    def variable(cls, k: int, d: int, i: int, base: float = 0.0) -> "Jet":
        """Jet of the coordinate a_i at the base point (constant term = base)."""
        c = np.zeros(len(multi_indices(k, d)))
        c[0] = base
        if d >= 1:
            unit = tuple(1 if j == i else 0 for j in range(k))
            c[_index_of(k, d)[unit]] = 1.0
        return cls(k, d, c)

    @classmethod
    def from_coeffs(cls, k: int, d: int, coeffs: dict[MultiIndex, float]) -> "Jet":
        c = np.zeros(len(multi_indices(k, d)))
        idx = _index_of(k, d)
        for alpha, v in coeffs.items():
            c[idx[tuple(alpha)]] = v
        return cls(k, d, c)

    # -- views ---------------------------------------------------------
    @property
    def coeffs(self) -> dict[MultiIndex, float]:
        return dict(zip(multi_indices(self.k, self.d), self.c))

    def coeff(self, alpha: Iterable[int]) -> float:
        return float(self.c[_index_of(self.k, self.d)[tuple(alpha)]])

    def deriv(self, alpha: Iterable[int]) -> float:
        """Derivative d^alpha at the base point (coefficient times alpha!)."""
        alpha = tuple(alpha)
        fact = 1.0
        for e in alpha:
            fact *= math.factorial(e)
        return self.coeff(alpha) * fact

    def value(self) -> float:
        return float(self.c[0])

    def derivs_1d(self) -> np.ndarray:
        """(value, d/da, ..., d^d/da^d) at the base point; k = 1 only."""
        if self.k != 1:
            raise DimensionMismatch("derivs_1d needs k = 1")
        return self.c * np.array([math.factorial(i) for i in range(self.d + 1)])

    def __repr__(self) -> str:
        return f"Jet(k={self.k}, d={self.d}, c={self.c!r})"

    # -- arithmetic ----------------------------------------------------
    def _check(self, other: "Jet") -> None:
        if self.k != other.k or self.d != other.d:
            raise DimensionMismatch(
                f"jet signature mismatch: ({self.k},{self.d}) vs ({other.k},{other.d})"
            )

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.k, self.d, self.c + other.c)
        c = self.c.copy()
        c[0] += float(other)
        return Jet(self.k, self.d, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.k, self.d, -self.c)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            ii, jj, tt = _mul_table(self.k, self.d)
            out = np.zeros_like(self.c)
            np.add.at(out, tt, self.c[ii] * other.c[jj])
            return Jet(self.k, self.d, out)
        return Jet(self.k, self.d, self.c * float(other))

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("jet powers must be non-negative integers")
        out = Jet.constant(self.k, self.d, 1.0)
        for _ in range(n):
            out = out * self
        return out

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.k, self.d, self.c / float(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    # -- composition ---------------------------------------------------
    def compose_scalar(self, f_derivs: Sequence[float]) -> "Jet":
        """Jet of f(self) given f, f', ..., f^(d) at the constant term.

        Faa di Bruno realized as Horner evaluation of the degree-d Taylor
        polynomial of f in the zero-constant part of the jet; exact at
        truncation order d.
        """
        if len(f_derivs) < self.d + 1:
            raise ValueError(f"need {self.d + 1} derivatives, got {len(f_derivs)}")
        u = Jet(self.k, self.d, self.c.copy())
        u.c[0] = 0.0
        out = Jet.constant(self.k, self.d, f_derivs[self.d] / math.factorial(self.d))
        for j in range(self.d - 1, -1, -1):
            out = out * u + f_derivs[j] / math.factorial(j)
        return out

    def reciprocal(self) -> "Jet":
        x0 = self.value()
        if x0 == 0.0:
            raise ZeroDivisionError("reciprocal of a jet with zero constant term")
        # normalize to constant term 1 first so huge |x0| cannot overflow
        scaled = self * (1.0 / x0)
        derivs = [(-1.0) ** j * math.factorial(j) for j in range(self.d + 1)]
        return scaled.compose_scalar(derivs) * (1.0 / x0)

    def sqrt(self) -> "Jet":
        x0 = self.value()
        if x0 <= 0.0:
            raise ValueError("jet sqrt needs a positive constant term")
        # d^j sqrt = prod_{i<j} (1/2 - i) * x^(1/2 - j)
        derivs = [math.sqrt(x0)]
        prod = 1.0
        for j in range(1, self.d + 1):
            prod *= 0.5 - (j - 1)
            derivs.append(prod * x0 ** (0.5 - j))
        return self.compose_scalar(derivs)


def identity_jets(k: int, d: int, base: Sequence[float] | None = None) -> list[Jet]:
    """The k coordinate jets of a at a base point (default 0)."""
    if base is None:
        base = [0.0] * k
    return [Jet.variable(k, d, i, float(base[i])) for i in range(k)]


# -- free-function operation aliases ------------------------------------

def jet_add(x: Jet, y: Jet) -> Jet:
    return x + y


def jet_mul(x: Jet, y: Jet) -> Jet:
    return x * y


def jet_compose_scalar(f_derivs: Sequence[float], x: Jet) -> Jet:
    return x.compose_scalar(f_derivs)


def eval_poly(poly: dict[MultiIndex, float], at: Sequence) -> object:
    """Evaluate sum coeff * prod a_i^{e_i} generically (floats, mpf, Jets).

    Coefficients may be fractions.Fraction: they are cast to the working
    scalar type of ``at`` (mpmath casts keep full working precision, which
    the exact-cancellation perturbation amplitudes rely on).
    """
    cast = _coeff_caster(at)
    out = None
    for alpha, coeff in poly.items():
        term = cast(coeff)
        for i, e in enumerate(alpha):
            for _ in range(e):
                term = term * at[i]
        out = term if out is None else out + term
    return 0.0 if out is None else out


def _coeff_caster(at: Sequence):
    from fractions import Fraction

    probe = at[0] if len(at) else 0.0
    if isinstance(probe, Jet) or isinstance(probe, (int, float)):
        return lambda c: float(c)
    # mpmath (or another exact-ish scalar): cast fractions by division
    def cast(c):
        if isinstance(c, Fraction):
            return (probe * 0 + c.numerator) / c.denominator
        return probe * 0 + c
    return cast


class SignedPolynomial:
    """P_delta(X) = sum_i delta(i)/alpha_i! X^{alpha_i} over the monomial basis.

    delta is a tuple of d'+1 signs; delta(0) selects the IFS branch and
    delta(1..d') are the coefficients' signs over the canonical graded-lex
    basis of {P : deg P <= d, P(0) = 0}.
    """

    def __init__(self, delta: Sequence[int], k: int, d: int):
        dp = d_prime(k, d)
        if len(delta) != dp + 1:
            raise DimensionMismatch(
                f"letter needs {dp + 1} signs for (k={k}, d={d}), got {len(delta)}"
            )
        if any(s not in (-1, 1) for s in delta):
            raise ValueError("letter entries must be +-1")
        self.delta = tuple(int(s) for s in delta)
        self.k = k
        self.d = d
        self.basis: tuple[MultiIndex, ...] = tuple(
            alpha for alpha in multi_indices(k, d) if sum(alpha) >= 1
        )

    def poly(self) -> dict[MultiIndex, float]:
        out = {}
        for i, alpha in enumerate(self.basis, start=1):
            fact = 1.0
            for e in alpha:
                fact *= math.factorial(e)
            out[alpha] = self.delta[i] / fact
        return out

    def poly_exact(self) -> dict:
        """Same coefficients as exact rationals (for cancellation-grade use)."""
        from fractions import Fraction

        out = {}
        for i, alpha in enumerate(self.basis, start=1):
            fact = 1
            for e in alpha:
                fact *= math.factorial(e)
            out[alpha] = Fraction(self.delta[i], fact)
        return out

    def eval(self, at):
        """P_delta at a point given as k jets (or one jet when k = 1) or floats."""
        if isinstance(at, Jet):
            at = [at]
        return eval_poly(self.poly(), at)


def eval_P_delta(p: SignedPolynomial, at) -> Jet:
    return p.eval(at)
