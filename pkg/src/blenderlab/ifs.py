"""One-dimensional blender and parablender iterated function systems.

The toy system iterates, over letters delta in {-1,+1}^{d'+1},

    y  ->  (2/3) y + delta(0)/3 + eps * P_delta(a)  [+ offset_delta],

and this module enumerates depth-N cylinder data, evaluates the limit
heights y(word, a) with explicit tail bounds, and certifies coverage of
boxes in (value, parameter-derivative) jet space by exhaustive search.

Certificates are exhaustive by design: beyond the enumeration budget the
operations refuse rather than sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetExceeded, DimensionMismatch, InconclusiveError
from .jets import Jet, SignedPolynomial, d_prime

BUDGET_WORDS = 2 ** 24
CONTRACTION = 2.0 / 3.0


@dataclass(frozen=True)
class SymbolWord:
    """Finite word (delta_{-1}, ..., delta_{-N}) over {-1,+1}^{d'+1}."""

    letters: tuple[tuple[int, ...], ...]
    periodic: bool = False

    def __post_init__(self):
        if not self.letters:
            raise ValueError("empty word")
        width = len(self.letters[0])
        for l in self.letters:
            if len(l) != width or any(s not in (-1, 1) for s in l):
                raise ValueError(f"malformed letter {l!r}")

    @property
    def depth(self) -> int:
        return len(self.letters)

    @property
    def width(self) -> int:
        return len(self.letters[0])

    def shifted(self) -> "SymbolWord":
        """The word coding the image point (periodic words rotate right)."""
        if self.periodic:
            return SymbolWord(self.letters[-1:] + self.letters[:-1], periodic=True)
        return SymbolWord(self.letters[1:])

    def prepended(self, letter) -> "SymbolWord":
        """Finite word of the image through the given branch letter."""
        return SymbolWord((tuple(letter),) + self.letters, periodic=self.periodic)


@dataclass(frozen=True)
class JetPoint:
    """Limit-height jet of a cylinder plus per-coordinate tail bounds.

    ``remainder`` is in derivative units, one entry per jet coordinate of
    order <= d (same enumeration as the jet's multi-indices).
    """

    jet: Jet
    remainder: np.ndarray


def _p_sup(k: int, d: int, radius: float = 1.0) -> float:
    """sup of |P_delta| over the radius-ball: sum radius^|alpha| / alpha!."""
    total = 0.0
    poly = SignedPolynomial((1,) * (d_prime(k, d) + 1), k, d)
    for alpha in poly.basis:
        fact = 1.0
        for e in alpha:
            fact *= math.factorial(e)
        total += radius ** sum(alpha) / fact
    return total


def tail_bounds(depth: int, eps: float, k: int, d: int,
                offset_sup: float = 0.0) -> np.ndarray:
    """Derivative-unit tail bounds for a depth-``depth`` partial sum."""
    from .jets import multi_indices

    geo = 3.0 * CONTRACTION ** depth
    out = []
    for alpha in multi_indices(k, d):
        if sum(alpha) == 0:
            out.append(geo * (1.0 / 3.0 + eps * _p_sup(k, d) + offset_sup))
        else:
            out.append(geo * eps)
    return np.asarray(out)


def y_series(word: SymbolWord, eps: float, a, k: int = 1, d: int | None = None,
             offsets: dict | None = None) -> JetPoint:
    """Height jet of the word's unstable cylinder at the parameter jet a.

    Finite words give the depth-N partial sum with its tail bound; for
    ``word.periodic`` the closed geometric form of the bi-infinite
    repetition is returned (remainder 0).
    """
    if d is None:
        d = _infer_d(word.width, k)
    if word.width != d_prime(k, d) + 1:
        raise DimensionMismatch(
            f"letter width {word.width} does not match d'+1 for (k={k}, d={d})"
        )
    if isinstance(a, Jet):
        a = [a]
    offsets = offsets or {}
    acc = None
    w = 1.0
    for letter in word.letters:
        poly = SignedPolynomial(letter, k, d)
        step = letter[0] / 3.0 + eps * poly.eval(list(a)) + offsets.get(tuple(letter), 0.0)
        acc = step * w if acc is None else acc + step * w
        w *= CONTRACTION
    if word.periodic:
        acc = acc * (1.0 / (1.0 - CONTRACTION ** word.depth))
        rem = np.zeros(len(acc.c) if isinstance(acc, Jet) else 1)
    else:
        off_sup = max((abs(v) for v in offsets.values()), default=0.0)
        rem = tail_bounds(word.depth, eps, k, d, off_sup)
    if not isinstance(acc, Jet):
        acc = Jet.constant(k, d, float(acc))
    return JetPoint(acc, rem)


def _infer_d(width: int, k: int) -> int:
    for d in range(0, 64):
        if d_prime(k, d) + 1 == width:
            return d
    raise DimensionMismatch(f"no order d gives letter width {width} at k={k}")


def apply_branch(letter: Sequence[int], point: JetPoint, eps: float, a,
                 k: int = 1, d: int | None = None,
                 offsets: dict | None = None) -> JetPoint:
    """One forward IFS step: y -> (2/3) y + delta(0)/3 + eps P_delta(a)."""
    if d is None:
        d = _infer_d(len(letter), k)
    if isinstance(a, Jet):
        a = [a]
    offsets = offsets or {}
    poly = SignedPolynomial(letter, k, d)
    step = letter[0] / 3.0 + eps * poly.eval(list(a)) + offsets.get(tuple(letter), 0.0)
    jet = point.jet * CONTRACTION + step
    if not isinstance(jet, Jet):
        jet = Jet.constant(k, d, float(jet))
    return JetPoint(jet, point.remainder * CONTRACTION)


# ---------------------------------------------------------------------------
# limit-set cover (value coordinate only)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Branch1D:
    f: Callable[[np.ndarray], np.ndarray]
    lip: float


def model_branches(eps: float = 0.0, dp: int = 0,
                   offsets: dict | None = None) -> list[Branch1D]:
    """The 2^{dp+1} model branches at a = 0 (P_delta(0) = 0)."""
    import itertools

    offsets = offsets or {}
    out = []
    for letter in itertools.product((-1, 1), repeat=dp + 1):
        c = letter[0] / 3.0 + offsets.get(letter, 0.0)
        out.append(Branch1D(lambda y, c=c: CONTRACTION * y + c, CONTRACTION))
    return out


@dataclass(frozen=True)
class CoverResult:
    centers: np.ndarray
    radius: float
    hausdorff_centers: float
    hausdorff_certified: float
    depth: int

    def covered_within(self, tol: float) -> bool:
        return self.hausdorff_centers <= tol


def limit_set_cover(eps: float = 0.0, depth: int = 20, dp: int = 0,
                    branches: list[Branch1D] | None = None,
                    target: tuple[float, float] = (-1.0, 1.0)) -> CoverResult:
    """Depth-N cylinder centers with a rigorous radius, vs the target interval."""
    if branches is None:
        branches = model_branches(eps=eps, dp=dp)
    n_words = len(branches) ** depth
    if n_words > BUDGET_WORDS:
        raise BudgetExceeded(f"{n_words} words exceed the {BUDGET_WORDS} cap")
    q = max(b.lip for b in branches)
    vals = np.array([0.0])
    for _ in range(depth):
        vals = np.concatenate([b.f(vals) for b in branches])
    # radius: the seed 0 lies within 2 of any point of the invariant set
    radius = q ** depth * 2.0
    lo, hi = target
    vs = np.sort(vals)
    outside = max(0.0, float(vs[-1]) - hi, lo - float(vs[0]))
    gaps = [max(0.0, lo - vs[0]), max(0.0, hi - vs[-1])]
    if len(vs) > 1:
        gaps.append(float(np.max(np.diff(vs))) / 2.0)
    inside = max(gaps)
    h_centers = max(outside, inside)
    h_certified = max(max(0.0, outside - radius), max(0.0, inside - radius))
    return CoverResult(vals, radius, h_centers, h_certified, depth)


# ---------------------------------------------------------------------------
# jet-space enumeration and coverage certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReachableJets:
    """Depth-N partial-sum jet points (derivative units), exhaustive."""

    points: np.ndarray          # shape (M, n_coords)
    remainder: np.ndarray       # per-coordinate tail bounds
    depth: int
    eps: float
    k: int
    d: int

    @property
    def cardinality(self) -> int:
        return self.points.shape[0]

    def dedup(self, granularity: float = 1e-12) -> np.ndarray:
        keys = np.round(self.points / granularity).astype(np.int64)
        return np.unique(keys, axis=0).astype(float) * granularity


def _letter_contribs(eps: float, k: int, d: int, offsets: dict | None):
    """Per-letter derivative-unit contribution vectors (value first)."""
    import itertools

    from .jets import multi_indices

    offsets = offsets or {}
    dp = d_prime(k, d)
    mono = multi_indices(k, d)
    rows = []
    letts = list(itertools.product((-1, 1), repeat=dp + 1))
    for letter in letts:
        base = [0.0] * len(mono)
        base[0] = letter[0] / 3.0 + offsets.get(letter, 0.0)
        for j, alpha in enumerate(mono):
            if sum(alpha) >= 1:
                # derivative-unit coefficient of P_delta at the basis slot
                pos = [m for m in mono if sum(m) >= 1].index(alpha) + 1
                base[j] = eps * letter[pos]
        rows.append(base)
    return letts, np.asarray(rows)


def jet_reachable_set(eps: float, depth: int, d: int, k: int = 1,
                      offsets: dict | None = None) -> ReachableJets:
    """All depth-N partial-sum jets, exhaustively (budget-capped)."""
    dp = d_prime(k, d)
    n_words = (2 ** (dp + 1)) ** depth
    if n_words > BUDGET_WORDS:
        raise BudgetExceeded(
            f"2^{depth * (dp + 1)} words exceed the exhaustive budget 2^24"
        )
    _, contribs = _letter_contribs(eps, k, d, offsets)
    pts = np.zeros((1, contribs.shape[1]))
    w = 1.0
    for _ in range(depth):
        pts = np.concatenate([pts + w * row for row in contribs])
        w *= CONTRACTION
    off_sup = max((abs(v) for v in (offsets or {}).values()), default=0.0)
    rem = tail_bounds(depth, eps, k, d, off_sup)
    return ReachableJets(pts, rem, depth, eps, k, d)


@dataclass(frozen=True)
class CoverageCertificate:
    covered: bool
    box: tuple
    depth: int
    eps: float
    cell_counts: tuple[int, ...]
    radius: tuple[float, ...]
    witness: tuple | None = None
    method: str = "exhaustive"

    def to_record(self) -> dict:
        return {
            "kind": "jet_coverage",
            "covered": self.covered,
            "box": [list(b) for b in self.box],
            "depth": self.depth,
            "eps": self.eps,
            "cells": list(self.cell_counts),
            "radius": list(self.radius),
            "witness": list(self.witness) if self.witness else None,
            "method": self.method,
        }


def _signed_sums(weights: np.ndarray) -> np.ndarray:
    vals = np.array([0.0])
    for w in weights:
        vals = np.concatenate([vals - w, vals + w])
    return vals


def _cells(lo: float, hi: float, radius: float) -> tuple[np.ndarray, float]:
    """Grid over [lo, hi] with cells no finer than the remainder supports."""
    if radius <= 0:
        raise InconclusiveError("zero remainder radius cannot support a grid")
    if hi - lo < 2.0 * radius:
        raise InconclusiveError(
            f"box side {hi - lo:.3g} below the remainder resolution {2 * radius:.3g}"
        )
    n = max(1, int(math.floor((hi - lo) / (2.0 * radius))))
    edges = np.linspace(lo, hi, n + 1)
    return edges, (hi - lo) / n


def _axis_covered(values: np.ndarray, edges: np.ndarray, radius: float):
    """Check every cell [e_i, e_i+1] meets some value within radius."""
    vs = np.sort(values)
    for i in range(len(edges) - 1):
        lo, hi = edges[i] - radius, edges[i + 1] + radius
        j = np.searchsorted(vs, lo)
        if j >= len(vs) or vs[j] > hi:
            return i
    return None


def jet_coverage_certificate(eps: float, depth: int, d: int, box: Sequence,
                             k: int = 1, offsets: dict | None = None,
                             ) -> CoverageCertificate:
    """Exhaustively certify that depth-N jets cover every cell of the box.

    Box coordinates are (value, then the derivative coordinates, derivative
    units).  For k = 1 the model's coordinate separability (jet coordinate
    i only sums the delta(i) signs; constant branch offsets touch only the
    value coordinate) is exploited so certification at d = 1 stays within
    memory at depths the joint enumeration cannot reach.
    """
    dp = d_prime(k, d)
    if len(box) != dp + 1:
        raise DimensionMismatch(f"box needs {dp + 1} coordinate ranges")
    off_sup = max((abs(v) for v in (offsets or {}).values()), default=0.0)
    rem = tail_bounds(depth, eps, k, d, off_sup)
    radius = tuple(float(r) for r in rem)

    if k == 1 and d == 1:
        return _certificate_separable_d1(eps, depth, box, radius, offsets)

    # generic path: full joint enumeration under the budget
    reach = jet_reachable_set(eps, depth, d, k, offsets)
    grids = [_cells(lo, hi, radius[i]) for i, (lo, hi) in enumerate(box)]
    counts = tuple(len(e) - 1 for e, _ in grids)
    idx_ranges = [range(c) for c in counts]
    import itertools as it

    pts = reach.points
    for cell in it.product(*idx_ranges):
        mask = np.ones(len(pts), dtype=bool)
        for ax, ci in enumerate(cell):
            edges, _ = grids[ax]
            lo, hi = edges[ci] - radius[ax], edges[ci + 1] + radius[ax]
            mask &= (pts[:, ax] >= lo) & (pts[:, ax] <= hi)
            if not mask.any():
                break
        if not mask.any():
            return CoverageCertificate(False, tuple(map(tuple, box)), depth, eps,
                                       counts, radius, witness=cell)
    return CoverageCertificate(True, tuple(map(tuple, box)), depth, eps,
                               counts, radius)


def _certificate_separable_d1(eps, depth, box, radius, offsets):
    """k = 1, d = 1: per derivative-slab exhaustive value enumeration."""
    offsets = offsets or {}
    weights = CONTRACTION ** np.arange(depth)
    d_edges, _ = _cells(box[1][0], box[1][1], radius[1])
    v_edges, _ = _cells(box[0][0], box[0][1], radius[0])
    counts = (len(v_edges) - 1, len(d_edges) - 1)
    for ci in range(len(d_edges) - 1):
        target = 0.5 * (d_edges[ci] + d_edges[ci + 1])
        # greedy sign choice driving the derivative sum to the cell center
        s, acc = [], 0.0
        for w in weights:
            sg = 1 if target - acc >= 0 else -1
            s.append(sg)
            acc += sg * eps * w
        if not (d_edges[ci] - radius[1] <= acc <= d_edges[ci + 1] + radius[1]):
            return CoverageCertificate(False, tuple(map(tuple, box)), depth, eps,
                                       counts, radius, witness=(None, ci),
                                       method="separable-d1")
        # conditioned on the delta(1) sequence s, enumerate the value sums
        vals = np.array([0.0])
        for i, w in enumerate(weights):
            cm = -1.0 / 3.0 + offsets.get((-1, s[i]), 0.0)
            cp = 1.0 / 3.0 + offsets.get((1, s[i]), 0.0)
            vals = np.concatenate([vals + w * cm, vals + w * cp])
        missed = _axis_covered(vals, v_edges, radius[0])
        if missed is not None:
            return CoverageCertificate(False, tuple(map(tuple, box)), depth, eps,
                                       counts, radius, witness=(missed, ci),
                                       method="separable-d1")
    return CoverageCertificate(True, tuple(map(tuple, box)), depth, eps,
                               counts, radius, method="separable-d1")
