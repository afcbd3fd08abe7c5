"""Exact group operations in exponential coordinates.

The product is the truncated Baker-Campbell-Hausdorff series evaluated
through the structure constants.  For each spec the coordinate polynomials
of the product ``z(p, q)`` are computed once (Dynkin's formula, exact
rational coefficients) and then evaluated per point pair, exactly in
rational mode and in floating point for grid work.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .algebra import AlgebraSpec
from .poly import PolyFunction


class Point:
    """Group element in exponential coordinates ``p_{i,k}``."""

    __slots__ = ("spec", "coords")

    def __init__(self, spec, coords=None):
        self.spec = spec
        coords = coords or {}
        self.coords = {lab: coords.get(lab, 0) for lab in spec.basis}

    @staticmethod
    def identity(spec):
        return Point(spec)

    @staticmethod
    def from_sequence(spec, values):
        values = list(values)
        if len(values) != len(spec.basis):
            raise ValueError(
                f"point needs {len(spec.basis)} coordinates, got {len(values)}"
            )
        return Point(spec, dict(zip(spec.basis, values)))

    def sequence(self):
        return [self.coords[lab] for lab in self.spec.basis]

    def is_identity(self):
        return all(v == 0 for v in self.coords.values())

    def __eq__(self, other):
        return isinstance(other, Point) and all(
            self.coords[lab] == other.coords[lab] for lab in self.spec.basis
        )

    def __hash__(self):
        return hash(tuple(self.coords[lab] for lab in self.spec.basis))

    def __repr__(self):
        return f"Point({self.sequence()})"


# ---------------------------------------------------------------------------
# Dynkin series
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def dynkin_terms(max_degree: int):
    """Universal BCH terms ``(word, coefficient)`` up to the given degree.

    Words are tuples over {0, 1} (0 for the left factor, 1 for the right);
    a word ``w`` stands for the right-nested bracket
    ``[w_0, [w_1, [... [w_{n-2}, w_{n-1}] ...]]]``.
    """
    terms = {}

    def blocks(remaining, seq):
        if seq:
            yield tuple(seq)
        if remaining == 0:
            return
        for rr in range(remaining + 1):
            for ss in range(remaining - rr + 1):
                if rr + ss == 0:
                    continue
                seq.append((rr, ss))
                yield from blocks(remaining - rr - ss, seq)
                seq.pop()

    seen = set()
    for seq in blocks(max_degree, []):
        if seq in seen:
            continue
        seen.add(seq)
        n = len(seq)
        total = sum(rr + ss for rr, ss in seq)
        denom = total
        for rr, ss in seq:
            denom *= math.factorial(rr) * math.factorial(ss)
        coeff = Fraction((-1) ** (n - 1), n * denom)
        word = tuple(
            letter for rr, ss in seq for letter in (0,) * rr + (1,) * ss
        )
        terms[word] = terms.get(word, Fraction(0)) + coeff
    return {w: c for w, c in terms.items() if c}


def _poly_element(spec, tag):
    return {
        lab: PolyFunction.variable((tag,) + lab) for lab in spec.basis
    }


def _bracket_poly(spec, a, b):
    """Bracket of {label: Poly} elements through the structure constants."""
    out = {}
    for la, pa in a.items():
        if pa.is_zero():
            continue
        for lb, pb in b.items():
            if pb.is_zero():
                continue
            combo = spec.basis_bracket(la, lb)
            if not combo:
                continue
            prod = pa * pb
            for lc, c in combo.items():
                cur = out.get(lc)
                piece = prod.scale(c)
                out[lc] = piece if cur is None else cur + piece
    return out


def group_law(spec: AlgebraSpec):
    """Product coordinate polynomials ``z_label(p, q)``, memoized per spec.

    Variables are ``("p", k, i)`` and ``("q", k, i)``.
    """
    cached = spec._cache.get("law")
    if cached is not None:
        return cached
    x = _poly_element(spec, "p")
    y = _poly_element(spec, "q")
    z = {lab: x[lab] + y[lab] for lab in spec.basis}

    # evaluate nested bracket words with shared suffixes
    suffix_vals = {}

    def word_value(word):
        if word in suffix_vals:
            return suffix_vals[word]
        if len(word) == 1:
            val = x if word[0] == 0 else y
        else:
            inner = word_value(word[1:])
            head = x if word[0] == 0 else y
            val = _bracket_poly(spec, head, inner)
        suffix_vals[word] = val
        return val

    for word, coeff in dynkin_terms(spec.r).items():
        if len(word) < 2:
            continue
        val = word_value(word)
        for lab, poly in val.items():
            if poly.is_zero():
                continue
            z[lab] = z[lab] + poly.scale(coeff)
    spec._cache["law"] = z
    return z


def _law_assignment(spec, p: Point, q: Point):
    values = {}
    for lab in spec.basis:
        values[("p",) + lab] = p.coords[lab]
        values[("q",) + lab] = q.coords[lab]
    return values


def bch_product(p: Point, q: Point) -> Point:
    """Group product; exact when the coordinates are exact."""
    spec = p.spec
    if q.spec is not spec and q.spec.basis != spec.basis:
        raise ValueError("points live over different specs")
    law = group_law(spec)
    values = _law_assignment(spec, p, q)
    exact = not any(isinstance(v, float) for v in values.values())
    out = {}
    for lab in spec.basis:
        poly = law[lab]
        out[lab] = poly.evaluate(values) if exact else poly.evaluate_float(values)
    return Point(spec, out)


def inverse(p: Point) -> Point:
    return Point(p.spec, {lab: -v for lab, v in p.coords.items()})


def dilate(s, p: Point) -> Point:
    """Anisotropic dilation: layer-k coordinates scale by ``s**k``."""
    if s <= 0:
        raise ValueError("dilation parameter must be positive")
    return Point(p.spec, {lab: v * s ** lab[0] for lab, v in p.coords.items()})


def gauge_norm_power(p: Point):
    """The value ``|p|**(2 r!)``; exact for rational coordinates."""
    spec = p.spec
    rfact = math.factorial(spec.r)
    total = 0
    for k in range(1, spec.r + 1):
        sq = 0
        for lab in spec.labels_in_layer(k):
            v = p.coords[lab]
            sq = sq + v * v
        total = total + sq ** (rfact // k)
    return total


def gauge_norm(p: Point) -> float:
    spec = p.spec
    power = gauge_norm_power(p)
    rfact = math.factorial(spec.r)
    return float(power) ** (1.0 / (2 * rfact))


def gauge_distance(p: Point, q: Point) -> float:
    return gauge_norm(bch_product(inverse(q), p))


def quasi_triangle_constant(spec, samples=200, radius=1.0, seed=0):
    """Estimate sup d(p,q) / (d(p,w) + d(w,q)) over random triples.

    The gauge is only a quasi-metric; this reports the observed constant.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        pts = []
        for _ in range(3):
            coords = {
                lab: float(rng.uniform(-radius ** lab[0], radius ** lab[0]))
                for lab in spec.basis
            }
            pts.append(Point(spec, coords))
        p, w, q = pts
        denom = gauge_distance(p, w) + gauge_distance(q, w)
        if denom > 0:
            worst = max(worst, gauge_distance(p, q) / denom)
    return worst


# ---------------------------------------------------------------------------
# ball volume by Monte-Carlo sampling
# ---------------------------------------------------------------------------

def gauge_norm_arrays(spec, coords):
    """Vectorized gauge norm; ``coords`` maps labels to numpy arrays."""
    rfact = math.factorial(spec.r)
    total = 0.0
    for k in range(1, spec.r + 1):
        sq = 0.0
        for lab in spec.labels_in_layer(k):
            sq = sq + coords[lab] ** 2
        total = total + sq ** (rfact // k)
    return total ** (1.0 / (2 * rfact))


def ball_volume_estimate(spec, radius, samples, seed=0, shard=1 << 16):
    """Monte-Carlo Lebesgue volume of the gauge ball with a 95% interval.

    Sampling is sharded with per-shard generators seeded by (seed, shard
    index), so a partition across workers would reproduce the same estimate.
    """
    if radius <= 0 or samples < 1:
        raise ValueError("need radius > 0 and samples >= 1")
    box_vol = 1.0
    for lab in spec.basis:
        box_vol *= 2.0 * radius ** lab[0]
    hits = 0
    done = 0
    index = 0
    while done < samples:
        n = min(shard, samples - done)
        rng = np.random.default_rng([int(seed), index])
        coords = {}
        for lab in spec.basis:
            half = radius ** lab[0]
            coords[lab] = rng.uniform(-half, half, size=n)
        norms = gauge_norm_arrays(spec, coords)
        hits += int(np.count_nonzero(norms < radius))
        done += n
        index += 1
    p_hat = hits / samples
    est = box_vol * p_hat
    half_ci = 1.96 * box_vol * math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / samples)
    return {
        "estimate": est,
        "ci": [est - half_ci, est + half_ci],
        "samples": samples,
        "hit_fraction": p_hat,
        "box_volume": box_vol,
    }
