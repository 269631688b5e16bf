"""Sparse multivariate polynomial algebra.

Monomials are keyed by exponent tuples; this is enough for the small
degrees and dimensions the regression bases need (tensor Legendre bases,
affine substitution, and closed-form expectations against products of
truncated standard normals).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import numkernel

MultiIndex = tuple[int, ...]


def enumerate_multi_indices(dim: int, max_degree: int) -> list[MultiIndex]:
    """All exponent tuples j in N_0^dim with |j|_1 <= max_degree.

    Graded lexicographic order: ascending total degree, lexicographic
    within a degree. Deterministic across runs and platforms.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if max_degree < 0:
        raise ValueError(f"max_degree must be >= 0, got {max_degree}")

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    out: list[MultiIndex] = []
    for deg in range(max_degree + 1):
        block = sorted(compositions(deg, dim), reverse=True)
        out.extend(block)
    return out


@dataclass(frozen=True)
class MultivariatePolynomial:
    """Sparse polynomial: map from exponent tuple to coefficient."""

    dim: int
    terms: dict[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        cleaned = {k: float(v) for k, v in self.terms.items() if v != 0.0}
        object.__setattr__(self, "terms", cleaned)

    @classmethod
    def constant(cls, dim: int, value: float) -> "MultivariatePolynomial":
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def variable(cls, dim: int, index: int) -> "MultivariatePolynomial":
        exp = [0] * dim
        exp[index] = 1
        return cls(dim, {tuple(exp): 1.0})

    @classmethod
    def from_univariate(cls, coeffs, dim: int = 1, index: int = 0) -> "MultivariatePolynomial":
        """Lift ascending-power coefficients into variable `index` of a dim-variate polynomial."""
        terms = {}
        for power, c in enumerate(coeffs):
            if c != 0.0:
                exp = [0] * dim
                exp[index] = power
                terms[tuple(exp)] = float(c)
        return cls(dim, terms)

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def __add__(self, other: "MultivariatePolynomial") -> "MultivariatePolynomial":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch in polynomial addition")
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return MultivariatePolynomial(self.dim, terms)

    def scale(self, factor: float) -> "MultivariatePolynomial":
        return MultivariatePolynomial(self.dim, {e: c * factor for e, c in self.terms.items()})

    def __mul__(self, other: "MultivariatePolynomial") -> "MultivariatePolynomial":
        return poly_mul(self, other)

    def __call__(self, x) -> float:
        return poly_eval(self, x)

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at an (n, dim) array of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.shape[1] != self.dim:
            raise ValueError("dimension mismatch in polynomial evaluation")
        max_pow = [0] * self.dim
        for e in self.terms:
            for d in range(self.dim):
                max_pow[d] = max(max_pow[d], e[d])
        powers = [
            np.vander(points[:, d], max_pow[d] + 1, increasing=True) for d in range(self.dim)
        ]
        out = np.zeros(points.shape[0])
        for e, c in self.terms.items():
            mono = np.full(points.shape[0], c)
            for d in range(self.dim):
                if e[d]:
                    mono = mono * powers[d][:, e[d]]
            out += mono
        return out


def poly_mul(p: MultivariatePolynomial, q: MultivariatePolynomial) -> MultivariatePolynomial:
    """Exact convolution of the term maps."""
    if p.dim != q.dim:
        raise ValueError("dimension mismatch in polynomial product")
    terms: dict[MultiIndex, float] = {}
    for e1, c1 in p.terms.items():
        for e2, c2 in q.terms.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            terms[e] = terms.get(e, 0.0) + c1 * c2
    return MultivariatePolynomial(p.dim, terms)


def poly_eval(p: MultivariatePolynomial, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (p.dim,):
        raise ValueError(f"expected point of dimension {p.dim}, got shape {x.shape}")
    total = 0.0
    for e, c in p.terms.items():
        v = c
        for d in range(p.dim):
            if e[d]:
                v *= x[d] ** e[d]
        total += v
    return total


def legendre_poly(q: int) -> list[float]:
    """Ascending-power coefficients of the Legendre polynomial with L_q(1) = 1.

    Coefficient of x^(q-2r) is (-1)^r (2q-2r)! / (2^q r! (q-r)! (q-2r)!),
    accumulated in exact rational arithmetic to avoid cancellation.
    """
    if q < 0:
        raise ValueError(f"legendre_poly requires q >= 0, got {q}")
    coeffs = [Fraction(0)] * (q + 1)
    for r in range(q // 2 + 1):
        num = Fraction((-1) ** r * math.factorial(2 * q - 2 * r))
        den = Fraction(2**q) * math.factorial(r) * math.factorial(q - r) * math.factorial(q - 2 * r)
        coeffs[q - 2 * r] = num / den
    return [float(c) for c in coeffs]


def legendre_values(max_degree: int, x: np.ndarray) -> np.ndarray:
    """L_0..L_max evaluated at x, shape (max_degree+1,) + x.shape, via Bonnet's recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = x
    for n in range(1, max_degree):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


def tensor_legendre(j: MultiIndex) -> MultivariatePolynomial:
    """prod_d sqrt(2 j_d + 1) L_{j_d}(x_d); orthonormal under the uniform law on (-1,1]^D."""
    dim = len(j)
    p = MultivariatePolynomial.constant(dim, 1.0)
    for d, q in enumerate(j):
        factor = MultivariatePolynomial.from_univariate(
            [c * math.sqrt(2 * q + 1) for c in legendre_poly(q)], dim=dim, index=d
        )
        p = poly_mul(p, factor)
    return p


@dataclass(frozen=True)
class BasisSpec:
    """Fixed graded-lex ordering of the tensor Legendre basis of total degree <= max_degree."""

    dim: int
    max_degree: int
    ordering: tuple[MultiIndex, ...]
    polynomials: tuple[MultivariatePolynomial, ...]

    @classmethod
    def create(cls, dim: int, max_degree: int) -> "BasisSpec":
        ordering = tuple(enumerate_multi_indices(dim, max_degree))
        polys = tuple(tensor_legendre(j) for j in ordering)
        return cls(dim=dim, max_degree=max_degree, ordering=ordering, polynomials=polys)

    @property
    def size(self) -> int:
        return len(self.ordering)

    def design_columns(self, points: np.ndarray) -> np.ndarray:
        """Basis values at an (n, dim) array: returns (n, K)."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        lvals = [legendre_values(self.max_degree, points[:, d]) for d in range(self.dim)]
        cols = np.empty((points.shape[0], self.size))
        for k, j in enumerate(self.ordering):
            col = np.ones(points.shape[0])
            for d, q in enumerate(j):
                col = col * (math.sqrt(2 * q + 1) * lvals[d][q])
            cols[:, k] = col
        return cols


def affine_substitute(
    p: MultivariatePolynomial, c: np.ndarray, m: np.ndarray
) -> MultivariatePolynomial:
    """Substitute x = c + M w: returns r with r(w) = p(c + M w).

    M may be rectangular (p.dim rows, any number of output variables),
    which is how 'now'/'later' variables are joined into one polynomial.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if c.shape[0] != p.dim or m.shape[0] != p.dim:
        raise ValueError("dimension mismatch in affine substitution")
    out_dim = m.shape[1]

    # Affine images of each input variable, with cached powers.
    images = []
    for d in range(p.dim):
        terms = {(0,) * out_dim: float(c[d])}
        for e in range(out_dim):
            if m[d, e] != 0.0:
                exp = [0] * out_dim
                exp[e] = 1
                terms[tuple(exp)] = float(m[d, e])
        images.append(MultivariatePolynomial(out_dim, terms))
    power_cache: list[dict[int, MultivariatePolynomial]] = [
        {0: MultivariatePolynomial.constant(out_dim, 1.0)} for _ in range(p.dim)
    ]

    def image_power(d: int, k: int) -> MultivariatePolynomial:
        cache = power_cache[d]
        if k not in cache:
            cache[k] = poly_mul(image_power(d, k - 1), images[d])
        return cache[k]

    result = MultivariatePolynomial(out_dim, {})
    for e, coeff in p.terms.items():
        mono = MultivariatePolynomial.constant(out_dim, coeff)
        for d, k in enumerate(e):
            if k:
                mono = poly_mul(mono, image_power(d, k))
        result = result + mono
    return result


def scaled_hermite_weight_poly(iota: MultiIndex, delta: float) -> MultivariatePolynomial:
    """Derivative weight Delta^(-|iota|/2) prod_d H_{iota_d}(x_d) as a polynomial."""
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    dim = len(iota)
    order = sum(iota)
    p = MultivariatePolynomial.constant(dim, delta ** (-order / 2.0))
    for d, q in enumerate(iota):
        p = poly_mul(p, MultivariatePolynomial.from_univariate(numkernel.hermite_coeffs(q), dim, d))
    return p


def expect_truncated_gaussian(
    p: MultivariatePolynomial, r: float, variables: tuple[int, ...] | None = None
) -> float | MultivariatePolynomial:
    """Expectation of p under independent +-r truncated standard normals.

    With `variables=None` every coordinate is integrated out and a float
    is returned. With an index subset, only those coordinates are
    integrated, leaving a polynomial in the remaining ones (used by the
    closed-form evaluation cache).
    """
    max_exp = max((max(e) for e in p.terms), default=0)
    table = numkernel.truncated_moments(max_exp + (max_exp % 2), r) if max_exp else None

    if variables is None:
        total = 0.0
        for e, c in p.terms.items():
            if any(k % 2 for k in e):
                continue
            v = c
            for k in e:
                if k:
                    v *= table[k]
            total += v
        return total

    keep = [d for d in range(p.dim) if d not in variables]
    terms: dict[MultiIndex, float] = {}
    for e, c in p.terms.items():
        if any(e[d] % 2 for d in variables):
            continue
        v = c
        for d in variables:
            if e[d]:
                v *= table[e[d]]
        key = tuple(e[d] for d in keep)
        terms[key] = terms.get(key, 0.0) + v
    return MultivariatePolynomial(max(len(keep), 1), terms if keep else {(0,): terms.get((), 0.0)})
