"""Polynomial interpolation and decoding over prime fields and high-precision C.

Berlekamp-Welch is written once against a small field interface. Over
``PrimeField`` every decision is exact; over ``ComplexField`` zero tests use
the tolerance ``2**(-bits/2)`` relative to the data scale, which makes the
complex decoder a best-effort tool.
"""

import contextlib
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import _kernels
from .errors import DecodeError, ResourceError, ValidationError
from .rng import as_rng

DEFINITION_MAX_N = 12
RYSER_MAX_N = 20


# -- fields ---------------------------------------------------------------------

@dataclass(frozen=True)
class PrimeField:
    q: int
    exact = True

    def __post_init__(self):
        from sympy import isprime

        if not 2 <= self.q < 2 ** 64 or not isprime(self.q):
            raise ValidationError(f"interpolation: q={self.q} is not a prime below 2^64")

    def context(self):
        return contextlib.nullcontext()

    def elem(self, v):
        return int(v) % self.q

    def zero(self):
        return 0

    def one(self):
        return 1

    def add(self, a, b):
        return (a + b) % self.q

    def sub(self, a, b):
        return (a - b) % self.q

    def mul(self, a, b):
        return a * b % self.q

    def inv(self, a):
        if a % self.q == 0:
            raise ZeroDivisionError("interpolation: inverse of zero")
        return pow(a, -1, self.q)

    def div(self, a, b):
        return a * self.inv(b) % self.q

    def is_zero(self, a, scale=1):
        return a % self.q == 0

    def random(self, rng, size=None):
        if size is None:
            return int(rng.integers(self.q))
        return [int(v) for v in rng.integers(self.q, size=size)]

    def rref(self, rows):
        R, pivots = _kernels.rref_mod(rows, self.q)
        return [[int(v) for v in row] for row in R], pivots


@dataclass(frozen=True)
class ComplexField:
    """Complex numbers with ``bits`` of mantissa (mpmath)."""

    bits: int = 256
    exact = False

    @property
    def tol(self):
        return mpmath.mpf(2) ** (-(self.bits // 2))

    def context(self):
        return mpmath.workprec(int(self.bits))

    def elem(self, v):
        return mpmath.mpc(v)

    def zero(self):
        return mpmath.mpc(0)

    def one(self):
        return mpmath.mpc(1)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def inv(self, a):
        return 1 / a

    def div(self, a, b):
        return a / b

    def is_zero(self, a, scale=1):
        return abs(a) <= self.tol * max(scale, 1)

    def rref(self, rows):
        """Gauss-Jordan with partial pivoting; columns below tolerance are treated as dependent."""
        a = [[mpmath.mpc(v) for v in row] for row in rows]
        nrows, ncols = len(a), len(a[0]) if a else 0
        scale = max((abs(v) for row in a for v in row), default=mpmath.mpf(0))
        cutoff = self.tol * max(scale, 1)
        pivots = []
        r = 0
        for c in range(ncols):
            if r == nrows:
                break
            p = max(range(r, nrows), key=lambda i: abs(a[i][c]))
            if abs(a[p][c]) <= cutoff:
                for i in range(r, nrows):
                    a[i][c] = mpmath.mpc(0)
                continue
            a[r], a[p] = a[p], a[r]
            piv = a[r][c]
            a[r] = [v / piv for v in a[r]]
            for i in range(nrows):
                if i != r and a[i][c] != 0:
                    f = a[i][c]
                    a[i] = [vi - f * vr for vi, vr in zip(a[i], a[r])]
            pivots.append(c)
            r += 1
        return a, pivots


# -- polynomials ----------------------------------------------------------------

@dataclass
class Polynomial:
    """Coefficients from the constant term upward."""

    coeffs: list
    field: object

    def __post_init__(self):
        with self.field.context():
            self.coeffs = [self.field.elem(c) for c in self.coeffs] or [self.field.zero()]
        self._trim()

    def _trim(self):
        while len(self.coeffs) > 1 and self._negligible(self.coeffs[-1]):
            self.coeffs.pop()

    def _negligible(self, c):
        if self.field.exact:
            return self.field.is_zero(c)
        return c == 0

    @property
    def degree(self):
        if len(self.coeffs) == 1 and self._negligible(self.coeffs[0]):
            return -1
        return len(self.coeffs) - 1

    def __call__(self, x):
        f = self.field
        with f.context():
            x = f.elem(x)
            acc = f.zero()
            for c in reversed(self.coeffs):
                acc = f.add(f.mul(acc, x), c)
            return acc

    def __eq__(self, other):
        if not isinstance(other, Polynomial) or self.field != other.field:
            return NotImplemented
        return self.coeffs == other.coeffs

    def divmod(self, divisor):
        """Long division; returns ``(quotient, remainder)``."""
        f = self.field
        with f.context():
            rem = list(self.coeffs)
            dv = list(divisor.coeffs)
            while len(dv) > 1 and dv[-1] == 0:
                dv.pop()
            lead_inv = f.inv(dv[-1])
            if len(rem) < len(dv):
                return Polynomial([f.zero()], f), Polynomial(rem, f)
            quot = [f.zero()] * (len(rem) - len(dv) + 1)
            for i in range(len(quot) - 1, -1, -1):
                coef = f.mul(rem[i + len(dv) - 1], lead_inv)
                quot[i] = coef
                for j, d in enumerate(dv):
                    rem[i + j] = f.sub(rem[i + j], f.mul(coef, d))
            rem = rem[:len(dv) - 1] or [f.zero()]
            return Polynomial(quot, f), Polynomial(rem, f)


def random_polynomial(field, degree, seed):
    rng = as_rng(seed)
    coeffs = field.random(rng, degree + 1)
    if coeffs[-1] == 0:
        coeffs[-1] = 1
    return Polynomial(coeffs, field)


@dataclass
class PolySamples:
    points: list
    degree_bound: int
    field: object = field(default_factory=ComplexField)

    def __post_init__(self):
        f = self.field
        with f.context():
            self.points = [(f.elem(x), f.elem(y)) for x, y in self.points]
        xs = [x for x, _ in self.points]
        if len(set(xs)) != len(xs):
            raise ValidationError("interpolation: sample nodes must be distinct")
        if self.degree_bound < 0:
            raise ValidationError("interpolation: degree bound must be nonnegative")


def _scale(points):
    return max((abs(y) for _, y in points), default=1)


def interpolate(samples):
    """Unique degree-<=d polynomial through the first ``d + 1`` points.

    Every further point must lie on it (exactly, or within tolerance over C);
    otherwise ``DecodeError``.
    """
    f, d, pts = samples.field, samples.degree_bound, samples.points
    if len(pts) < d + 1:
        raise ValidationError(f"interpolation: need {d + 1} points for degree {d}, got {len(pts)}")
    with f.context():
        xs = [x for x, _ in pts[:d + 1]]
        coef = [y for _, y in pts[:d + 1]]
        # Newton divided differences
        for level in range(1, d + 1):
            for i in range(d, level - 1, -1):
                coef[i] = f.div(f.sub(coef[i], coef[i - 1]), f.sub(xs[i], xs[i - level]))
        poly = [coef[d]]
        for i in range(d - 1, -1, -1):
            # poly = poly * (x - xs[i]) + coef[i]
            shifted = [f.zero()] + poly
            for j, c in enumerate(poly):
                shifted[j] = f.sub(shifted[j], f.mul(c, xs[i]))
            shifted[0] = f.add(shifted[0], coef[i])
            poly = shifted
        p = Polynomial(poly, f)
        scale = _scale(pts)
        for x, y in pts[d + 1:]:
            if not f.is_zero(f.sub(p(x), y), scale):
                raise DecodeError("interpolation: points are inconsistent with a degree-"
                                  f"{d} polynomial")
    return p


def max_errors(k, d):
    """Largest error count Berlekamp-Welch corrects with ``k`` points at degree ``d``."""
    return max((k - d - 1) // 2, 0)


def bw_decode(samples, errors=None):
    """Berlekamp-Welch decoding.

    Recovers the degree-<=d polynomial when at most ``(k - d - 1) // 2`` of
    the ``k`` values are wrong. Beyond that bound the result is a
    ``DecodeError`` or, with no detection guarantee, a wrong polynomial.
    """
    f, d, pts = samples.field, samples.degree_bound, samples.points
    k = len(pts)
    if k < d + 1:
        raise ValidationError(f"interpolation: need {d + 1} points for degree {d}, got {k}")
    e = max_errors(k, d) if errors is None else int(errors)
    if e == 0:
        return interpolate(samples)
    with f.context():
        # unknowns: E_0..E_{e-1} (E monic of degree e), Q_0..Q_{e+d}
        # Q(x_i) - y_i E(x_i) = 0  ->  sum Q_j x^j - y sum_{j<e} E_j x^j = y x^e
        rows = []
        for x, y in pts:
            powers = [f.one()]
            for _ in range(e + d):
                powers.append(f.mul(powers[-1], x))
            row = [f.sub(f.zero(), f.mul(y, powers[j])) for j in range(e)]
            row += powers[:e + d + 1]
            row.append(f.mul(y, powers[e]))
            rows.append(row)
        R, pivots = f.rref(rows)
        nvars = 2 * e + d + 1
        if nvars in pivots:
            raise DecodeError("interpolation: Berlekamp-Welch system is inconsistent")
        sol = [f.zero()] * nvars
        for r, c in enumerate(pivots):
            sol[c] = R[r][nvars]
        E = Polynomial(sol[:e] + [f.one()], f)
        Q = Polynomial(sol[e:], f)
        P, rem = Q.divmod(E)
        scale = _scale(pts)
        if any(not f.is_zero(c, scale) for c in rem.coeffs):
            raise DecodeError("interpolation: error locator does not divide; too many errors")
        if P.degree > d:
            raise DecodeError("interpolation: decoded polynomial exceeds the degree bound")
        agree = sum(1 for x, y in pts if f.is_zero(f.sub(P(x), y), scale))
        if agree < k - e:
            raise DecodeError("interpolation: decoded polynomial disagrees with too many points")
    return P


# -- permanents -----------------------------------------------------------------

def _square(M):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("interpolation: permanent needs a square matrix")
    return M


def permanent(M, field=None, method="ryser"):
    """Permanent over ``field`` (a ``PrimeField``) or, with ``field=None``, over C.

    ``method="definition"`` sums over all permutations (n <= 12);
    ``"ryser"`` uses inclusion-exclusion over column subsets (n <= 20).
    """
    M = _square(M)
    n = M.shape[0]
    if method == "definition":
        if n > DEFINITION_MAX_N:
            raise ResourceError(f"interpolation: definition sum limited to n <= {DEFINITION_MAX_N}")
        if field is not None:
            a = [[int(v) % field.q for v in row] for row in M]
            total = 0
            for sigma in itertools.permutations(range(n)):
                prod = 1
                for i, j in enumerate(sigma):
                    prod = prod * a[i][j] % field.q
                total += prod
            return total % field.q
        a = np.asarray(M, dtype=np.complex128)
        rows = np.arange(n)
        return complex(sum(np.prod(a[rows, list(sigma)]) for sigma in itertools.permutations(range(n))))
    if method != "ryser":
        raise ValidationError(f"interpolation: unknown permanent method {method!r}")
    if n > RYSER_MAX_N:
        raise ResourceError(f"interpolation: inclusion-exclusion limited to n <= {RYSER_MAX_N}")
    if field is not None:
        return _kernels.permanent_mod(M, field.q)
    return _kernels.permanent_complex(M)


def random_matrix(field, n, seed):
    rng = as_rng(seed)
    return np.array([[int(v) for v in rng.integers(field.q, size=n)] for _ in range(n)], dtype=object)


class RandomErrorOracle:
    """Permanent oracle over F_q that answers wrongly with probability ``rate``.

    Wrong answers are the true value plus a uniform nonzero offset.
    """

    def __init__(self, field, rate, seed):
        self.field = field
        self.rate = float(rate)
        self.rng = as_rng(seed)
        self.queries = 0
        self.errors = 0

    def __call__(self, M):
        self.queries += 1
        value = permanent(M, self.field)
        if self.rate > 0 and self.rng.random() < self.rate:
            self.errors += 1
            value = (value + 1 + int(self.rng.integers(self.field.q - 1))) % self.field.q
        return value


class LineAdversaryOracle:
    """Answers wrongly on every matrix ``Y + t X`` with ``t != 0`` and correctly elsewhere.

    Such an oracle is correct on all but ``q - 1`` of the ``q**(n*n)``
    matrices, yet defeats a reduction that walks that particular line.
    """

    def __init__(self, field, Y, X):
        self.field = field
        self.Y = np.asarray(Y, dtype=object) % field.q
        self.X = np.asarray(X, dtype=object) % field.q

    def _on_line(self, M):
        q = self.field.q
        M = np.asarray(M, dtype=object) % q
        D = (M - self.Y) % q
        nz = [(i, j) for i in range(D.shape[0]) for j in range(D.shape[1]) if self.X[i, j]]
        if not nz:
            return False
        i, j = nz[0]
        t = D[i, j] * pow(int(self.X[i, j]), -1, q) % q
        return t != 0 and bool(np.all((self.Y + t * self.X) % q == M))

    def __call__(self, M):
        value = permanent(M, self.field)
        return (value + 1) % self.field.q if self._on_line(M) else value


@dataclass
class PermanentReduction:
    value: int
    votes: dict
    repetitions: int


def permanent_w2a(Y, oracle, field, seed, repetitions=1, X=None, details=False):
    """Worst-case permanent of ``Y`` from an average-case oracle.

    Each repetition draws a uniform ``X``, queries the oracle on
    ``A(t) = X t + Y`` for ``t = 1..n+1`` (each uniformly distributed), fits
    the degree-``n`` polynomial ``t -> perm(A(t))`` and reads off its value at
    ``t = 0``. The most frequent answer over repetitions is returned.
    """
    Y = np.asarray(Y, dtype=object)
    n = Y.shape[0]
    if field.q < n + 2:
        raise ValidationError(f"interpolation: need q >= n + 2 = {n + 2}, got q={field.q}")
    rng = as_rng(seed)
    votes = Counter()
    for _ in range(repetitions):
        Xr = random_matrix(field, n, rng) if X is None else np.asarray(X, dtype=object)
        pts = []
        for t in range(1, n + 2):
            A = (Xr * t + Y) % field.q
            pts.append((t, oracle(A)))
        votes[interpolate(PolySamples(pts, n, field))(0)] += 1
    value = max(votes.items(), key=lambda kv: (kv[1], -kv[0]))[0]
    if details:
        return PermanentReduction(value, dict(votes), repetitions)
    return value


# -- nodes and barycentric evaluation (high precision) -------------------------

def chebyshev_nodes(k, a, b):
    """First-kind Chebyshev points mapped into the open interval ``(a, b)``."""
    a, b = mpmath.mpf(a), mpmath.mpf(b)
    out = []
    for j in range(k):
        x = mpmath.cos((2 * j + 1) * mpmath.pi / (2 * k))
        out.append(a + (b - a) * (1 + x) / 2)
    return sorted(out)


def uniform_nodes(k, a, b):
    """``k`` equispaced points ``a + (b - a) j / k``, ``j = 0..k-1``."""
    a, b = mpmath.mpf(a), mpmath.mpf(b)
    return [a + (b - a) * j / k for j in range(k)]


def barycentric_weights(nodes):
    w = []
    for j, xj in enumerate(nodes):
        prod = mpmath.mpf(1)
        for i, xi in enumerate(nodes):
            if i != j:
                prod *= xj - xi
        w.append(1 / prod)
    return w


def lagrange_eval(nodes, values, weights, x):
    """Interpolant at ``x`` via the first barycentric form (stable for extrapolation)."""
    x = mpmath.mpmathify(x)
    ell = mpmath.mpf(1)
    acc = 0
    for xj, yj, wj in zip(nodes, values, weights):
        if x == xj:
            return yj
        ell *= x - xj
        acc += wj * yj / (x - xj)
    return ell * acc


def lebesgue_factor(nodes, weights, x):
    """``sum_j |l_j(x)|``: worst-case amplification of data errors at ``x``."""
    x = mpmath.mpmathify(x)
    ell = mpmath.mpf(1)
    acc = mpmath.mpf(0)
    for xj, wj in zip(nodes, weights):
        if x == xj:
            return mpmath.mpf(1)
        ell *= x - xj
        acc += abs(wj / (x - xj))
    return abs(ell) * acc


def fit_residual(nodes, values, degree):
    """Fit degree ``degree`` on the first ``degree + 1`` nodes; max misfit on the rest."""
    base = nodes[:degree + 1]
    w = barycentric_weights(base)
    vals = values[:degree + 1]
    res = mpmath.mpf(0)
    for x, y in zip(nodes[degree + 1:], values[degree + 1:]):
        res = max(res, abs(lagrange_eval(base, vals, w, x) - y))
    return res


def log2_condition(k, width, target):
    """Rough ``log2`` of the Chebyshev extrapolation amplification from ``[0, width]`` to ``target``."""
    t = 2 * target / width - 1
    return (k - 1) * math.log2(t + math.sqrt(t * t - 1)) if t > 1 else 0.0
