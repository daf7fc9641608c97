import itertools

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from rcslab import interpolation as ip
from rcslab.errors import DecodeError, ResourceError, ValidationError

F101 = ip.PrimeField(101)
FBIG = ip.PrimeField(999999937)


def samples_of(poly, xs, field):
    return ip.PolySamples([(x, poly(x)) for x in xs], poly.degree, field)


def corrupt(points, idx, field, rng):
    pts = list(points)
    for i in idx:
        x, y = pts[i]
        pts[i] = (x, field.add(y, 1 + int(rng.integers(field.q - 1))))
    return pts


class TestFields:
    @pytest.mark.parametrize("q", [1, 100, 2 ** 64 + 13])
    def test_bad_modulus(self, q):
        with pytest.raises(ValidationError):
            ip.PrimeField(q)

    def test_inverse(self):
        assert F101.mul(F101.inv(37), 37) == 1
        with pytest.raises(ZeroDivisionError):
            F101.inv(0)


class TestInterpolate:
    def test_constant(self):
        p = ip.interpolate(ip.PolySamples([(x, 7) for x in range(5)], 0, F101))
        assert p.coeffs == [7]

    def test_three_points_prime_field(self):
        p = ip.interpolate(ip.PolySamples([(0, 1), (1, 2), (2, 5)], 2, F101))
        assert p.coeffs == [1, 0, 1]

    def test_three_points_complex(self):
        field = ip.ComplexField(128)
        p = ip.interpolate(ip.PolySamples([(0, 1), (1, 2), (2, 5)], 2, field))
        assert [complex(c) for c in p.coeffs] == pytest.approx([1, 0, 1], abs=1e-30)

    def test_random_degree_twelve(self):
        poly = ip.random_polynomial(FBIG, 12, 3)
        back = ip.interpolate(samples_of(poly, range(1, 14), FBIG))
        assert back == poly

    def test_inconsistent_points(self):
        pts = [(0, 1), (1, 2), (2, 5), (3, 11)]
        with pytest.raises(DecodeError):
            ip.interpolate(ip.PolySamples(pts, 2, F101))

    def test_too_few_points(self):
        with pytest.raises(ValidationError):
            ip.interpolate(ip.PolySamples([(0, 1)], 2, F101))

    def test_duplicate_nodes(self):
        with pytest.raises(ValidationError):
            ip.PolySamples([(1, 1), (1, 2)], 1, F101)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 999999936), min_size=1, max_size=20))
    def test_roundtrip_prime(self, coeffs):
        poly = ip.Polynomial(coeffs, FBIG)
        d = max(poly.degree, 0)
        assert ip.interpolate(ip.PolySamples([(x, poly(x)) for x in range(d + 1)], d, FBIG)) == poly

    @pytest.mark.parametrize("degree", [8, 32, 64])
    def test_roundtrip_complex(self, degree):
        field = ip.ComplexField(256)
        rng = np.random.default_rng(degree)
        with field.context():
            coeffs = [mpmath.mpc(*rng.standard_normal(2)) for _ in range(degree + 1)]
            poly = ip.Polynomial(coeffs, field)
            xs = [mpmath.cos(mpmath.pi * (2 * j + 1) / (2 * degree + 2)) for j in range(degree + 1)]
            back = ip.interpolate(ip.PolySamples([(x, poly(x)) for x in xs], degree, field))
            scale = max(abs(c) for c in coeffs)
            assert max(abs(a - b) for a, b in zip(back.coeffs, coeffs)) <= 1e-9 * scale


class TestBerlekampWelch:
    def test_matches_interpolate_without_errors(self):
        poly = ip.random_polynomial(F101, 4, 1)
        s = samples_of(poly, range(5), F101)
        assert ip.bw_decode(s) == ip.interpolate(s)

    def test_zero_injected_errors_reduces_to_interpolation(self):
        poly = ip.random_polynomial(FBIG, 6, 2)
        s = samples_of(poly, range(1, 16), FBIG)
        assert ip.bw_decode(s) == poly

    def test_three_errors_degree_three(self):
        rng = np.random.default_rng(4)
        poly = ip.random_polynomial(F101, 3, 4)
        pts = corrupt(samples_of(poly, range(10), F101).points, [1, 5, 8], F101, rng)
        assert ip.max_errors(10, 3) == 3
        assert ip.bw_decode(ip.PolySamples(pts, 3, F101)) == poly

    def test_beyond_the_bound_is_not_guaranteed(self):
        rng = np.random.default_rng(5)
        poly = ip.random_polynomial(F101, 3, 5)
        pts = corrupt(samples_of(poly, range(10), F101).points, [0, 2, 4, 6], F101, rng)
        try:
            got = ip.bw_decode(ip.PolySamples(pts, 3, F101))
        except DecodeError:
            return
        # any polynomial returned must agree with at least k - e of the points
        agree = sum(1 for x, y in pts if got(x) == y)
        assert agree >= 10 - 3
        # and a clean re-run recovers the truth
        assert ip.bw_decode(samples_of(poly, range(10), F101)) == poly

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 12), st.integers(0, 10), st.integers(0, 2 ** 31))
    def test_recovers_at_boundary(self, d, extra, seed):
        rng = np.random.default_rng(seed)
        k = d + 1 + extra
        poly = ip.random_polynomial(FBIG, d, rng)
        xs = [int(x) for x in rng.choice(10_000, size=k, replace=False)]
        e = ip.max_errors(k, d)
        bad = rng.choice(k, size=e, replace=False)
        pts = corrupt(samples_of(poly, xs, FBIG).points, bad, FBIG, rng)
        assert ip.bw_decode(ip.PolySamples(pts, d, FBIG)) == poly

    def test_complex_best_effort(self):
        field = ip.ComplexField(256)
        with field.context():
            poly = ip.Polynomial([1, 2, -1, 0.5], field)
            pts = [(mpmath.mpf(x) / 4, poly(mpmath.mpf(x) / 4)) for x in range(12)]
            pts[3] = (pts[3][0], pts[3][1] + 5)
            pts[7] = (pts[7][0], pts[7][1] - 2)
            got = ip.bw_decode(ip.PolySamples(pts, 3, field))
            assert max(abs(a - b) for a, b in zip(got.coeffs, poly.coeffs)) < 1e-20


class TestPermanent:
    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_identity(self, n):
        assert ip.permanent(np.eye(n, dtype=object), F101) == 1
        assert ip.permanent(np.eye(n)) == pytest.approx(1)

    def test_two_by_two(self):
        a, b, c, d = 3, 5, 7, 11
        assert ip.permanent([[a, b], [c, d]], F101) == (a * d + b * c) % 101

    def test_methods_agree_mod_101(self):
        M = ip.random_matrix(F101, 5, 6)
        assert ip.permanent(M, F101) == ip.permanent(M, F101, method="definition")

    def test_sympy_oracle(self):
        M = ip.random_matrix(F101, 6, 7)
        assert ip.permanent(M, F101) == int(sympy.Matrix(M.tolist()).per()) % 101

    def test_methods_agree_complex(self):
        rng = np.random.default_rng(8)
        M = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        assert ip.permanent(M) == pytest.approx(ip.permanent(M, method="definition"), abs=1e-9)

    def test_guards(self):
        with pytest.raises(ResourceError):
            ip.permanent(np.eye(13), method="definition")
        with pytest.raises(ResourceError):
            ip.permanent(np.eye(21))
        with pytest.raises(ValidationError):
            ip.permanent(np.ones((2, 3)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31), st.integers(2, 6))
    def test_multilinear_in_rows(self, seed, n):
        rng = np.random.default_rng(seed)
        M = ip.random_matrix(F101, n, rng)
        u, v = F101.random(rng, n), F101.random(rng, n)
        i = int(rng.integers(n))
        Mu, Mv, Ms = M.copy(), M.copy(), M.copy()
        Mu[i], Mv[i] = u, v
        Ms[i] = [(a + b) % 101 for a, b in zip(u, v)]
        assert ip.permanent(Ms, F101) == (ip.permanent(Mu, F101) + ip.permanent(Mv, F101)) % 101

    def test_line_restriction_is_degree_n(self):
        rng = np.random.default_rng(9)
        n, field = 4, ip.PrimeField(10007)
        Y, X = ip.random_matrix(field, n, rng), ip.random_matrix(field, n, rng)
        pts = [(t, ip.permanent((X * t + Y) % field.q, field)) for t in range(1, n + 2)]
        poly = ip.interpolate(ip.PolySamples(pts, n, field))
        assert poly.degree <= n
        assert poly(0) == ip.permanent(Y, field)
        assert poly(n + 5) == ip.permanent((X * (n + 5) + Y) % field.q, field)


class TestPermanentReduction:
    def test_perfect_oracle(self):
        field = F101
        rng = np.random.default_rng(10)
        oracle = ip.RandomErrorOracle(field, 0.0, rng)
        for _ in range(10):
            Y = ip.random_matrix(field, 4, rng)
            assert ip.permanent_w2a(Y, oracle, field, rng) == ip.permanent(Y, field)

    def test_field_too_small(self):
        field = ip.PrimeField(5)
        with pytest.raises(ValidationError):
            ip.permanent_w2a(np.eye(4, dtype=object), ip.RandomErrorOracle(field, 0, 1), field, 1)

    def test_random_errors_with_majority(self):
        field = ip.PrimeField(10007)
        rng = np.random.default_rng(11)
        correct = 0
        for _ in range(20):
            Y = ip.random_matrix(field, 4, rng)
            oracle = ip.RandomErrorOracle(field, 0.05, rng)
            correct += ip.permanent_w2a(Y, oracle, field, rng, repetitions=99) == ip.permanent(Y, field)
        assert correct >= 19

    def test_line_adversary_defeats_a_fixed_line(self):
        field = ip.PrimeField(10007)
        rng = np.random.default_rng(12)
        Y, X = ip.random_matrix(field, 4, rng), ip.random_matrix(field, 4, rng)
        oracle = ip.LineAdversaryOracle(field, Y, X)
        result = ip.permanent_w2a(Y, oracle, field, 1, repetitions=5, X=X, details=True)
        assert result.value != ip.permanent(Y, field)
        # off the line the same oracle is exact
        Z = ip.random_matrix(field, 4, rng)
        assert oracle(Z) == ip.permanent(Z, field)

    def test_details(self):
        field = F101
        r = ip.permanent_w2a(np.eye(3, dtype=object), ip.RandomErrorOracle(field, 0, 1), field, 2,
                             repetitions=3, details=True)
        assert r.value == 1 and r.votes == {1: 3} and r.repetitions == 3


class TestNodes:
    def test_chebyshev_inside_interval_sorted(self):
        nodes = ip.chebyshev_nodes(9, 0, mpmath.mpf(1) / 30)
        assert all(0 < a < b < mpmath.mpf(1) / 30 for a, b in zip(nodes, nodes[1:]))

    def test_barycentric_reproduces_polynomials(self):
        with mpmath.workprec(300):
            nodes = ip.chebyshev_nodes(10, 0, 1)
            w = ip.barycentric_weights(nodes)
            f = lambda x: 3 * x ** 9 - x ** 4 + 2  # noqa: E731
            vals = [f(x) for x in nodes]
            for x in [mpmath.mpf("0.37"), mpmath.mpf(5), nodes[3]]:
                assert abs(ip.lagrange_eval(nodes, vals, w, x) - f(x)) < mpmath.mpf(10) ** -70

    def test_lebesgue_factor_at_node_and_outside(self):
        nodes = ip.uniform_nodes(5, 0, 1)
        w = ip.barycentric_weights(nodes)
        assert ip.lebesgue_factor(nodes, w, nodes[2]) == 1
        assert ip.lebesgue_factor(nodes, w, 3) > 100

    def test_chebyshev_beats_uniform_for_extrapolation(self):
        with mpmath.workprec(200):
            cheb = ip.chebyshev_nodes(20, 0, mpmath.mpf(1) / 10)
            unif = ip.uniform_nodes(20, 0, mpmath.mpf(1) / 10)
            lc = ip.lebesgue_factor(cheb, ip.barycentric_weights(cheb), 1)
            lu = ip.lebesgue_factor(unif, ip.barycentric_weights(unif), 1)
            assert lc < lu
            assert abs(float(mpmath.log(lc, 2)) - ip.log2_condition(20, 0.1, 1)) < 5

    def test_fit_residual_detects_degree(self):
        with mpmath.workprec(200):
            nodes = ip.chebyshev_nodes(12, 0, 1)
            vals = [x ** 8 for x in nodes]
            assert ip.fit_residual(nodes, vals, 8) < mpmath.mpf(10) ** -50
            assert ip.fit_residual(nodes, vals, 7) > mpmath.mpf(10) ** -6


def test_polynomial_division():
    f = ip.Polynomial([-1, 0, 1], F101)  # x^2 - 1
    g = ip.Polynomial([1, 1], F101)  # x + 1
    q, r = f.divmod(g)
    assert q.coeffs == [100, 1] and r.coeffs == [0]


def test_polynomial_degree_of_zero():
    assert ip.Polynomial([0, 0], F101).degree == -1


@pytest.mark.parametrize("k, d, e", [(10, 3, 3), (4, 3, 0), (60, 20, 19), (5, 5, 0)])
def test_max_errors(k, d, e):
    assert ip.max_errors(k, d) == e


def test_definition_sum_oracle_small():
    M = [[1, 2, 3], [4, 5, 6], [7, 8, 9]]
    expected = sum(M[0][s[0]] * M[1][s[1]] * M[2][s[2]] for s in itertools.permutations(range(3)))
    assert ip.permanent(M, ip.PrimeField(1009)) == expected % 1009 == 450
