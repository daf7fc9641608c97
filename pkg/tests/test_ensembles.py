import math

import mpmath
import numpy as np
import pytest
import scipy.integrate
import scipy.linalg
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from rcslab import circuit as cc
from rcslab import ensembles as en
from rcslab.errors import ValidationError

from conftest import random_circuit


def max_abs(a):
    return float(np.max(np.abs(a)))


def unitarity(U):
    return max_abs(U.conj().T @ U - np.eye(U.shape[0]))


class TestHaar:
    @pytest.mark.parametrize("dim", [2, 4])
    def test_unitary(self, dim):
        for U in en.haar_unitaries(dim, 200, 1):
            assert unitarity(U) <= 1e-12

    def test_single_draw_matches_shape(self):
        assert en.haar_unitary(4, 3).shape == (4, 4)

    def test_rejects_other_dimensions(self):
        with pytest.raises(ValidationError):
            en.haar_unitary(3, 1)

    def test_first_moment(self):
        U = en.haar_unitaries(2, 100_000, 5)
        assert abs(np.mean(np.abs(U[:, 0, 0]) ** 2) - 0.5) <= 0.01

    def test_pair_density_is_normalized(self):
        x = np.linspace(0, 2 * np.pi, 20001)
        assert scipy.integrate.trapezoid(en.pair_phase_density(4, x), x) == pytest.approx(1.0, abs=1e-6)

    def test_eigenphase_pair_correlation(self):
        U = en.haar_unitaries(4, 100_000, 6)
        phases = np.angle(np.linalg.eigvals(U))
        i, j = np.triu_indices(4, 1)
        diffs = np.mod(phases[:, i] - phases[:, j], 2 * np.pi).ravel()
        edges = np.linspace(0, 2 * np.pi, 41)
        counts, _ = np.histogram(diffs, bins=edges)
        grid = np.linspace(edges[:-1], edges[1:], 51)
        expected = diffs.size * scipy.integrate.trapezoid(en.pair_phase_density(4, grid), grid, axis=0)
        chi2 = np.sum((counts - expected) ** 2 / expected)
        assert scipy.stats.chi2.sf(chi2, len(counts) - 1) > 0.001
        # level repulsion: near-degenerate pairs are strongly suppressed
        assert counts[0] < 0.1 * counts[20]

    def test_weyl_density_vanishes_on_degeneracy(self):
        assert en.weyl_density([0.3, 0.3, 1.0]) == 0
        assert en.weyl_density([0.0, 2.0, 4.0]) > 0

    def test_left_invariance(self):
        V = en.haar_unitary(2, 99)
        a = en.haar_unitaries(2, 10_000, 7)
        b = V @ en.haar_unitaries(2, 10_000, 8)
        stat = scipy.stats.ks_2samp(np.abs(a[:, 0, 1]) ** 2, np.abs(b[:, 0, 1]) ** 2)
        assert stat.pvalue > 0.01


class TestPrincipalLog:
    def test_identity(self):
        assert max_abs(en.principal_log(np.eye(2))) < 1e-15

    def test_branch_convention(self):
        h = en.principal_log(np.diag([1.0, -1.0]).astype(complex))
        assert np.allclose(h, np.diag([0, np.pi]), atol=1e-14)

    @pytest.mark.parametrize("seed", range(10))
    def test_roundtrip(self, seed):
        H = en.haar_unitary(4, seed)
        h = en.principal_log(H)
        assert max_abs(h - h.conj().T) == 0
        w = np.linalg.eigvalsh(h)
        assert w.min() > -1e-12 and w.max() < 2 * np.pi
        assert max_abs(scipy.linalg.expm(1j * h) - H) <= 1e-10

    def test_high_precision_matches(self):
        H = en.haar_unitary(4, 1)
        hm = en.principal_log(en.unitary_to_mp(H, 200), 200)
        assert max_abs(cc.to_complex(hm) - en.principal_log(H)) < 1e-13

    def test_non_unitary_rejected(self):
        with pytest.raises(ValidationError):
            en.principal_log(np.array([[1, 1], [0, 1]], dtype=complex))

    def test_mp_lift_is_unitary_to_working_precision(self):
        with mpmath.workprec(300):
            Hm = en.unitary_to_mp(en.haar_unitary(4, 2), 300)
            err = Hm.T.conj() @ Hm
            off = max(abs(err[i, j] - (1 if i == j else 0)) for i in range(4) for j in range(4))
            assert off < mpmath.mpf(2) ** -280


class TestPerturbed:
    def test_theta_zero_exact(self):
        H = en.haar_unitary(2, 3)
        assert np.array_equal(en.perturbed_gate(H, 0.0), H)

    def test_theta_one_identity(self):
        assert np.array_equal(en.perturbed_gate(en.haar_unitary(4, 3), 1.0), np.eye(4))

    @pytest.mark.parametrize("seed", range(5))
    def test_half_power(self, seed):
        H = en.haar_unitary(4, seed)
        G = en.perturbed_gate(H, 0.5)
        assert max_abs(G @ G - H) <= 1e-10

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31), st.floats(0.01, 0.99))
    def test_eigenphases_leave_a_gap(self, seed, theta):
        G = en.perturbed_gate(en.haar_unitary(4, seed), theta)
        phases = np.mod(np.angle(np.linalg.eigvals(G)), 2 * np.pi)
        # phases near 2*pi wrap to ~0 and are allowed
        bad = (phases >= 2 * np.pi * (1 - theta) + 1e-9) & (phases < 2 * np.pi - 1e-9)
        assert not bad.any()

    def test_theta_range(self):
        with pytest.raises(ValidationError):
            en.perturbed_gate(np.eye(2), 1.5)


class TestTruncated:
    def test_theta_zero_and_k_zero(self):
        H = en.haar_unitary(4, 4)
        assert np.array_equal(en.truncated_gate(H, 0.0, 5), H)
        assert np.array_equal(en.truncated_gate(H, 0.3, 0), H)

    def test_converges_within_taylor_bound(self):
        H = en.haar_unitary(4, 5)
        target = en.perturbed_gate(H, 0.1)
        errs = [max_abs(en.truncated_gate(H, 0.1, K) - target) for K in range(1, 9)]
        for K, e in zip(range(1, 9), errs):
            x = 2 * np.pi * 0.1
            assert e <= x ** (K + 1) / math.factorial(K + 1) * math.exp(x)
        assert all(a > b for a, b in zip(errs, errs[1:]))

    @pytest.mark.parametrize("theta", [0.0, 0.05, 0.4, 1.0])
    def test_coefficient_form_matches_direct(self, theta):
        H = en.haar_unitary(4, 6)
        coeffs = en.truncated_coefficients(H, 7)
        assert max_abs(en.evaluate_coefficients(coeffs, theta) - en.truncated_gate(H, theta, 7)) <= 1e-12

    def test_entries_are_degree_k_polynomials(self):
        H = en.haar_unitary(2, 7)
        K = 4
        thetas = np.linspace(0, 1, 9)
        vals = np.array([en.truncated_gate(H, t, K)[0, 1] for t in thetas])
        fit = np.polynomial.polynomial.polyfit(thetas, vals, K)
        assert max_abs(np.polynomial.polynomial.polyval(thetas, fit) - vals) < 1e-12

    def test_remainder_bound_monotone(self):
        b = [en.taylor_remainder_bound(2 * np.pi, 0.1, K) for K in range(12)]
        assert all(x > y for x, y in zip(b, b[1:]))


class TestCircuitEnsembles:
    def test_haar_circuit_gates_unitary(self):
        c = en.sample_circuit(cc.line(4, 4), en.EnsembleSpec("haar"), 1)
        for g in c.gates:
            g.check_unitary()

    def test_perturbed_theta_one_is_identity(self):
        c = en.sample_circuit(cc.line(3, 3), en.EnsembleSpec("perturbed", 1.0), 2)
        assert cc.output_probability(c) == pytest.approx(1.0, abs=1e-15)

    def test_truncated_flagged_non_unitary(self):
        c = en.sample_circuit(cc.line(3, 3), en.EnsembleSpec("truncated", 0.2, 3), 2)
        assert not c.unitary

    def test_ensemble_validation(self):
        for bad in [dict(kind="gaussian"), dict(theta=-0.1), dict(K=-1)]:
            with pytest.raises(ValidationError):
                en.EnsembleSpec(**bad)

    def test_batched_haar_is_seed_stable(self):
        a = en.sample_haar_circuit(cc.line(4, 4), 3)
        b = en.sample_haar_circuit(cc.line(4, 4), 3)
        assert all(np.array_equal(g.matrix, h.matrix) for g, h in zip(a.gates, b.gates))

    @pytest.mark.slow
    def test_small_perturbation_is_statistically_close(self):
        # pooled scaled probabilities over all outcomes of 200 circuits per ensemble
        arch = cc.line(8, 24)
        spec = en.EnsembleSpec("perturbed", 0.01)
        rng = np.random.default_rng(10)
        pert = np.concatenate([cc.full_distribution(en.sample_circuit(arch, spec, rng)).probs for _ in range(200)])
        haar = np.concatenate([cc.full_distribution(en.sample_haar_circuit(arch, rng)).probs for _ in range(200)])
        assert scipy.stats.ks_2samp(pert, haar).statistic <= 0.1


class TestJoint:
    def test_theta_zero_couples_exactly(self):
        C = random_circuit(2, 3, 1)
        js = en.scramble_joint(C, 0.0, 5, 2)
        for g1, g2, g, H in zip(js.c1.gates, js.c2.gates, C.gates, js.haar_draws):
            assert np.array_equal(g1.matrix, g2.matrix)
            assert np.array_equal(g1.matrix, g.matrix @ H)

    def test_flags(self):
        js = en.scramble_joint(random_circuit(2, 3, 1), 0.2, 3, 2)
        assert js.c1.unitary and not js.c2.unitary

    def test_probability_gap_tiny_for_small_theta(self):
        C = random_circuit(2, 3, 4)
        js = en.scramble_joint(C, 0.01, 10, 5)
        assert abs(cc.output_probability(js.c1) - cc.output_probability(js.c2)) <= 1e-12

    def test_identity_marginal_matches_perturbed_ensemble(self):
        arch = cc.Architecture(1, ((0,),))
        C = cc.identity_circuit(arch)
        rng = np.random.default_rng(8)
        joint = [en.scramble_joint(C, 0.3, 2, rng).c1.gates[0].matrix for _ in range(3000)]
        direct = [en.sample_circuit(arch, en.EnsembleSpec("perturbed", 0.3), rng).gates[0].matrix
                  for _ in range(3000)]

        def phases(ms):
            return np.sort(np.mod(np.angle(np.linalg.eigvals(np.array(ms))), 2 * np.pi), axis=1)[:, 1]

        assert scipy.stats.ks_2samp(phases(joint), phases(direct)).pvalue > 0.01

    def test_sidecar(self):
        js = en.scramble_joint(random_circuit(2, 2, 1), 0.2, 3, 2)
        side = js.sidecar()
        assert side["theta"] == 0.2 and side["K"] == 3 and len(side["haar_draws"]) == 2


class TestRecovery:
    @pytest.mark.parametrize("seed", range(5))
    def test_roundtrip(self, seed):
        C = random_circuit(3, 5, seed)
        js = en.scramble_joint(C, 0.3, 6, seed + 100)
        rec = en.recover_truncated(C, js.c1, 0.3, 6)
        for a, b in zip(rec.gates, js.c2.gates):
            assert max_abs(a.matrix - b.matrix) <= 1e-9
        assert not rec.unitary

    def test_identity_theta_zero(self):
        C = cc.identity_circuit(cc.line(2, 2))
        js = en.scramble_joint(C, 0.0, 4, 3)
        rec = en.recover_truncated(C, js.c1, 0.0, 4)
        for a, b in zip(rec.gates, js.c1.gates):
            assert max_abs(a.matrix - b.matrix) <= 1e-12

    def test_phase_wraparound(self):
        theta = 0.25
        Q = en.haar_unitary(2, 11)
        # Haar eigenphase just below 2*pi: the perturbed phase sits just below 2*pi*(1 - theta)
        H = Q @ np.diag(np.exp(1j * np.array([2 * np.pi - 1e-6 / (1 - theta), 1.0]))) @ Q.conj().T
        C = cc.identity_circuit(cc.Architecture(1, ((0,),)))
        c1 = cc.Circuit.from_matrices(C.architecture, [en.perturbed_gate(H, theta)])
        rec = en.recover_truncated(C, c1, theta, 8)
        assert max_abs(rec.gates[0].matrix - en.truncated_gate(H, theta, 8)) <= 1e-6

    def test_theta_one_rejected(self):
        C = random_circuit(2, 2, 1)
        with pytest.raises(ValidationError):
            en.recover_truncated(C, C, 1.0, 3)
