"""Haar, perturbed and truncated gate ensembles.

A perturbed gate pulls a Haar draw ``H`` back toward the identity,
``H exp(-i h theta)`` with ``h = -i log H``; equivalently ``H**(1 - theta)``
in the eigenbasis of ``H``. The truncated variant replaces the exponential by
its degree-``K`` Taylor polynomial, so every entry is a polynomial in
``theta``.

Eigenphases of ``log`` are taken in ``[0, 2*pi)``. Everything here is a
function of ``H`` alone, so the choice of eigenbasis for degenerate
eigenvalues does not matter.
"""

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
import scipy.linalg

from .circuit import Circuit, Gate, to_mp
from .errors import ValidationError
from .rng import as_rng

TWO_PI = 2 * np.pi
KINDS = ("haar", "perturbed", "truncated")


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str = "haar"
    theta: float = 0.0
    K: int = 0

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValidationError(f"ensembles: unknown ensemble {self.kind!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValidationError(f"ensembles: theta={self.theta} outside [0, 1]")
        if self.K < 0:
            raise ValidationError("ensembles: K must be nonnegative")


def haar_unitary(dim, seed):
    """Haar-random ``dim x dim`` unitary.

    QR of a complex Ginibre matrix with the phases of ``diag(R)`` moved into
    ``Q`` so the result does not depend on the QR sign convention.
    """
    if dim not in (2, 4):
        raise ValidationError(f"ensembles: Haar gates are 2x2 or 4x4, got {dim}")
    rng = as_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_unitaries(dim, count, seed):
    """``count`` independent Haar draws as a ``(count, dim, dim)`` array."""
    rng = as_rng(seed)
    z = (rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def _check_unitary(H, tol=1e-8):
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError("ensembles: expected a square matrix")
    err = np.max(np.abs(H.conj().T @ H - np.eye(H.shape[0])))
    if err > tol:
        raise ValidationError(f"ensembles: matrix is not unitary (error {err:.2e})")


def eigen_phases(H):
    """Unitary eigenbasis ``Z`` and eigenphases in ``[0, 2*pi)`` of a unitary ``H``."""
    _check_unitary(H)
    # complex Schur form of a normal matrix is diagonal with unitary Z
    T, Z = scipy.linalg.schur(np.asarray(H, dtype=np.complex128), output="complex")
    phases = np.mod(np.angle(np.diagonal(T)), TWO_PI)
    phases[phases >= TWO_PI] = 0.0
    return Z, phases


def _from_eigen(Z, values):
    return (Z * values) @ Z.conj().T


def principal_log(H, precision=None):
    """Hermitian ``h`` with eigenvalues in ``[0, 2*pi)`` and ``exp(i h) = H``."""
    if precision is not None:
        return _principal_log_mp(H, precision)
    Z, phases = eigen_phases(H)
    h = _from_eigen(Z, phases)
    return (h + h.conj().T) / 2


def perturbed_gate(H, theta):
    """``H exp(-i h theta)``, i.e. ``H`` with its eigenphases scaled by ``1 - theta``."""
    if not 0.0 <= theta <= 1.0:
        raise ValidationError(f"ensembles: theta={theta} outside [0, 1]")
    H = np.asarray(H, dtype=np.complex128)
    if theta == 0:
        _check_unitary(H)
        return H.copy()
    if theta == 1:
        _check_unitary(H)
        return np.eye(H.shape[0], dtype=np.complex128)
    Z, phases = eigen_phases(H)
    return _from_eigen(Z, np.exp(1j * phases * (1.0 - theta)))


def truncated_coefficients(H, K, h=None):
    """Matrices ``A_k = H (-i h)^k / k!`` for ``k = 0..K``.

    ``truncated_gate(H, theta, K) = sum_k A_k theta**k``. Works on complex128
    arrays or, when ``H`` is an object array, in the current mpmath precision.
    """
    exact = np.asarray(H).dtype == object
    if h is None:
        h = principal_log(H)
    step = -1j * h if not exact else h * mpmath.mpc(0, -1)
    coeffs = [H.copy()]
    power = H
    for k in range(1, K + 1):
        power = (power @ step) * (1 / mpmath.mpf(k) if exact else 1.0 / k)
        coeffs.append(power)
    return coeffs


def evaluate_coefficients(coeffs, theta):
    """Horner evaluation of ``sum_k coeffs[k] * theta**k``."""
    out = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        out = out * theta + c
    return out


def truncated_gate(H, theta, K, h=None):
    """``H sum_{k<=K} (-i h theta)^k / k!`` (not unitary in general)."""
    if not 0.0 <= theta <= 1.0:
        raise ValidationError(f"ensembles: theta={theta} outside [0, 1]")
    if K < 0:
        raise ValidationError("ensembles: K must be nonnegative")
    H = np.asarray(H, dtype=np.complex128)
    if theta == 0 or K == 0:
        _check_unitary(H)
        return H.copy()
    if h is None:
        Z, phases = eigen_phases(H)
        # the truncated exponential is a function of h, so apply it on the eigenvalues
        x = -1j * phases * theta
        series = np.zeros_like(x)
        term = np.ones_like(x)
        for k in range(K + 1):
            series = series + term
            term = term * x / (k + 1)
        return H @ _from_eigen(Z, series)
    return evaluate_coefficients(truncated_coefficients(H, K, h), theta)


def taylor_remainder_bound(norm_h, theta, K):
    """Bound on ``||exp(-i h theta) - T_K(-i h theta)||`` given ``||h|| <= norm_h``."""
    x = norm_h * theta
    return x ** (K + 1) / math.factorial(K + 1) * math.exp(x)


# -- arbitrary precision ----------------------------------------------------------

def unitary_to_mp(H, precision):
    """Lift a double-precision unitary to ``precision`` bits and re-orthonormalize.

    The QR step makes the lifted matrix unitary to working precision; it moves
    entries by about the double-precision unitarity error.
    """
    with mpmath.workprec(int(precision)):
        A = mpmath.matrix(to_mp(H, precision).tolist())
        Q, R = mpmath.qr(A)
        n = A.rows
        for j in range(n):
            d = R[j, j]
            phase = d / abs(d)
            for i in range(n):
                Q[i, j] = Q[i, j] * phase
        return _to_object(Q)


def _as_mp_matrix(H, precision):
    arr = np.asarray(H)
    if arr.dtype != object:
        arr = to_mp(arr, precision)
    return mpmath.matrix(arr.tolist())


def _to_object(M):
    out = np.empty((M.rows, M.cols), dtype=object)
    for i in range(M.rows):
        for j in range(M.cols):
            out[i, j] = M[i, j]
    return out


def eigen_phases_mp(H, precision):
    """``(V, V^-1, phases)`` of a unitary at ``precision`` bits, phases in ``[0, 2*pi)``.

    ``V`` need not be unitary; every use goes through ``V f(phases) V^-1``.
    """
    with mpmath.workprec(int(precision)):
        A = _as_mp_matrix(H, precision)
        E, V = mpmath.eig(A)
        two_pi = 2 * mpmath.pi
        phases = []
        for lam in E:
            phi = mpmath.arg(lam)
            if phi < 0:
                phi += two_pi
            phases.append(phi)
        return V, mpmath.inverse(V), phases


def matrix_function_mp(eig, fn, precision):
    """``V diag(fn(phase)) V^-1`` as an object array."""
    V, Vinv, phases = eig
    with mpmath.workprec(int(precision)):
        return _to_object(V * mpmath.diag([fn(p) for p in phases]) * Vinv)


def _principal_log_mp(H, precision):
    h = matrix_function_mp(eigen_phases_mp(H, precision), lambda p: p, precision)
    with mpmath.workprec(int(precision)):
        return (h + np.vectorize(mpmath.conj, otypes=[object])(h).T) / 2


# -- circuit ensembles ------------------------------------------------------------

def _draw_gate(slot, spec, rng):
    H = haar_unitary(2 ** len(slot), rng)
    if spec.kind == "haar":
        return Gate(slot, H, True)
    if spec.kind == "perturbed":
        return Gate(slot, perturbed_gate(H, spec.theta), True)
    return Gate(slot, truncated_gate(H, spec.theta, spec.K), False)


def sample_circuit(arch, spec, seed):
    """Draw every slot's gate independently from the ensemble."""
    rng = as_rng(seed)
    return Circuit(arch, [_draw_gate(slot, spec, rng) for slot in arch.gate_slots])


def sample_haar_circuit(arch, seed):
    """Fast path for the Haar ensemble: one batched QR per gate size."""
    rng = as_rng(seed)
    sizes = [2 ** len(s) for s in arch.gate_slots]
    out = [None] * len(sizes)
    for dim in (2, 4):
        idx = [i for i, d in enumerate(sizes) if d == dim]
        if idx:
            mats = haar_unitaries(dim, len(idx), rng)
            for i, mat in zip(idx, mats):
                out[i] = mat
    return Circuit.from_matrices(arch, out)


@dataclass
class JointCircuitSample:
    """Coupled pair built from one set of Haar draws.

    ``c1`` uses the perturbed gates ``C_j H_j^(1-theta)``; ``c2`` the truncated
    gates ``C_j H_j T_K(-i h_j theta)``.
    """

    haar_draws: list
    c1: Circuit
    c2: Circuit
    theta: float
    K: int
    extra: dict = field(default_factory=dict)

    def sidecar(self):
        return {
            "theta": self.theta,
            "K": self.K,
            "haar_draws": [[[float(v.real), float(v.imag)] for v in np.asarray(H).ravel()]
                           for H in self.haar_draws],
        }


def _gatewise(C, mats, unitary):
    return Circuit(C.architecture,
                   [Gate(g.targets, g.matrix @ mat, unitary) for g, mat in zip(C.gates, mats)])


def scramble_joint(C, theta, K, seed):
    rng = as_rng(seed)
    draws = [haar_unitary(2 ** len(g.targets), rng) for g in C.gates]
    c1 = _gatewise(C, [perturbed_gate(H, theta) for H in draws], True)
    c2 = _gatewise(C, [truncated_gate(H, theta, K) for H in draws], False)
    return JointCircuitSample(draws, c1, c2, theta, K)


def recover_haar_draw(G, theta):
    """Invert ``G = H^(1-theta)``: stretch eigenphases by ``1 / (1 - theta)``."""
    if theta >= 1:
        raise ValidationError("ensembles: theta = 1 erases the Haar draw; it cannot be recovered")
    Z, phases = eigen_phases(G)
    return _from_eigen(Z, np.exp(1j * phases / (1.0 - theta))), _from_eigen(Z, phases / (1.0 - theta))


def recover_truncated(C, c1, theta, K):
    """Rebuild the truncated partner of ``c1`` from ``C`` alone.

    Per gate: ``C_j^dagger c1_j = H_j^(1-theta)``; stretch its eigenphases to
    recover ``H_j`` (and its logarithm), then emit ``C_j H_j T_K(-i h_j theta)``.
    """
    if theta >= 1:
        raise ValidationError("ensembles: theta = 1 erases the Haar draw; it cannot be recovered")
    if C.architecture != c1.architecture:
        raise ValidationError("ensembles: circuits are over different architectures")
    gates = []
    for cg, g1 in zip(C.gates, c1.gates):
        G = cg.matrix.conj().T @ g1.matrix
        H, h = recover_haar_draw(G, theta)
        gates.append(Gate(cg.targets, cg.matrix @ truncated_gate(H, theta, K, h=h), False))
    return Circuit(C.architecture, gates)


def pair_phase_density(dim, x):
    """Density of the difference of two distinct Haar eigenphases (mod ``2*pi``).

    From the CUE two-point function: proportional to
    ``dim**2 - sin(dim x / 2)**2 / sin(x / 2)**2``.
    """
    x = np.asarray(x, dtype=float)
    s = np.sin(x / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(s) < 1e-12, dim ** 2, (np.sin(dim * x / 2) / s) ** 2)
    return (dim ** 2 - ratio) / (TWO_PI * dim * (dim - 1))


def weyl_density(phases):
    """Unnormalized joint eigenphase density ``prod_{i != j} |e^{i a} - e^{i b}|^2``."""
    z = np.exp(1j * np.asarray(phases))
    diff = np.abs(z[:, None] - z[None, :]) ** 2
    np.fill_diagonal(diff, 1.0)
    return float(np.prod(diff))
