"""Architectures, circuits and exact desk-scale simulation.

Conventions
-----------
* Qubit ``q`` is bit ``q`` of a basis index (little-endian), so the bitstring
  printed for index ``x`` is ``format(x, "0{n}b")`` with qubit 0 rightmost.
* A gate on ``targets = (a, b)`` is a 4x4 row-major matrix whose local index
  is ``2 * bit(a) + bit(b)``, i.e. ``kron(A, B)`` acts ``A`` on ``a``.
* ``precision=None`` means complex128. An integer selects mpmath complex
  numbers with that many mantissa bits, stored in numpy object arrays.
"""

import json
import os
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import _kernels
from .errors import ResourceError, ValidationError
from .rng import as_rng

DEFAULT_MAX_QUBITS = 20
PATHSUM_GUARD = 30
DOUBLE_ROUNDOFF = 2.0 ** -53


def max_qubits():
    """Resource guard on statevector size; ``RCSLAB_MAX_QUBITS`` overrides it."""
    return int(os.environ.get("RCSLAB_MAX_QUBITS", DEFAULT_MAX_QUBITS))


def unit_roundoff(precision=None):
    return DOUBLE_ROUNDOFF if precision is None else 2.0 ** -int(precision)


# -- arbitrary precision helpers ------------------------------------------------

def to_mp(matrix, precision):
    """Convert a numeric array to an object array of ``mpc`` at ``precision`` bits."""
    arr = np.asarray(matrix)
    with mpmath.workprec(int(precision)):
        flat = [mpmath.mpc(complex(v)) if not isinstance(v, mpmath.mpc) else +v
                for v in arr.ravel()]
    out = np.empty(arr.shape, dtype=object)
    out.ravel()[:] = flat
    return out


def to_complex(matrix):
    arr = np.asarray(matrix)
    if arr.dtype == object:
        return np.array([complex(v) for v in arr.ravel()], dtype=np.complex128).reshape(arr.shape)
    return arr.astype(np.complex128)


def _abs2(amplitudes):
    if amplitudes.dtype == object:
        return np.array([v.real ** 2 + v.imag ** 2 for v in amplitudes], dtype=object)
    return amplitudes.real ** 2 + amplitudes.imag ** 2


def bits_to_index(y, n):
    """Accept an int index or a bitstring (qubit 0 rightmost)."""
    if isinstance(y, str):
        if len(y) != n or set(y) - {"0", "1"}:
            raise ValidationError(f"circuit: {y!r} is not an {n}-bit string")
        return int(y, 2)
    y = int(y)
    if not 0 <= y < 2 ** n:
        raise ValidationError(f"circuit: outcome {y} out of range for n={n}")
    return y


def index_to_bits(x, n):
    return format(int(x), f"0{n}b")


# -- domain types ---------------------------------------------------------------

@dataclass(frozen=True)
class Architecture:
    """Ordered gate slots over ``n_qubits`` qubits; each slot is a tuple of targets."""

    n_qubits: int
    gate_slots: tuple

    def __post_init__(self):
        slots = tuple(tuple(int(q) for q in s) for s in self.gate_slots)
        object.__setattr__(self, "gate_slots", slots)
        if self.n_qubits < 1:
            raise ValidationError("circuit: n_qubits must be positive")
        for s in slots:
            if len(s) not in (1, 2) or len(set(s)) != len(s):
                raise ValidationError(f"circuit: bad slot {s}")
            if any(not 0 <= q < self.n_qubits for q in s):
                raise ValidationError(f"circuit: slot {s} outside [0, {self.n_qubits})")

    @property
    def m(self):
        return len(self.gate_slots)


def line(n, depth):
    """Nearest-neighbour brickwork on a line: ``depth`` layers alternating even/odd pairs.

    Layers that would be empty (``n == 2`` odd layers) reuse the even pairs so
    every layer contributes gates.
    """
    if n < 2:
        raise ValidationError("circuit: line architecture needs n >= 2")
    slots = []
    for layer in range(depth):
        start = layer % 2 if n > 2 else 0
        slots.extend((i, i + 1) for i in range(start, n - 1, 2))
    return Architecture(n, tuple(slots))


def grid(rows, cols, depth):
    """Brickwork on a ``rows x cols`` grid cycling through four coupler patterns.

    Qubit ``(r, c)`` has index ``r * cols + c``.
    """
    n = rows * cols
    if n < 2:
        raise ValidationError("circuit: grid needs at least two qubits")
    patterns = []
    for parity in (0, 1):
        patterns.append([(r * cols + c, r * cols + c + 1)
                         for r in range(rows) for c in range(parity, cols - 1, 2)])
    for parity in (0, 1):
        patterns.append([(r * cols + c, (r + 1) * cols + c)
                         for r in range(parity, rows - 1, 2) for c in range(cols)])
    patterns = [p for p in patterns if p]
    slots = []
    for layer in range(depth):
        slots.extend(patterns[layer % len(patterns)])
    return Architecture(n, tuple(slots))


def random_architecture(n, m, seed, two_qubit_fraction=0.7):
    """``m`` slots, each a random nearest-neighbour pair or a random single qubit."""
    rng = as_rng(seed)
    slots = []
    for _ in range(m):
        if n >= 2 and rng.random() < two_qubit_fraction:
            i = int(rng.integers(n - 1))
            slots.append((i, i + 1) if rng.random() < 0.5 else (i + 1, i))
        else:
            slots.append((int(rng.integers(n)),))
    return Architecture(n, tuple(slots))


@dataclass
class Gate:
    targets: tuple
    matrix: np.ndarray
    unitary_flag: bool = True

    def __post_init__(self):
        self.targets = tuple(int(t) for t in self.targets)
        dim = 2 ** len(self.targets)
        if self.matrix.shape != (dim, dim):
            raise ValidationError(
                f"circuit: gate on {self.targets} needs a {dim}x{dim} matrix, got {self.matrix.shape}")

    def unitarity_error(self):
        g = to_complex(self.matrix)
        return float(np.max(np.abs(g.conj().T @ g - np.eye(g.shape[0]))))

    def check_unitary(self, precision=None):
        # object gates are checked after rounding to double; a d x d product
        # of unitaries accumulates O(d^2 u) in the max norm
        u = max(unit_roundoff(precision), DOUBLE_ROUNDOFF)
        dim = self.matrix.shape[0]
        if self.unitary_flag and self.unitarity_error() > 10 * u * dim * dim:
            raise ValidationError(f"circuit: gate on {self.targets} flagged unitary but is not")


@dataclass
class Circuit:
    architecture: Architecture
    gates: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.gates) != self.architecture.m:
            raise ValidationError(
                f"circuit: {len(self.gates)} gates for {self.architecture.m} slots")
        for slot, g in zip(self.architecture.gate_slots, self.gates):
            if tuple(g.targets) != tuple(slot):
                raise ValidationError(f"circuit: gate targets {g.targets} do not match slot {slot}")

    @property
    def n(self):
        return self.architecture.n_qubits

    @property
    def m(self):
        return self.architecture.m

    @property
    def unitary(self):
        return all(g.unitary_flag for g in self.gates)

    @classmethod
    def from_matrices(cls, architecture, matrices, unitary_flag=True):
        gates = [Gate(slot, np.asarray(mat), unitary_flag)
                 for slot, mat in zip(architecture.gate_slots, matrices)]
        return cls(architecture, gates)

    def matrices(self):
        return [g.matrix for g in self.gates]


def identity_circuit(architecture):
    return Circuit.from_matrices(
        architecture, [np.eye(2 ** len(s), dtype=np.complex128) for s in architecture.gate_slots])


@dataclass
class Statevector:
    amplitudes: np.ndarray

    @property
    def n(self):
        return int(self.amplitudes.shape[0]).bit_length() - 1

    def norm2(self):
        return sum(_abs2(self.amplitudes))

    def probabilities(self):
        return _abs2(self.amplitudes)


@dataclass
class OutputDistribution:
    probs: np.ndarray
    normalized_flag: bool = True

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        size = self.probs.shape[0]
        if self.probs.ndim != 1 or size & (size - 1):
            raise ValidationError("circuit: distribution length must be a power of two")
        if np.any(self.probs < 0):
            raise ValidationError("circuit: negative probability")
        if self.normalized_flag and abs(self.probs.sum() - 1.0) > 1e3 * DOUBLE_ROUNDOFF:
            raise ValidationError(f"circuit: distribution sums to {self.probs.sum()!r}, not 1")

    @property
    def n(self):
        return int(self.probs.shape[0]).bit_length() - 1

    @property
    def N(self):
        return int(self.probs.shape[0])

    @classmethod
    def uniform(cls, n):
        return cls(np.full(2 ** n, 1.0 / 2 ** n))

    @classmethod
    def point_mass(cls, n, x=0):
        p = np.zeros(2 ** n)
        p[x] = 1.0
        return cls(p)


@dataclass
class SampleSet:
    outcomes: np.ndarray
    seed: int
    n: int

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes, dtype=np.int64)
        if self.outcomes.size and (self.outcomes.min() < 0 or self.outcomes.max() >= 2 ** self.n):
            raise ValidationError(f"circuit: outcome outside {{0,1}}^{self.n}")

    def __len__(self):
        return int(self.outcomes.shape[0])

    def bitstrings(self):
        return [index_to_bits(x, self.n) for x in self.outcomes]


# -- simulation -----------------------------------------------------------------

def _check_size(n):
    limit = max_qubits()
    if n > limit:
        raise ResourceError(f"circuit: n={n} exceeds the statevector limit {limit} (RCSLAB_MAX_QUBITS)")


def _gate_matrix(gate, precision):
    if precision is None:
        return to_complex(gate.matrix) if gate.matrix.dtype == object else gate.matrix.astype(np.complex128, copy=False)
    return gate.matrix if gate.matrix.dtype == object else to_mp(gate.matrix, precision)


def simulate(circuit, input=0, precision=None):
    """Apply every gate in slot order to the basis state ``|input>``.

    Non-unitary gates are applied as given; the norm is not restored.
    """
    n = circuit.n
    _check_size(n)
    x = bits_to_index(input, n)
    if precision is None:
        psi = np.zeros(2 ** n, dtype=np.complex128)
        psi[x] = 1.0
    else:
        with mpmath.workprec(int(precision)):
            psi = np.array([mpmath.mpc(0)] * 2 ** n, dtype=object)
            psi[x] = mpmath.mpc(1)
    with mpmath.workprec(int(precision or 53)):
        for gate in circuit.gates:
            psi = _kernels.apply_gate(psi, _gate_matrix(gate, precision), gate.targets, n)
    return Statevector(psi)


def amplitude_pathsum(circuit, y0, ym):
    """``<ym|C|y0>`` as a sum over intermediate strings of products of gate elements."""
    n, m = circuit.n, circuit.m
    if n * max(m - 1, 0) > PATHSUM_GUARD:
        raise ResourceError(f"circuit: path sum over 2^{n * (m - 1)} strings exceeds 2^{PATHSUM_GUARD}")
    mats = [to_complex(g.matrix) for g in circuit.gates]
    return _kernels.pathsum_amplitude(
        mats, [g.targets for g in circuit.gates], n, bits_to_index(y0, n), bits_to_index(ym, n))


def output_probability(circuit, y=0, precision=None):
    """``|<y|C|0^n>|^2``; with ``y = 0`` this is the probability p0(C)."""
    amp = simulate(circuit, 0, precision).amplitudes[bits_to_index(y, circuit.n)]
    return amp.real ** 2 + amp.imag ** 2


def full_distribution(circuit):
    """Exact output distribution in double precision.

    Flagged normalized only when every gate is unitary.
    """
    probs = simulate(circuit).probabilities()
    unitary = circuit.unitary
    if unitary:
        probs = np.clip(probs, 0.0, None)
    return OutputDistribution(probs, normalized_flag=unitary)


def sample_outcomes(dist, k, seed):
    """Draw ``k`` i.i.d. outcomes; identical seeds give identical sample sets."""
    if not dist.normalized_flag:
        raise ValidationError("circuit: cannot sample from an unnormalized distribution")
    if k < 0:
        raise ValidationError("circuit: sample count must be nonnegative")
    rng = np.random.default_rng(seed)
    p = dist.probs / dist.probs.sum()
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    outcomes = np.searchsorted(cdf, rng.random(int(k)), side="right")
    return SampleSet(np.minimum(outcomes, dist.N - 1), int(seed) if not isinstance(seed, np.random.Generator) else -1, dist.n)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def hide(circuit, y):
    """Append a bit flip on every qubit where ``y`` has a 1.

    The result satisfies ``<z|C_y|0> = <z xor y|C|0>`` for all ``z``.
    """
    n = circuit.n
    y = bits_to_index(y, n)
    flips = [q for q in range(n) if (y >> q) & 1]
    slots = circuit.architecture.gate_slots + tuple((q,) for q in flips)
    exact = any(g.matrix.dtype == object for g in circuit.gates)
    x_gate = to_mp(PAULI_X, 53) if exact else PAULI_X
    gates = list(circuit.gates) + [Gate((q,), x_gate.copy(), True) for q in flips]
    return Circuit(Architecture(n, slots), gates)


# -- file formats ---------------------------------------------------------------

def _encode_matrix(matrix):
    return [[float(v.real), float(v.imag)] for v in to_complex(matrix).ravel()]


def _decode_matrix(data, dim):
    arr = np.asarray(data, dtype=np.float64).reshape(-1, 2)
    if arr.shape[0] != dim * dim:
        raise ValidationError(f"circuit: gate needs {dim * dim} entries, got {arr.shape[0]}")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(dim, dim)


def circuit_to_dict(circuit):
    out = {
        "n": circuit.n,
        "slots": [list(s) for s in circuit.architecture.gate_slots],
        "gates": [_encode_matrix(g.matrix) for g in circuit.gates],
    }
    if not circuit.unitary:
        out["unitary"] = [bool(g.unitary_flag) for g in circuit.gates]
    return out


def circuit_from_dict(data):
    try:
        n = int(data["n"])
        slots = [tuple(s) for s in data["slots"]]
        raw = data.get("gates")
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"circuit: malformed circuit description ({exc})") from None
    arch = Architecture(n, tuple(slots))
    if raw is None:
        return identity_circuit(arch)
    flags = data.get("unitary", [True] * len(slots))
    if len(raw) != len(slots) or len(flags) != len(slots):
        raise ValidationError("circuit: gate list length differs from slot list")
    gates = [Gate(s, _decode_matrix(g, 2 ** len(s)), bool(f)) for s, g, f in zip(slots, raw, flags)]
    circuit = Circuit(arch, gates)
    for g in circuit.gates:
        g.check_unitary()
    return circuit


def load_circuit(path):
    with open(path) as fh:
        return circuit_from_dict(json.load(fh))


def save_circuit(circuit, path):
    with open(path, "w") as fh:
        json.dump(circuit_to_dict(circuit), fh)


def distribution_to_dict(dist):
    return {"n": dist.n, "normalized": bool(dist.normalized_flag),
            "probs": [float(p) for p in dist.probs]}


def distribution_from_data(data):
    """Accept ``{"probs": [...]}`` objects, bare JSON arrays, or (index, value) rows."""
    if isinstance(data, dict):
        inner = data.get("distribution")
        if isinstance(inner, dict):
            data = inner
        probs = data.get("probs", inner if isinstance(inner, list) else None)
        if probs is None:
            raise ValidationError("circuit: no 'probs' field in distribution file")
        normalized = data.get("normalized", True)
    else:
        probs, normalized = data, True
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 2:
        out = np.zeros(int(probs[:, 0].max()) + 1)
        out[probs[:, 0].astype(int)] = probs[:, 1]
        probs = out
    return OutputDistribution(probs, normalized_flag=bool(normalized))


def read_distribution(text):
    """Parse a distribution from JSON or ``index,value`` CSV text."""
    text = text.strip()
    if text.startswith("{") or text.startswith("["):
        return distribution_from_data(json.loads(text))
    rows = []
    for line_ in text.splitlines():
        line_ = line_.strip()
        if not line_ or line_.startswith("#") or line_.startswith("index"):
            continue
        i, v = line_.split(",")[:2]
        rows.append((int(i), float(v)))
    return distribution_from_data(rows)


def write_samples(samples, fh, fmt="bits"):
    """Newline-delimited outcomes after an ``# n=<n>`` header line."""
    fh.write(f"# n={samples.n}\n")
    for x in samples.outcomes:
        fh.write((index_to_bits(x, samples.n) if fmt == "bits" else format(int(x), "x")) + "\n")


def read_samples(text, n=None, seed=-1):
    """Parse bitstrings, or hex integers with an ``# n=`` header (``0x`` prefix optional)."""
    outcomes = []
    for raw in text.splitlines():
        s = raw.strip()
        if not s:
            continue
        if s.startswith("#"):
            if "n=" in s:
                n = int(s.split("n=")[1].split()[0])
            continue
        if n is not None and len(s) == n and set(s) <= {"0", "1"}:
            outcomes.append(int(s, 2))
        else:
            outcomes.append(int(s, 16))
    if n is None:
        raise ValidationError("circuit: sample file needs an '# n=' header")
    return SampleSet(np.array(outcomes, dtype=np.int64), seed, n)
