"""Worst-to-average-case reduction for circuit output probabilities.

Every gate ``C_j`` of a worst-case circuit is scrambled by a Haar draw and
pulled back toward it: gate ``j`` of ``C'(theta)`` is
``C_j H_j T_K(-i h_j theta)``. Then ``q(theta) = p0(C'(theta))`` is a
polynomial of degree ``2 m K``. It is sampled on nodes near ``theta = 0``,
where ``C'(theta)`` looks like a random circuit, and extrapolated to
``theta = 1``, where the truncated gates approximately restore ``C``.

The extrapolation from ``[0, theta_max)`` to 1 amplifies data errors by the
Lebesgue factor of the nodes (about ``1e75`` for 37 Chebyshev nodes on
``[0, 1/30)``), which is why everything runs at ``precision_bits``.
"""

import math
from dataclasses import asdict, dataclass, field, replace

import mpmath
import numpy as np

from .circuit import Circuit, Gate, output_probability, to_mp
from .ensembles import (
    eigen_phases,
    eigen_phases_mp,
    evaluate_coefficients,
    haar_unitary,
    matrix_function_mp,
    perturbed_gate,
    principal_log,
    taylor_remainder_bound,
    truncated_coefficients,
    truncated_gate,
    unitary_to_mp,
)
from .errors import DecodeError, ValidationError
from .interpolation import (
    ComplexField,
    PolySamples,
    barycentric_weights,
    bw_decode,
    chebyshev_nodes,
    lagrange_eval,
    lebesgue_factor,
    uniform_nodes,
)
from .rng import as_rng, task_rng

NODE_SCHEMES = ("chebyshev", "uniform")


@dataclass(frozen=True)
class ReductionConfig:
    """Parameters of one reduction run.

    ``None`` fields take circuit-dependent defaults in :meth:`resolve`:
    ``theta_max = 1 / (10 m)``, ``num_points = 2 m K + 1 + 2 * corruption_budget``
    and ``residual_tol = 2**(-precision_bits / 4)``.
    """

    K: int = 6
    theta_max: float = None
    num_points: int = None
    precision_bits: int = 512
    node_scheme: str = "chebyshev"
    repetitions: int = 1
    corruption_budget: int = 0
    check_points: int = 2
    residual_tol: float = None

    def resolve(self, m):
        K = int(self.K)
        if K < 0:
            raise ValidationError("reduction: K must be nonnegative")
        degree = 2 * m * K
        theta_max = 1.0 / (10 * m) if self.theta_max is None else float(self.theta_max)
        if not 0.0 < theta_max < 1.0:
            raise ValidationError(f"reduction: theta_max={theta_max} must lie in (0, 1)")
        budget = int(self.corruption_budget)
        if budget < 0:
            raise ValidationError("reduction: corruption budget must be nonnegative")
        k = degree + 1 + 2 * budget if self.num_points is None else int(self.num_points)
        if k < degree + 1 + 2 * budget:
            raise ValidationError(
                f"reduction: {k} nodes cannot determine degree {degree} with {budget} corrupted values")
        if self.node_scheme not in NODE_SCHEMES:
            raise ValidationError(f"reduction: unknown node scheme {self.node_scheme!r}")
        if int(self.precision_bits) < 53:
            raise ValidationError("reduction: precision_bits must be at least 53")
        if int(self.repetitions) < 1:
            raise ValidationError("reduction: repetitions must be positive")
        tol = 2.0 ** (-int(self.precision_bits) / 4) if self.residual_tol is None else float(self.residual_tol)
        return replace(self, K=K, theta_max=theta_max, num_points=k, residual_tol=tol,
                       precision_bits=int(self.precision_bits), repetitions=int(self.repetitions),
                       corruption_budget=budget, check_points=int(self.check_points))


@dataclass
class ReductionReport:
    """Outcome of :func:`worst_to_average`.

    ``estimate`` is the median of the per-repetition extrapolations ``q~(1)``
    and ``exact_q1`` the median of the directly evaluated ``q(1)``.
    ``truncation_gap`` is ``|q(1) - p0(C)|`` (largest over repetitions):
    the part of ``|estimate - direct_p0|`` no amount of precision removes.
    ``interp_residual`` is the misfit at held-out check nodes and
    ``condition_factor`` the Lebesgue factor at ``theta = 1``; their product
    bounds ``|estimate - exact_q1|`` for noiseless data. The factor
    overflows a double beyond about 240 nodes, so logs are kept too.
    ``status`` is ``"ill-conditioned"`` when that bound exceeds
    ``residual_tol``: the data were not precise enough for the amplification.
    """

    estimate: float
    direct_p0: float
    truncation_gap: float
    interp_residual: float
    condition_factor: float
    log10_condition: float
    log10_extrapolation_bound: float
    exact_q1: float
    status: str
    repetitions: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def error(self):
        return abs(self.estimate - self.direct_p0)

    @property
    def extrapolation_error(self):
        return abs(self.estimate - self.exact_q1)

    def to_dict(self):
        out = asdict(self)
        out["error"] = self.error
        out["extrapolation_error"] = self.extrapolation_error
        return out


# -- the polynomial q ----------------------------------------------------------

@dataclass
class ScrambleDraws:
    """Haar draws lifted to ``precision`` bits with their Taylor coefficient matrices."""

    draws: list
    coefficients: list
    K: int
    precision: int


def prepare_draws(haar_draws, K, precision):
    """Lift each draw to ``precision`` bits and expand ``H T_K(-i h theta)`` in powers of theta."""
    lifted, coeffs = [], []
    with mpmath.workprec(int(precision)):
        for H in haar_draws:
            Hm = unitary_to_mp(H, precision) if np.asarray(H).dtype != object else H
            h = principal_log(Hm, precision)
            lifted.append(Hm)
            coeffs.append(truncated_coefficients(Hm, K, h))
    return ScrambleDraws(lifted, coeffs, int(K), int(precision))


def scrambled_circuit(C, prepared, theta):
    """``C'(theta)``: gate ``j`` is ``C_j H_j T_K(-i h_j theta)`` at the prepared precision."""
    if len(prepared.coefficients) != C.m:
        raise ValidationError(f"reduction: {len(prepared.coefficients)} draws for {C.m} gates")
    with mpmath.workprec(prepared.precision):
        t = mpmath.mpf(theta)
        gates = []
        for g, coeffs in zip(C.gates, prepared.coefficients):
            Cj = g.matrix if g.matrix.dtype == object else to_mp(g.matrix, prepared.precision)
            gates.append(Gate(g.targets, Cj @ evaluate_coefficients(coeffs, t), False))
    return Circuit(C.architecture, gates)


def evaluate_q(C, haar_draws, theta, K, precision=512):
    """``q(theta) = |<0^n| C'(theta) |0^n>|**2`` at ``precision`` bits.

    ``haar_draws`` is either a list of unitaries or a :class:`ScrambleDraws`
    prepared for the same ``K`` and precision. Returns an mpmath real.
    """
    prepared = haar_draws
    if not isinstance(prepared, ScrambleDraws):
        prepared = prepare_draws(haar_draws, K, precision)
    elif prepared.K != K:
        raise ValidationError(f"reduction: draws prepared for K={prepared.K}, not {K}")
    with mpmath.workprec(prepared.precision):
        return output_probability(scrambled_circuit(C, prepared, theta), 0, prepared.precision)


def truncation_gap(C, haar_draws, theta, K, precision=None):
    """``|p0(C . H^(1-theta)) - p0(C . H T_K(-i h theta))|`` on shared draws.

    Double precision by default; an integer ``precision`` evaluates both
    circuits through a high-precision eigendecomposition of each draw.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValidationError(f"reduction: theta={theta} outside [0, 1]")
    if len(haar_draws) != C.m:
        raise ValidationError(f"reduction: {len(haar_draws)} draws for {C.m} gates")
    if precision is None:
        g1 = [Gate(g.targets, g.matrix @ perturbed_gate(H, theta), True)
              for g, H in zip(C.gates, haar_draws)]
        g2 = [Gate(g.targets, g.matrix @ truncated_gate(H, theta, K), False)
              for g, H in zip(C.gates, haar_draws)]
        p1 = output_probability(Circuit(C.architecture, g1))
        p2 = output_probability(Circuit(C.architecture, g2))
        return float(abs(p1 - p2))
    prec = int(precision)
    with mpmath.workprec(prec):
        t = mpmath.mpf(theta)
        g1, g2 = [], []
        for g, H in zip(C.gates, haar_draws):
            Hm = unitary_to_mp(H, prec) if np.asarray(H).dtype != object else H
            eig = eigen_phases_mp(Hm, prec)
            Cj = to_mp(g.matrix, prec)
            pert = matrix_function_mp(eig, lambda p: mpmath.expj(p * (1 - t)), prec)
            trunc = matrix_function_mp(eig, lambda p: _taylor_exp(-1j * p * t, K), prec)
            g1.append(Gate(g.targets, Cj @ pert, False))
            g2.append(Gate(g.targets, Cj @ Hm @ trunc, False))
        p1 = output_probability(Circuit(C.architecture, g1), 0, prec)
        p2 = output_probability(Circuit(C.architecture, g2), 0, prec)
        return float(abs(p1 - p2))


def _taylor_exp(z, K):
    z = mpmath.mpc(z)
    total, term = mpmath.mpc(0), mpmath.mpc(1)
    for k in range(K + 1):
        total += term
        term = term * z / (k + 1)
    return total


def truncation_bound(haar_draws, theta, K):
    """Rigorous upper bound on :func:`truncation_gap`.

    With ``r_j`` the Taylor remainder bound for gate ``j`` (spectral norm of
    ``h_j`` is its largest eigenphase), the amplitude gap is at most
    ``delta = prod_j (1 + r_j) - 1`` and the probability gap at most
    ``delta (2 + delta)``.
    """
    log_growth = 0.0
    for H in haar_draws:
        _, phases = eigen_phases(np.asarray(H, dtype=np.complex128))
        norm = float(np.max(np.abs(phases)))
        log_growth += math.log1p(taylor_remainder_bound(norm, theta, K))
    delta = math.expm1(log_growth)
    return delta * (2.0 + delta)


# -- oracles --------------------------------------------------------------------

@dataclass
class SimulatedOracle:
    """Noiseless average-case oracle: exact ``p0`` of whatever circuit it is shown."""

    precision: int = 512
    calls: int = 0

    def __call__(self, circuit):
        self.calls += 1
        with mpmath.workprec(self.precision):
            return output_probability(circuit, 0, self.precision)


@dataclass
class CorruptingOracle:
    """Wraps an oracle and replaces a ``rate`` fraction of answers by garbage in ``[0, 1)``."""

    base: object
    rate: float
    seed: int
    corrupted: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValidationError(f"reduction: corruption rate {self.rate} outside [0, 1]")
        self._rng = as_rng(self.seed)

    def __call__(self, circuit):
        value = self.base(circuit)
        if self._rng.random() < self.rate:
            self.corrupted += 1
            return mpmath.mpf(float(self._rng.random()))
        return value


# -- the reduction ----------------------------------------------------------------

def _nodes(cfg):
    make = chebyshev_nodes if cfg.node_scheme == "chebyshev" else uniform_nodes
    return make(cfg.num_points, 0, cfg.theta_max)


def _check_nodes(nodes, count):
    """Midpoints between neighbouring nodes, spread evenly over the interval."""
    gaps = len(nodes) - 1
    if count <= 0 or gaps <= 0:
        return []
    picks = sorted({round(i * (gaps - 1) / max(count - 1, 1)) for i in range(count)})
    return [(nodes[i] + nodes[i + 1]) / 2 for i in picks]


def _one_repetition(C, cfg, oracle, rng):
    prec = cfg.precision_bits
    draws = [haar_unitary(2 ** len(g.targets), rng) for g in C.gates]
    prepared = prepare_draws(draws, cfg.K, prec)
    degree = 2 * C.m * cfg.K
    with mpmath.workprec(prec):
        nodes = _nodes(cfg)
        checks = _check_nodes(nodes, cfg.check_points)
        # the oracle sees circuits only; the node for each query stays here
        values = [mpmath.re(oracle(scrambled_circuit(C, prepared, t))) for t in nodes]
        check_values = [mpmath.re(oracle(scrambled_circuit(C, prepared, t))) for t in checks]
        if cfg.corruption_budget:
            field_ = ComplexField(prec)
            pts = [(mpmath.mpc(x), mpmath.mpc(v)) for x, v in zip(nodes, values)]
            poly = bw_decode(PolySamples(pts, degree, field_), errors=cfg.corruption_budget)
            fitted = lambda x: mpmath.re(poly(mpmath.mpc(x)))  # noqa: E731
        else:
            weights = barycentric_weights(nodes)
            fitted = lambda x: lagrange_eval(nodes, values, weights, x)  # noqa: E731
        estimate = fitted(1)
        # data carry at least one rounding error each, so the residual is floored there
        floor = mpmath.mpf(2) ** (-prec) * max((abs(v) for v in values), default=1)
        residual = max([abs(fitted(x) - y) for x, y in zip(checks, check_values)] + [floor])
        condition = lebesgue_factor(nodes, barycentric_weights(nodes), 1)
        q1 = evaluate_q(C, prepared, 1, cfg.K)
    return {
        "estimate": float(estimate),
        "exact_q1": float(q1),
        "interp_residual": float(residual),
        "log10_residual": float(mpmath.log10(residual)) if residual > 0 else -math.inf,
        "condition_factor": float(condition),
        "log10_condition": float(mpmath.log10(condition)),
    }


def worst_to_average(C, cfg=None, prob_oracle=None, seed=None):
    """Estimate ``p0(C)`` from average-case oracle answers.

    Parameters
    ----------
    C : Circuit
        Worst-case circuit.
    cfg : ReductionConfig, optional
    prob_oracle : callable, optional
        Maps a circuit to its (claimed) ``p0``. Defaults to a noiseless
        :class:`SimulatedOracle` at the configured precision.
    seed : int
        Master seed; repetition ``r`` draws its scramble from the stream
        ``(seed, "reduce", r)``.

    Returns
    -------
    ReductionReport
        ``status`` is ``"ill-conditioned"`` when residual times condition
        factor exceeds ``cfg.residual_tol``; the numbers are still reported.

    Raises
    ------
    DecodeError
        When Berlekamp-Welch finds no consistent polynomial.
    """
    if seed is None:
        raise ValidationError("reduction: a seed is required")
    cfg = (cfg or ReductionConfig()).resolve(C.m)
    oracle = prob_oracle if prob_oracle is not None else SimulatedOracle(cfg.precision_bits)
    reps = [_one_repetition(C, cfg, oracle, task_rng(seed, "reduce", r))
            for r in range(cfg.repetitions)]
    with mpmath.workprec(cfg.precision_bits):
        direct = float(output_probability(C, 0, cfg.precision_bits))
    estimate = float(np.median([r["estimate"] for r in reps]))
    exact_q1 = float(np.median([r["exact_q1"] for r in reps]))
    residual = max(r["interp_residual"] for r in reps)
    values = [estimate, direct, exact_q1]
    if not all(math.isfinite(v) for v in values):
        raise DecodeError("reduction: extrapolation produced a non-finite estimate")
    log10_bound = max(r["log10_residual"] + r["log10_condition"] for r in reps)
    status = "ok" if log10_bound <= math.log10(cfg.residual_tol) else "ill-conditioned"
    config = asdict(cfg)
    config["seed"] = int(seed)
    return ReductionReport(
        estimate=estimate,
        direct_p0=direct,
        truncation_gap=max(abs(r["exact_q1"] - direct) for r in reps),
        interp_residual=residual,
        condition_factor=max(r["condition_factor"] for r in reps),
        log10_condition=max(r["log10_condition"] for r in reps),
        log10_extrapolation_bound=log10_bound,
        exact_q1=exact_q1,
        status=status,
        repetitions=reps,
        config=config,
    )
