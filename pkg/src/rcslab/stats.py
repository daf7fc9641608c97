"""Verification measures and the constructions that fool them.

All logarithms are natural. ``N = 2**n`` throughout. For a random circuit
the ideal probabilities ``p`` follow Porter-Thomas: ``N p`` is close to
``Exp(1)``, which fixes the baselines used here (``CE(U, p) ~ log N + gamma``,
heavy-output threshold ``ln 2 / N``).
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.stats

from .circuit import OutputDistribution, full_distribution, output_probability
from .ensembles import EnsembleSpec, sample_circuit, sample_haar_circuit
from .errors import ResourceError, ValidationError
from .rng import as_rng, map_tasks, task_rng

EULER_GAMMA = float(np.euler_gamma)
HOG_THRESHOLD = math.log(2)
IMPOSTER_MAX_BITS = 24
MIDDLE_MASS = (0.0005, 0.9995)


@dataclass
class MeasureReport:
    """CE/CED/TV/HOG of a device distribution (or sample set) against an ideal one.

    ``sample_count`` is 0 when computed from exact distributions. From
    samples, ``ce`` is the plug-in mean of ``log(1/ideal)``, ``ced`` uses
    the analytic baseline ``log N + gamma`` and ``tv`` compares the empirical
    histogram with ``ideal`` (biased upward when samples are few).
    """

    ce: float
    ced: float
    tv: float
    hog: float
    sample_count: int = 0

    def to_dict(self):
        return asdict(self)


def _check_same_size(D, Dref):
    if D.N != Dref.N:
        raise ValidationError(f"stats: distributions over {D.N} and {Dref.N} outcomes")


def _neg_log(p):
    with np.errstate(divide="ignore"):
        return -np.log(p)


def cross_entropy(D, Dref):
    """``sum_x D(x) log(1/Dref(x))``; ``inf`` if ``Dref`` vanishes where ``D`` does not."""
    _check_same_size(D, Dref)
    support = D.probs > 0
    if np.any(Dref.probs[support] == 0):
        return math.inf
    return float(np.dot(D.probs[support], _neg_log(Dref.probs[support])))


def uniform_cross_entropy(Dref):
    """``CE(U, Dref)``: the mean of ``log(1/Dref)``."""
    if np.any(Dref.probs == 0):
        return math.inf
    return float(np.mean(_neg_log(Dref.probs)))


def ced(D, Dref):
    """Cross-entropy difference ``CE(U, Dref) - CE(D, Dref)``.

    Infinite cross entropies propagate; ``nan`` when both sides are infinite.
    """
    a, b = uniform_cross_entropy(Dref), cross_entropy(D, Dref)
    if math.isinf(a) and math.isinf(b):
        return math.nan
    return a - b


def ced_direct(D, Dref):
    """The same difference as one sum, ``sum_x (1/N - D(x)) log(1/Dref(x))``."""
    _check_same_size(D, Dref)
    if np.any(Dref.probs == 0):
        return math.nan
    return float(np.dot(1.0 / D.N - D.probs, _neg_log(Dref.probs)))


def total_variation(D, Dref):
    _check_same_size(D, Dref)
    return float(0.5 * np.abs(D.probs - Dref.probs).sum())


def entropy(D):
    p = D.probs[D.probs > 0]
    return float(-np.dot(p, np.log(p)))


def kl_divergence(D, Dref):
    """``CE(D, Dref) - H(D)``."""
    return cross_entropy(D, Dref) - entropy(D)


def heavy_outputs(ideal):
    """Boolean mask of outcomes with ``ideal(x) >= ln 2 / N``."""
    return ideal.probs >= HOG_THRESHOLD / ideal.N


def hog_score(D, ideal):
    """Mass ``D`` puts on the heavy outputs of ``ideal``."""
    _check_same_size(D, ideal)
    return float(D.probs[heavy_outputs(ideal)].sum())


def divergences(D, Dref):
    """Exact :class:`MeasureReport` of ``D`` against ``Dref``."""
    return MeasureReport(
        ce=cross_entropy(D, Dref),
        ced=ced(D, Dref),
        tv=total_variation(D, Dref),
        hog=hog_score(D, Dref),
    )


# -- sample-based estimators ------------------------------------------------------

def _check_samples(samples, ideal):
    if len(samples) == 0:
        raise ValidationError("stats: no samples")
    if samples.n != ideal.n:
        raise ValidationError(f"stats: samples over {samples.n} qubits, ideal over {ideal.n}")


def empirical_ced(samples, ideal):
    """``(log N + gamma) - mean_i log(1/ideal(x_i))``.

    ``inf`` in magnitude when an observed outcome has ideal probability 0.
    """
    _check_samples(samples, ideal)
    p = ideal.probs[samples.outcomes]
    if np.any(p == 0):
        return -math.inf
    return float(math.log(ideal.N) + EULER_GAMMA - np.mean(_neg_log(p)))


def empirical_hog(samples, ideal):
    """Fraction of samples that are heavy outputs of ``ideal``."""
    _check_samples(samples, ideal)
    return float(np.mean(heavy_outputs(ideal)[samples.outcomes]))


def empirical_distribution(samples):
    counts = np.bincount(samples.outcomes, minlength=2 ** samples.n)
    return OutputDistribution(counts / counts.sum())


def measure_samples(samples, ideal):
    """:class:`MeasureReport` from a sample set."""
    _check_samples(samples, ideal)
    p = ideal.probs[samples.outcomes]
    ce = math.inf if np.any(p == 0) else float(np.mean(_neg_log(p)))
    return MeasureReport(
        ce=ce,
        ced=empirical_ced(samples, ideal),
        tv=total_variation(empirical_distribution(samples), ideal),
        hog=empirical_hog(samples, ideal),
        sample_count=len(samples),
    )


# -- Porter-Thomas shape ----------------------------------------------------------

@dataclass
class ShapeHistogram:
    """Histogram of the scaled probabilities ``q = N p`` against ``Exp(1)``.

    ``pt_reference[i]`` is the expected count in bin ``i`` when the ``N``
    values of ``q`` are drawn from the Porter-Thomas density ``e^{-q}``.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    pt_reference: np.ndarray
    ks: float
    p_value: float
    ks_threshold: float

    @property
    def accepted(self):
        return self.ks <= self.ks_threshold

    def to_dict(self):
        edges = [float(e) if math.isfinite(e) else "inf" for e in self.bin_edges]
        return {
            "bin_edges": edges,
            "counts": [int(c) for c in self.counts],
            "pt_reference": [float(r) for r in self.pt_reference],
            "ks": self.ks,
            "p_value": self.p_value,
            "ks_threshold": self.ks_threshold,
            "accepted": bool(self.accepted),
        }


def ks_porter_thomas(q):
    """Kolmogorov-Smirnov distance of the values ``q`` from ``1 - e^{-q}``, with its p-value."""
    q = np.asarray(q, dtype=float).ravel()
    if q.size == 0:
        raise ValidationError("stats: no values for the shape test")
    res = scipy.stats.kstest(q, "expon")
    return float(res.statistic), float(res.pvalue)


def shape_histogram(D, bins=None, ks_threshold=0.02):
    """Histogram of ``N D(x)`` with Porter-Thomas expected counts and a KS fit.

    ``bins`` is an edge array or a bin count over ``[0, 8)``; a final
    ``[last, inf)`` bin is always added so counts sum to ``N``.
    """
    if not D.normalized_flag:
        raise ValidationError("stats: shape needs a normalized distribution")
    q = D.probs * D.N
    if bins is None:
        bins = 32
    edges = np.linspace(0.0, 8.0, int(bins) + 1) if np.ndim(bins) == 0 else np.asarray(bins, dtype=float)
    if np.isfinite(edges[-1]):
        edges = np.append(edges, np.inf)
    counts, _ = np.histogram(q, bins=edges)
    cdf = -np.expm1(-edges)
    reference = D.N * np.diff(cdf)
    ks, p_value = ks_porter_thomas(q)
    return ShapeHistogram(edges, counts, reference, ks, p_value, float(ks_threshold))


def _scaled_probs_task(args):
    arch, seed, i = args
    dist = full_distribution(sample_haar_circuit(arch, task_rng(seed, "pt", i)))
    return dist.probs * dist.N


def porter_thomas_values(arch, trials, seed, jobs=1):
    """Pooled ``N p(x)`` over all outcomes of ``trials`` Haar circuits."""
    parts = map_tasks(_scaled_probs_task, [(arch, seed, i) for i in range(trials)], jobs)
    return np.concatenate(parts)


# -- counterexamples ---------------------------------------------------------------

def middle_region(ideal):
    """Positions (in ascending-probability order) of the middle 99.9% of mass.

    Returns ``(order, lo, hi)``: ``order`` sorts outcomes by probability with
    ties broken by index, and ``order[lo:hi]`` is the region between the
    0.05% and 99.95% cumulative-mass quantiles.
    """
    order = np.argsort(ideal.probs, kind="stable")
    cum = np.cumsum(ideal.probs[order])
    lo = int(np.searchsorted(cum, MIDDLE_MASS[0], side="right"))
    hi = int(np.searchsorted(cum, MIDDLE_MASS[1], side="left")) + 1
    return order, lo, min(hi, ideal.N)


def rescaled_counterexample(ideal, k):
    """Distribution with ideal-like CED but TV distance near ``1 - 1/k``.

    Outcomes in the middle region, sorted by ideal probability, are grouped
    into consecutive blocks of ``k``; each block's whole mass moves to its
    first (least likely) element. A short final block is one bucket. Outside
    the region the ideal values are kept.
    """
    k = int(k)
    if k < 1:
        raise ValidationError("stats: block size k must be positive")
    order, lo, hi = middle_region(ideal)
    region = order[lo:hi]
    if k > region.size:
        raise ValidationError(f"stats: k={k} exceeds the middle region of {region.size} outcomes")
    out = ideal.probs.copy()
    if k == 1:
        return OutputDistribution(out, ideal.normalized_flag)
    starts = np.arange(0, region.size, k)
    block_mass = np.add.reduceat(ideal.probs[region], starts)
    out[region] = 0.0
    out[region[starts]] = block_mass
    # reduceat reassociates the sums; renormalize the last few ulps away
    return OutputDistribution(out / out.sum(), ideal.normalized_flag)


def depolarize(ideal, alpha):
    """``alpha ideal + (1 - alpha) U``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"stats: alpha={alpha} outside [0, 1]")
    return OutputDistribution(alpha * ideal.probs + (1.0 - alpha) / ideal.N, ideal.normalized_flag)


def imposter_counts(n, m, seed):
    """Balls-in-bins counts of the classical imposter.

    A uniform permutation of ``{0,1}^(n+m)`` is applied to every input whose
    system part (the low ``n`` bits) is ``0^n``; count how many of the ``2^m``
    images land on each system value.
    """
    if n < 1 or m < 0:
        raise ValidationError("stats: imposter needs n >= 1 and m >= 0")
    if n + m > IMPOSTER_MAX_BITS:
        raise ResourceError(f"stats: permutation over 2^{n + m} elements exceeds 2^{IMPOSTER_MAX_BITS}")
    rng = as_rng(seed)
    sigma = rng.permutation(2 ** (n + m))
    images = sigma[np.arange(2 ** m, dtype=np.int64) << n]
    return np.bincount(images & (2 ** n - 1), minlength=2 ** n)


def poisson_imposter(n, m, seed):
    """Output distribution of the imposter: counts over ``2^m`` (exact dyadic rationals)."""
    return OutputDistribution(imposter_counts(n, m, seed) / 2.0 ** m)


def poisson_fit(counts, kmax=6):
    """Chi-square test of bin counts against Poisson(1).

    Categories are ``0, 1, ..., kmax - 1`` and ``>= kmax``. Returns
    ``(statistic, p_value, observed, expected)``.
    """
    counts = np.asarray(counts)
    observed = np.array([np.sum(counts == k) for k in range(kmax)] + [np.sum(counts >= kmax)])
    pmf = scipy.stats.poisson.pmf(np.arange(kmax), 1.0)
    expected = counts.size * np.append(pmf, 1.0 - pmf.sum())
    stat, p_value = scipy.stats.chisquare(observed, expected)
    return float(stat), float(p_value), observed, expected


# -- anti-concentration --------------------------------------------------------------

def _p0_task(args):
    arch, ensemble, seed, i = args
    rng = task_rng(seed, "anticonc", i)
    if ensemble.kind == "haar":
        circuit = sample_haar_circuit(arch, rng)
    else:
        circuit = sample_circuit(arch, ensemble, rng)
    return float(output_probability(circuit))


def p0_samples(arch, ensemble, trials, seed, jobs=1):
    """``p0(C)`` for ``trials`` circuits drawn from ``ensemble`` on ``arch``."""
    ensemble = ensemble or EnsembleSpec()
    return np.array(map_tasks(_p0_task, [(arch, ensemble, seed, i) for i in range(trials)], jobs))


def anticoncentration_estimate(arch, ensemble, trials, kappa, seed, jobs=1):
    """Fraction of sampled circuits with ``p0(C) >= 1 / (kappa 2^n)``."""
    if trials < 1:
        raise ValidationError("stats: trials must be positive")
    if not kappa > 0:
        raise ValidationError("stats: kappa must be positive")
    threshold = 0.0 if math.isinf(kappa) else 1.0 / (kappa * 2 ** arch.n_qubits)
    values = p0_samples(arch, ensemble, trials, seed, jobs)
    return float(np.mean(values >= threshold))


def porter_thomas_tail(c):
    """``Pr[N p >= c] = e^{-c}`` under Porter-Thomas."""
    return math.exp(-c)
