"""Command-line experiment runner.

Every stochastic subcommand needs ``--seed``; per-task streams are derived
from it by hashing ``(seed, label, index)``, so reports do not depend on
``--jobs``. Reports are JSON with sorted keys and the full configuration
echoed under ``"config"``. Exit codes: 2 invalid input, 3 resource guard,
4 decoding or conditioning failure.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .circuit import (
    OutputDistribution,
    circuit_to_dict,
    distribution_to_dict,
    full_distribution,
    grid,
    line,
    load_circuit,
    random_architecture,
    read_distribution,
    read_samples,
    sample_outcomes,
    simulate,
    write_samples,
)
from .ensembles import EnsembleSpec, sample_circuit, sample_haar_circuit
from .errors import DecodeError, RCSLabError, ValidationError
from .interpolation import PrimeField, RandomErrorOracle, permanent, permanent_w2a, random_matrix
from .reduction import CorruptingOracle, ReductionConfig, SimulatedOracle, worst_to_average
from .rng import task_rng
from .stats import (
    anticoncentration_estimate,
    ced,
    divergences,
    imposter_counts,
    measure_samples,
    poisson_fit,
    rescaled_counterexample,
    shape_histogram,
    total_variation,
)


def _clean(value):
    """Make a payload JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def _config(args):
    skip = {"func", "output", "format", "jobs", "input"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write(text, args):
    if args.output and args.output != "-":
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit(args, payload, columns=None):
    """Write ``payload`` as JSON, or ``columns`` (name -> list) as CSV."""
    payload = dict(payload)
    payload["config"] = _config(args)
    if args.format == "csv":
        if columns is None:
            columns = {"key": [], "value": []}
            for k, v in sorted(_flatten(payload).items()):
                columns["key"].append(k)
                columns["value"].append(v)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = list(columns)
        writer.writerow(names)
        writer.writerows(zip(*(_clean(columns[n]) for n in names)))
        _write(buf.getvalue(), args)
    else:
        _write(json.dumps(_clean(payload), sort_keys=True, indent=2) + "\n", args)


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif not isinstance(v, (list, tuple, np.ndarray)):
            out[key] = v
    return out


def _architecture(args, seed_label="arch"):
    if getattr(args, "rows", None):
        return grid(args.rows, args.cols, args.depth)
    if args.n is None:
        raise ValidationError("cli: give --n (or --rows/--cols)")
    if getattr(args, "m", None):
        if args.seed is None:
            raise ValidationError("cli: --seed is required for a random architecture")
        return random_architecture(args.n, args.m, task_rng(args.seed, seed_label))
    return line(args.n, args.depth if args.depth is not None else 3 * args.n)


def _ensemble(args):
    return EnsembleSpec(args.ensemble, args.theta, args.K)


def _circuit_or_random(args, label):
    if getattr(args, "circuit", None):
        return load_circuit(args.circuit)
    if args.seed is None:
        raise ValidationError("cli: --seed is required to draw a circuit")
    return sample_haar_circuit(_architecture(args), task_rng(args.seed, label))


def _distribution_columns(dist):
    return {"index": list(range(dist.N)), "probability": [float(p) for p in dist.probs]}


# -- subcommands --------------------------------------------------------------------

def cmd_simulate(args):
    circuit = load_circuit(args.circuit)
    if args.n is not None and args.n != circuit.n:
        raise ValidationError(f"cli: circuit has {circuit.n} qubits, --n says {args.n}")
    if args.precision:
        probs = simulate(circuit, 0, args.precision).probabilities()
        dist = OutputDistribution(np.array([float(p) for p in probs]), circuit.unitary)
    else:
        dist = full_distribution(circuit)
    _emit(args, {"distribution": distribution_to_dict(dist)}, _distribution_columns(dist))


def cmd_sample_circuit(args):
    arch = _architecture(args)
    spec = _ensemble(args)
    rng = task_rng(args.seed, "sample-circuit")
    circuit = sample_haar_circuit(arch, rng) if spec.kind == "haar" else sample_circuit(arch, spec, rng)
    _emit(args, circuit_to_dict(circuit))


def cmd_sample(args):
    dist = full_distribution(load_circuit(args.circuit))
    samples = sample_outcomes(dist, args.k, task_rng(args.seed, "sample"))
    buf = io.StringIO()
    buf.write(f"# seed={args.seed} k={args.k}\n")
    write_samples(samples, buf, args.encoding)
    _write(buf.getvalue(), args)


def cmd_reduce(args):
    circuit = _circuit_or_random(args, "reduce-circuit")
    cfg = ReductionConfig(
        K=args.K, theta_max=args.theta_max, num_points=args.points, precision_bits=args.precision,
        node_scheme=args.nodes, repetitions=args.repetitions, corruption_budget=args.corruption_budget)
    oracle = SimulatedOracle(args.precision)
    if args.corruption_rate:
        oracle = CorruptingOracle(oracle, args.corruption_rate, task_rng(args.seed, "corruption"))
    report = worst_to_average(circuit, cfg, oracle, seed=args.seed)
    payload = report.to_dict()
    payload["circuit"] = circuit_to_dict(circuit)
    _emit(args, payload)
    if report.status != "ok":
        raise DecodeError(f"reduction: extrapolation bound 1e{report.log10_extrapolation_bound:.1f} "
                          f"above tolerance {report.config['residual_tol']:.3g}")


def cmd_perm_reduce(args):
    field = PrimeField(args.q)
    Y = random_matrix(field, args.n, task_rng(args.seed, "worst-case"))
    oracle = RandomErrorOracle(field, args.error_rate, task_rng(args.seed, "oracle"))
    result = permanent_w2a(Y, oracle, field, task_rng(args.seed, "reduction"),
                           repetitions=args.repetitions, details=True)
    truth = permanent(Y, field)
    _emit(args, {
        "matrix": [[int(v) for v in row] for row in Y],
        "permanent": int(truth),
        "estimate": int(result.value),
        "correct": bool(result.value == truth),
        "votes": {str(k): v for k, v in sorted(result.votes.items())},
        "oracle_queries": oracle.queries,
        "oracle_errors": oracle.errors,
    })


def cmd_verify(args):
    ideal = full_distribution(load_circuit(args.circuit))
    if args.samples:
        with open(args.samples) as fh:
            report = measure_samples(read_samples(fh.read(), ideal.n), ideal)
    else:
        with open(args.distribution) as fh:
            report = divergences(read_distribution(fh.read()), ideal)
    _emit(args, report.to_dict())


def cmd_shape(args):
    text = open(args.input).read() if args.input else sys.stdin.read()
    hist = shape_histogram(read_distribution(text), args.bins, args.ks_threshold)
    data = hist.to_dict()
    edges = data["bin_edges"]
    _emit(args, data, {"lo": edges[:-1], "hi": edges[1:], "count": data["counts"],
                       "pt_reference": data["pt_reference"]})


def cmd_counterexample(args):
    ideal = full_distribution(_circuit_or_random(args, "counterexample-circuit"))
    fake = rescaled_counterexample(ideal, args.k)
    _emit(args, {
        "distribution": distribution_to_dict(fake),
        "tv": total_variation(fake, ideal),
        "ced": ced(fake, ideal),
        "ced_ideal": ced(ideal, ideal),
        "ced_gap": abs(ced(fake, ideal) - ced(ideal, ideal)),
    }, _distribution_columns(fake))


def cmd_imposter(args):
    counts = imposter_counts(args.n, args.m, task_rng(args.seed, "imposter"))
    dist = OutputDistribution(counts / 2.0 ** args.m)
    stat, p_value, observed, expected = poisson_fit(counts)
    _emit(args, {
        "distribution": distribution_to_dict(dist),
        "zero_fraction": float(np.mean(counts == 0)),
        "mean_count": float(counts.mean()),
        "poisson_chi2": stat,
        "poisson_p_value": p_value,
        "count_histogram": [int(v) for v in observed],
        "poisson_expected": [float(v) for v in expected],
    }, _distribution_columns(dist))


def cmd_anticonc(args):
    arch = _architecture(args)
    fraction = anticoncentration_estimate(
        arch, _ensemble(args), args.trials, args.kappa, args.seed, args.jobs)
    _emit(args, {"fraction": fraction, "pt_prediction": math.exp(-1.0 / args.kappa)})


# -- parser -----------------------------------------------------------------------------

def _common(p, seed_required=True):
    p.add_argument("--seed", type=int, required=seed_required, default=None,
                   help="master seed" + ("" if seed_required else " (needed when a circuit is drawn)"))
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    p.add_argument("--jobs", type=int, default=1)


def _arch_args(p, with_m=False):
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--depth", type=int, default=None, help="brickwork depth (default 3n)")
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--cols", type=int, default=None)
    if with_m:
        p.add_argument("--m", type=int, default=None, help="random architecture with m gates")


def _ensemble_args(p):
    p.add_argument("--ensemble", choices=("haar", "perturbed", "truncated"), default="haar")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--K", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="rcslab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rcslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="exact output distribution of a circuit")
    p.add_argument("--circuit", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--precision", type=int, default=None, help="mantissa bits (default double)")
    _common(p, seed_required=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample-circuit", help="draw a circuit from a gate ensemble")
    _arch_args(p, with_m=True)
    _ensemble_args(p)
    _common(p)
    p.set_defaults(func=cmd_sample_circuit)

    p = sub.add_parser("sample", help="draw output samples of a circuit")
    p.add_argument("--circuit", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--encoding", choices=("bits", "hex"), default="bits")
    _common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("reduce", help="worst-to-average reduction for p0 of a circuit")
    p.add_argument("--circuit", default=None)
    _arch_args(p, with_m=True)
    p.add_argument("--K", type=int, default=6)
    p.add_argument("--theta-max", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--precision", type=int, default=512)
    p.add_argument("--nodes", choices=("chebyshev", "uniform"), default="chebyshev")
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--corruption-budget", type=int, default=0)
    p.add_argument("--corruption-rate", type=float, default=0.0)
    _common(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("perm-reduce", help="worst-to-average reduction for the permanent over F_q")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, default=10007)
    p.add_argument("--error-rate", type=float, default=0.0)
    p.add_argument("--repetitions", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_perm_reduce)

    p = sub.add_parser("verify", help="CE/CED/TV/HOG of samples or a distribution against a circuit")
    p.add_argument("--circuit", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--samples")
    src.add_argument("--distribution")
    _common(p, seed_required=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("shape", help="Porter-Thomas shape report of a distribution (stdin by default)")
    p.add_argument("--input", default=None)
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--ks-threshold", type=float, default=0.02)
    _common(p, seed_required=False)
    p.set_defaults(func=cmd_shape)

    p = sub.add_parser("counterexample", help="rescaled distribution with ideal CED but large TV")
    p.add_argument("--circuit", default=None)
    _arch_args(p)
    p.add_argument("--k", type=int, required=True)
    _common(p, seed_required=False)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("imposter", help="classical Poisson imposter distribution")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    _common(p)
    p.set_defaults(func=cmd_imposter)

    p = sub.add_parser("anticonc", help="fraction of circuits with p0 >= 1/(kappa 2^n)")
    _arch_args(p)
    _ensemble_args(p)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=500)
    _common(p)
    p.set_defaults(func=cmd_anticonc)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except RCSLabError as exc:
        print(f"rcslab {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"rcslab {args.command}: {exc}", file=sys.stderr)
        return ValidationError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
