"""Experiment harness: identity suites, estimator sweeps, adversarial diagnostics.

All commands are deterministic given their config (wall_ms excepted); sweep
records are buffered and written sorted by (epsilon, seed) so output files
are byte-stable.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from .circuits import (
    QubitCapExceeded,
    analyze_flagged,
    build_encoding_circuit,
    build_flagged_encoding,
    build_restructured_encoding,
    build_swap_test,
    execute,
    register_zero_probability,
)
from .fidelity import (
    exact_fidelity_to_pure,
    exact_tr_rho_sigma2,
    hard_instance,
    hard_pair_hellinger,
    hellinger_distance,
    fidelity_to_pure,
    make_task,
    pure_pure_fidelity,
    sqrt_tr_rho_sigma2_estimate,
    swap_test_estimate,
)
from .linalg import unitarity_error
from .oracles import RandomInstanceSpec, sample_instance

COMMANDS = ("verify-identities", "sweep", "hard-instance", "single")
ESTIMATORS = ("swap-baseline", "optimal", "tr-rho-sigma2", "pure-pure")
FORMATS = ("csv", "json")

CSV_HEADER = (
    "instance_id,estimator,epsilon,seed,true_value,estimate,abs_error,success,"
    "queries_U,queries_V,grover_applications,wall_ms"
)

HARD_CSV_HEADER = (
    "p,epsilon,rank,k,sign,fidelity,expected_fidelity,fidelity_residual,"
    "hellinger,expected_hellinger,hellinger_residual"
)

# fixed p grid for the hard-instance command (config carries eps and rank)
HARD_P_GRID = (0.3, 0.5, 0.7)

_ESTIMATOR_FNS = {
    "swap-baseline": swap_test_estimate,
    "optimal": fidelity_to_pure,
    "tr-rho-sigma2": sqrt_tr_rho_sigma2_estimate,
    "pure-pure": pure_pure_fidelity,
}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    k: int = 1
    rank: int = 2
    estimator: str = "optimal"
    epsilons: tuple = (0.1,)
    trials: int = 1
    seed: int = 0
    output_path: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 1 <= self.rank <= (1 << self.k):
            raise ValueError(f"rank {self.rank} out of range [1, {1 << self.k}] for k={self.k}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}; expected one of {ESTIMATORS}")
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ValueError("at least one epsilon is required")
        if any(not 0.0 < e < 1.0 for e in eps):
            raise ValueError(f"epsilons must lie in (0, 1), got {eps}")
        object.__setattr__(self, "epsilons", eps)
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.seed < (1 << 63):
            raise ValueError(f"seed must be a non-negative 63-bit integer, got {self.seed}")
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}; expected one of {FORMATS}")
        if self.estimator == "pure-pure" and self.rank != 1:
            raise ValueError("the pure-pure estimator needs rank 1 instances")


@dataclass(frozen=True)
class ExperimentRecord:
    instance_id: str
    estimator: str
    epsilon: float
    seed: int
    true_value: float
    estimate: float
    abs_error: float
    success: bool
    queries_U: int
    queries_V: int
    grover_applications: int
    wall_ms: int

    def __post_init__(self):
        if self.success != (self.abs_error <= self.epsilon):
            raise ValueError("success flag inconsistent with abs_error <= epsilon")
        if min(self.queries_U, self.queries_V, self.grover_applications, self.wall_ms) < 0:
            raise ValueError("query and timing fields must be non-negative")

    def csv_row(self) -> list:
        return [
            self.instance_id,
            self.estimator,
            repr(self.epsilon),
            str(self.seed),
            repr(self.true_value),
            repr(self.estimate),
            repr(self.abs_error),
            "true" if self.success else "false",
            str(self.queries_U),
            str(self.queries_V),
            str(self.grover_applications),
            str(self.wall_ms),
        ]


def derive_seed(*parts) -> int:
    """Stable 64-bit child seed from integer parts."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def fit_scaling(records) -> dict:
    """Least-squares slope of log(median total queries) vs log(epsilon), per estimator."""
    groups: dict = {}
    for rec in records:
        groups.setdefault(rec.estimator, {}).setdefault(rec.epsilon, []).append(
            rec.queries_U + rec.queries_V
        )
    slopes = {}
    for estimator, by_eps in groups.items():
        if len(by_eps) < 3:
            raise ValueError(
                f"need >= 3 distinct epsilon values for a scaling fit, "
                f"estimator {estimator!r} has {len(by_eps)}"
            )
        eps = sorted(by_eps)
        medians = [float(np.median(by_eps[e])) for e in eps]
        slope = float(np.polyfit(np.log(eps), np.log(medians), 1)[0])
        slopes[estimator] = slope
    return slopes


def _sample_pair(config: ExperimentConfig, trial: int):
    """Instance for one trial: (rho_dm, rho_oracle, second_dm, second_oracle)."""
    rho_kind = "haar_pure" if config.estimator == "pure-pure" else "ginibre_mixed"
    rho_rank = 1 if config.estimator == "pure-pure" else config.rank
    rho_spec = RandomInstanceSpec(
        config.k, rho_rank, derive_seed(config.seed, trial, 0), rho_kind
    )
    if config.estimator == "tr-rho-sigma2":
        second_spec = RandomInstanceSpec(
            config.k, config.rank, derive_seed(config.seed, trial, 1), "ginibre_mixed"
        )
    else:
        second_spec = RandomInstanceSpec(
            config.k, 1, derive_seed(config.seed, trial, 1), "haar_pure"
        )
    rho_dm, rho_oracle = sample_instance(rho_spec, label="U")
    second_dm, second_oracle = sample_instance(second_spec, label="V")
    return rho_dm, rho_oracle, second_dm, second_oracle


def _run_one(config: ExperimentConfig, trial: int, epsilon: float) -> ExperimentRecord:
    rho_dm, rho_oracle, second_dm, second_oracle = _sample_pair(config, trial)
    truth = math.sqrt(exact_tr_rho_sigma2(rho_dm, second_dm))
    task = make_task(rho_oracle, second_oracle, epsilon, derive_seed(config.seed, trial, 2))
    start = time.perf_counter()
    result = _ESTIMATOR_FNS[config.estimator](task)
    wall_ms = int(round((time.perf_counter() - start) * 1000.0))
    abs_error = abs(result.estimate - truth)
    return ExperimentRecord(
        instance_id=f"k{config.k}-r{config.rank}-t{trial}",
        estimator=config.estimator,
        epsilon=epsilon,
        seed=task.seed,
        true_value=truth,
        estimate=result.estimate,
        abs_error=abs_error,
        success=abs_error <= epsilon,
        queries_U=result.total_queries("U"),
        queries_V=result.total_queries("V"),
        grover_applications=result.grover_applications,
        wall_ms=wall_ms,
    )


def _write_text(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _records_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for rec in records:
        writer.writerow(rec.csv_row())
    return buf.getvalue()


def _run_sweep(config: ExperimentConfig) -> int:
    records = []
    for epsilon in config.epsilons:
        for trial in range(config.trials):
            records.append(_run_one(config, trial, epsilon))
    records.sort(key=lambda r: (r.epsilon, r.seed, r.instance_id))

    for epsilon in sorted(set(config.epsilons)):
        subset = [r for r in records if r.epsilon == epsilon]
        hits = sum(r.success for r in subset)
        print(f"epsilon {epsilon:g}: success fraction {hits / len(subset):.3f} ({hits}/{len(subset)})")

    slopes = None
    if len(set(config.epsilons)) >= 3:
        slopes = fit_scaling(records)
        for estimator, slope in sorted(slopes.items()):
            print(f"scaling {estimator}: log-log slope {slope:.3f}")

    if config.format == "csv":
        _write_text(config.output_path, _records_csv(records))
    else:
        payload = {"records": [dataclasses.asdict(r) for r in records]}
        if slopes is not None:
            payload["scaling"] = slopes
        _write_text(config.output_path, json.dumps(payload, indent=2) + "\n")
    return 0


def _run_single(config: ExperimentConfig) -> int:
    _, rho_oracle, _, second_oracle = _sample_pair(config, 0)
    task = make_task(rho_oracle, second_oracle, config.epsilons[0], derive_seed(config.seed, 0, 2))
    result = _ESTIMATOR_FNS[config.estimator](task)
    text = result.to_json() + "\n"
    sys.stdout.write(text)
    if config.output_path is not None:
        _write_text(config.output_path, text)
    return 0


def _run_hard_instance(config: ExperimentConfig) -> int:
    if config.rank < 2:
        raise ValueError("hard-instance needs rank >= 2")
    rows = []
    for p in HARD_P_GRID:
        for eps in config.epsilons:
            if not (0.0 < p - eps and p + eps < 1.0):
                raise ValueError(f"p={p} with epsilon={eps} leaves (0, 1)")
            plus = hard_instance(p, eps, config.rank, 1, config.k)
            minus = hard_instance(p, eps, config.rank, -1, config.k)
            hell = hellinger_distance(plus.distribution, minus.distribution)
            hell_closed = hard_pair_hellinger(p, eps)
            for inst in (plus, minus):
                fid = exact_fidelity_to_pure(inst.rho, inst.target)
                expected = math.sqrt(p + inst.sign * eps)
                rows.append(
                    {
                        "p": p,
                        "epsilon": eps,
                        "rank": config.rank,
                        "k": config.k,
                        "sign": "+" if inst.sign > 0 else "-",
                        "fidelity": fid,
                        "expected_fidelity": expected,
                        "fidelity_residual": abs(fid - expected),
                        "hellinger": hell,
                        "expected_hellinger": hell_closed,
                        "hellinger_residual": abs(hell - hell_closed),
                    }
                )
    worst_fid = max(r["fidelity_residual"] for r in rows)
    worst_hell = max(r["hellinger_residual"] for r in rows)
    print(f"hard-instance residuals: fidelity {worst_fid:.3e}, hellinger {worst_hell:.3e}")

    if config.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(HARD_CSV_HEADER.split(","))
        for row in rows:
            writer.writerow(
                [
                    repr(row["p"]),
                    repr(row["epsilon"]),
                    str(row["rank"]),
                    str(row["k"]),
                    row["sign"],
                    repr(row["fidelity"]),
                    repr(row["expected_fidelity"]),
                    repr(row["fidelity_residual"]),
                    repr(row["hellinger"]),
                    repr(row["expected_hellinger"]),
                    repr(row["hellinger_residual"]),
                ]
            )
        _write_text(config.output_path, buf.getvalue())
    else:
        _write_text(config.output_path, json.dumps({"rows": rows}, indent=2) + "\n")
    return 0 if max(worst_fid, worst_hell) <= 1e-12 else 1


def _run_verify_identities(config: ExperimentConfig) -> int:
    """Execute the exact-identity suites on seeded instances; print max residuals."""
    d = 1 << config.k
    residuals = {
        "encoding pure |amp^2 - <psi|rho|psi>|": 0.0,
        "encoding mixed |amp^2 - tr(rho sigma^2)|": 0.0,
        "encoding vs restructured |amp^2 - amp^2|": 0.0,
        "flag fold |Pr[C=0] - amp^2|": 0.0,
        "decomposition |amp^2 + residual^2 - 1|": 0.0,
        "swap law |Pr[C=0] - (1+F^2)/2|": 0.0,
        "oracle unitarity max|U^dag U - I|": 0.0,
        "oracle reconstruction max|tr_B - rho|": 0.0,
    }
    bounds = dict.fromkeys(residuals, 1e-10)
    bounds["oracle reconstruction max|tr_B - rho|"] = 1e-9

    def bump(name, value):
        residuals[name] = max(residuals[name], value)

    for trial in range(config.trials):
        rank = (trial % d) + 1
        rho_dm, rho_oracle = sample_instance(
            RandomInstanceSpec(config.k, rank, derive_seed(config.seed, trial, 0), "ginibre_mixed"),
            label="U",
        )
        psi_dm, psi_oracle = sample_instance(
            RandomInstanceSpec(config.k, 1, derive_seed(config.seed, trial, 1), "haar_pure"),
            label="V",
        )
        sigma_dm, sigma_oracle = sample_instance(
            RandomInstanceSpec(
                config.k, (trial % d) + 1, derive_seed(config.seed, trial, 2), "ginibre_mixed"
            ),
            label="V",
        )

        pure_truth = exact_tr_rho_sigma2(rho_dm, psi_dm)
        circ = build_encoding_circuit(rho_oracle, psi_oracle)
        split = analyze_flagged(execute(circ), circ.layout, ("A", "B"))
        bump("encoding pure |amp^2 - <psi|rho|psi>|", abs(split.flagged_amplitude**2 - pure_truth))
        bump(
            "decomposition |amp^2 + residual^2 - 1|",
            abs(split.flagged_amplitude**2 + split.residual_norm**2 - 1.0),
        )

        flagged = build_flagged_encoding(rho_oracle, psi_oracle)
        pr0 = register_zero_probability(execute(flagged), flagged.layout, ("C",))
        bump("flag fold |Pr[C=0] - amp^2|", abs(pr0 - split.flagged_amplitude**2))

        mixed_truth = exact_tr_rho_sigma2(rho_dm, sigma_dm)
        mixed = build_encoding_circuit(rho_oracle, sigma_oracle)
        amp_mixed = analyze_flagged(execute(mixed), mixed.layout, ("A", "B")).flagged_amplitude
        bump("encoding mixed |amp^2 - tr(rho sigma^2)|", abs(amp_mixed**2 - mixed_truth))

        restructured = build_restructured_encoding(rho_oracle, sigma_oracle)
        amp_restr = analyze_flagged(
            execute(restructured), restructured.layout, ("A'", "B'")
        ).flagged_amplitude
        bump("encoding vs restructured |amp^2 - amp^2|", abs(amp_mixed**2 - amp_restr**2))

        swap = build_swap_test(rho_oracle, psi_oracle)
        pr_swap = register_zero_probability(execute(swap), swap.layout, ("C",))
        bump("swap law |Pr[C=0] - (1+F^2)/2|", abs(pr_swap - (1.0 + pure_truth) / 2.0))

        for oracle, dm in ((rho_oracle, rho_dm), (psi_oracle, psi_dm), (sigma_oracle, sigma_dm)):
            bump("oracle unitarity max|U^dag U - I|", unitarity_error(oracle.unitary))
            bump(
                "oracle reconstruction max|tr_B - rho|",
                float(np.max(np.abs(oracle.reduced_state().matrix - dm.matrix))),
            )

    ok = True
    for name, value in residuals.items():
        passed = value <= bounds[name]
        ok = ok and passed
        print(f"{name}: max residual {value:.3e} [{'PASS' if passed else 'FAIL'}]")
    print(f"verify-identities: {'all identities hold' if ok else 'FAILURES above'}")
    return 0 if ok else 1


def run(config: ExperimentConfig) -> int:
    """Dispatch one experiment command; returns a process exit code."""
    if config.command == "sweep":
        return _run_sweep(config)
    if config.command == "single":
        return _run_single(config)
    if config.command == "hard-instance":
        return _run_hard_instance(config)
    return _run_verify_identities(config)


def _epsilons_arg(text: str):
    try:
        return tuple(float(part) for part in text.split(",") if part)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad epsilon list {text!r}: {exc}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fidest",
        description=(
            "Experiment harness for fidelity estimation under purified "
            "state-preparation access."
        ),
    )
    parser.add_argument(
        "--config",
        metavar="FILE",
        help="JSON file mirroring the experiment config; replaces subcommand flags",
    )
    sub = parser.add_subparsers(dest="command")

    def add_common(p, trials_default=1):
        p.add_argument("--k", type=int, default=1, help="system qubits")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--trials", type=int, default=trials_default, help="trials per epsilon")

    p = sub.add_parser("verify-identities", help="run the exact-identity suites")
    add_common(p, trials_default=20)

    for name, help_text in (
        ("sweep", "run an estimator over an epsilon grid, one record per (epsilon, trial)"),
        ("single", "run one estimation and print its JSON result"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        p.add_argument("--rank", type=int, default=2, help="instance rank")
        p.add_argument("--estimator", choices=ESTIMATORS, default="optimal")
        p.add_argument("--epsilons", type=_epsilons_arg, default=(0.1,), help="comma-separated")
        p.add_argument("--output", dest="output_path", help="output file (default stdout)")
        p.add_argument("--format", choices=FORMATS, default="csv")

    p = sub.add_parser("hard-instance", help="emit the adversarial-family diagnostics")
    p.add_argument("--k", type=int, default=2, help="system qubits")
    p.add_argument("--seed", type=int, default=0, help="unused; kept for config symmetry")
    p.add_argument("--rank", type=int, default=2, help="instance rank r >= 2")
    p.add_argument("--epsilons", type=_epsilons_arg, default=(0.1,), help="comma-separated")
    p.add_argument("--output", dest="output_path", help="output file (default stdout)")
    p.add_argument("--format", choices=FORMATS, default="csv")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        allowed = {f.name for f in dataclasses.fields(ExperimentConfig)}
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        if "epsilons" in raw:
            raw["epsilons"] = tuple(raw["epsilons"])
        return ExperimentConfig(**raw)
    if not args.command:
        raise ValueError("a command or --config is required (see --help)")
    fields = {
        "command": args.command,
        "k": args.k,
        "seed": args.seed,
    }
    for name in ("rank", "estimator", "epsilons", "trials", "output_path", "format"):
        if hasattr(args, name) and getattr(args, name) is not None:
            fields[name] = getattr(args, name)
    return ExperimentConfig(**fields)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        return run(config)
    except QubitCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
