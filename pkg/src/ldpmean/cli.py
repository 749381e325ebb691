"""Command-line experiment runner.

Subcommands: variance (expected-variance curves from a true pmf), estimate
(end-to-end mean-estimation error), optimize (solve and dump one noise
table), sweep (estimate repeated over a hyperparameter grid), multidim
(attribute-sampled multidimensional estimation).

Every run is seeded: the stream for each (run, eps, purpose) triple is an
independent counter-based generator keyed by the base seed, so outputs are
byte-identical across invocations and mechanisms share identical data
partitions within a run.  Output is CSV with a leading comment line that
records the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .adaptive import (
    NoiseShape,
    run_protocol,
    save_table,
    solve_noise_table,
    verify_privacy,
)
from .analysis import baseline_expected_variance, squared_error
from .baselines import (
    duchi_perturb,
    hybrid_perturb,
    laplace_perturb,
    piecewise_perturb,
)
from .data import (
    BetaDistribution,
    ShiftedExponential,
    TruncatedGaussian,
    gen_bernoulli,
    gen_exponential_clipped,
    gen_gaussian_clipped,
    load_csv,
    load_csv_matrix,
    true_pmf,
)
from .domain import make_domain, rescale_to
from .multidim import MultiDataset, assign_attributes, run_multidim_protocol

ALL_MECHANISMS = ("adaptive", "duchi", "piecewise", "hybrid", "laplace")
# stable stream ids so adding or removing mechanisms from a run never
# changes the draws any other mechanism sees
_MECH_STREAM_ID = {m: i for i, m in enumerate(ALL_MECHANISMS)}
_P_DATA, _P_ASSIGN, _P_SPLIT, _P_MECH = 0, 1, 2, 10

SWEEP_PARAMETERS = ("split", "bin_size", "noise_range", "tail_ratio")


@dataclass(frozen=True)
class ExperimentConfig:
    mechanisms: tuple = ALL_MECHANISMS
    eps_grid: tuple = (0.5, 1.0, 2.0, 4.0)
    beta: float = 1.0
    bins: int = 16
    noise_window: int | None = None  # M; defaults to 4 * bins
    tail_ratio: float = 0.5
    split: float = 0.1
    runs: int = 20
    seed: int = 0
    n_samples: int = 10000
    dataset: str = "gaussian"
    csv_path: str | None = None
    csv_column: int = 0
    d: int = 1
    k: int = 1
    sweep_parameter: str | None = None
    sweep_grid: tuple = ()
    out: str = "-"

    def __post_init__(self):
        for m in self.mechanisms:
            if m not in ALL_MECHANISMS:
                raise ValueError(f"unknown mechanism {m!r}")
        if not self.mechanisms:
            raise ValueError("mechanism list is empty")
        if not self.eps_grid or any(e <= 0 for e in self.eps_grid):
            raise ValueError("eps grid must be nonempty and positive")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split must lie in (0, 1)")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.bins < 1 or self.n_samples < 1 or self.beta <= 0:
            raise ValueError("beta, bins and n must be positive")
        if self.d < 1 or self.k < 1:
            raise ValueError("d and k must be >= 1")

    @property
    def m(self) -> int:
        return 4 * self.bins if self.noise_window is None else self.noise_window

    @property
    def shape(self) -> NoiseShape:
        return NoiseShape(m=self.m, r=self.tail_ratio)

    def describe(self) -> str:
        pairs = []
        for f in fields(self):
            if f.name == "out":
                continue  # the output path does not influence results
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(item) for item in v)
            pairs.append(f"{f.name}={v}")
        pairs.append(f"m={self.m}")
        return " ".join(pairs)


def _stream(seed: int, run: int, eps_idx: int, purpose: int) -> np.random.Generator:
    key = np.random.SeedSequence([seed, run, eps_idx, purpose])
    return np.random.Generator(np.random.Philox(key))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(config: ExperimentConfig, command: str, header: str, rows) -> str:
    lines = [f"# ldpmean {command} {config.describe()}", header]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if config.out == "-":
        sys.stdout.write(text)
    else:
        with open(config.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def _parse_dist(spec: str):
    """A true-distribution spec: name[:key=value,...]."""
    name, _, tail = spec.partition(":")
    kwargs = {}
    if tail:
        for item in tail.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise ValueError(f"malformed distribution spec {spec!r}")
            kwargs[key.strip()] = float(value)
    name = name.strip().lower()
    if name == "gaussian":
        return TruncatedGaussian(mu=kwargs.get("mu", 0.0), sd=kwargs.get("sd", 0.1))
    if name == "exponential":
        return ShiftedExponential(rate=kwargs.get("rate", 6.0))
    if name == "beta":
        return BetaDistribution(a=kwargs.get("a", 0.5), b=kwargs.get("b", 0.5))
    if name == "uniform":
        return BetaDistribution(a=1.0, b=1.0)
    raise ValueError(f"unknown distribution {name!r}")


def _gen_samples(config: ExperimentConfig, rng: np.random.Generator, n=None, spec=None):
    spec = config.dataset if spec is None else spec
    n = config.n_samples if n is None else n
    name, _, tail = spec.partition(":")
    kwargs = {}
    if tail:
        for item in tail.split(","):
            key, _, value = item.partition("=")
            kwargs[key.strip()] = float(value)
    name = name.strip().lower()
    if name == "gaussian":
        return gen_gaussian_clipped(
            n,
            kwargs.get("mean", 0.0),
            kwargs.get("sd", 1.0),
            kwargs.get("clip_lo", -5.0),
            kwargs.get("clip_hi", 5.0),
            rng,
        ).values
    if name == "exponential":
        return gen_exponential_clipped(
            n, kwargs.get("rate", 1.0), kwargs.get("clip_hi", 5.0), rng
        ).values
    if name == "bernoulli":
        return gen_bernoulli(n, kwargs.get("p", 0.5), rng).values
    raise ValueError(f"unknown sample generator {name!r}")


def _baseline_estimate(mechanism, xs, beta, eps, rng) -> float:
    if mechanism == "laplace":
        ys = laplace_perturb(xs, beta, eps, rng)
    elif mechanism == "duchi":
        ys = duchi_perturb(xs, beta, eps, rng)
    elif mechanism == "piecewise":
        ys = beta * piecewise_perturb(xs / beta, eps, rng)
    elif mechanism == "hybrid":
        ys = hybrid_perturb(xs, beta, eps, rng)
    else:
        raise ValueError(f"unknown baseline {mechanism!r}")
    return float(np.mean(ys))


def cmd_variance(config: ExperimentConfig) -> str:
    """Expected variance per (mechanism, eps) against an analytic pmf."""
    domain = make_domain(config.beta, config.bins)
    pmf = true_pmf(_parse_dist(config.dataset), domain)
    rows = []
    for mechanism in config.mechanisms:
        for eps in sorted(config.eps_grid):
            if mechanism == "adaptive":
                table = solve_noise_table(pmf, eps, config.shape, domain)
                value = table.lp_objective
            else:
                value = baseline_expected_variance(mechanism, pmf, eps, config.beta)
            rows.append((mechanism, eps, value))
    return _write_csv(config, "variance", "mechanism,eps,expected_variance", rows)


def _estimate_errors(config: ExperimentConfig, domain, load_fixed):
    """Per-(mechanism, eps) squared errors over the configured runs.

    load_fixed is the rescaled CSV data, or None to draw a fresh synthetic
    dataset per run.  Within a run every mechanism shares the same data and
    split; each mechanism consumes its own stream.
    """
    errors = {
        (mech, eps): [] for mech in config.mechanisms for eps in config.eps_grid
    }
    eps_sorted = sorted(config.eps_grid)
    for run in range(config.runs):
        if load_fixed is None:
            raw = _gen_samples(config, _stream(config.seed, run, 0, _P_DATA))
            xs, _ = rescale_to(raw, config.beta)
        else:
            xs = load_fixed
        truth = float(xs.mean())
        mask = _stream(config.seed, run, 0, _P_SPLIT).random(xs.size) < config.split
        phase2 = xs[~mask]
        for mechanism in config.mechanisms:
            stream_id = _P_MECH + _MECH_STREAM_ID[mechanism]
            for eps_idx, eps in enumerate(eps_sorted):
                rng = _stream(config.seed, run, eps_idx, stream_id)
                if mechanism == "adaptive":
                    res = run_protocol(
                        xs, eps, config.split, config.shape, domain, rng,
                        split_mask=mask,
                    )
                    est = res.mean_estimate
                else:
                    est = _baseline_estimate(mechanism, phase2, config.beta, eps, rng)
                errors[(mechanism, eps)].append(squared_error(est, truth))
    return errors, eps_sorted


def cmd_estimate(config: ExperimentConfig) -> str:
    """Mean squared error of the end-to-end protocol per (mechanism, eps)."""
    domain = make_domain(config.beta, config.bins)
    fixed = None
    if config.csv_path is not None:
        raw = load_csv(config.csv_path, config.csv_column).values
        fixed, _ = rescale_to(raw, config.beta)
    errors, eps_sorted = _estimate_errors(config, domain, fixed)
    rows = [
        (mech, eps, float(np.mean(errors[(mech, eps)])), config.runs, config.seed)
        for mech in config.mechanisms
        for eps in eps_sorted
    ]
    return _write_csv(config, "estimate", "mechanism,eps,mse,runs,seed", rows)


def cmd_optimize(config: ExperimentConfig) -> str:
    """Solve one noise table at the first eps of the grid and dump it."""
    domain = make_domain(config.beta, config.bins)
    pmf = true_pmf(_parse_dist(config.dataset), domain)
    eps = sorted(config.eps_grid)[0]
    table = solve_noise_table(pmf, eps, config.shape, domain)
    path = config.out if config.out != "-" else "noise_table.txt"
    save_table(table, path)
    report = verify_privacy(table, eps)
    summary = (
        f"table written to {path}\n"
        f"lp_objective {table.lp_objective!r}\n"
        f"privacy max_ratio {float(report.max_ratio)!r} bound {float(report.bound)!r} "
        f"passed {report.passed}\n"
    )
    sys.stdout.write(summary)
    return summary


def cmd_sweep(config: ExperimentConfig) -> str:
    """cmd_estimate repeated over a hyperparameter grid, one block per value.

    bin_size values are bin widths sigma (bins = round(2 beta / sigma));
    noise_range values are the window ratio 2M/N (M = round(value * N / 2));
    split and tail_ratio are used directly.
    """
    if config.sweep_parameter not in SWEEP_PARAMETERS:
        raise ValueError(
            f"sweep parameter must be one of {SWEEP_PARAMETERS}, "
            f"got {config.sweep_parameter!r}"
        )
    if not config.sweep_grid:
        raise ValueError("sweep grid is empty")
    rows = []
    for value in sorted(config.sweep_grid):
        if config.sweep_parameter == "split":
            sub = replace(config, split=float(value))
        elif config.sweep_parameter == "bin_size":
            bins = max(1, round(2.0 * config.beta / value))
            sub = replace(config, bins=bins)
        elif config.sweep_parameter == "noise_range":
            sub = replace(config, noise_window=max(1, round(value * config.bins / 2)))
        else:
            sub = replace(config, tail_ratio=float(value))
        domain = make_domain(sub.beta, sub.bins)
        fixed = None
        if sub.csv_path is not None:
            raw = load_csv(sub.csv_path, sub.csv_column).values
            fixed, _ = rescale_to(raw, sub.beta)
        errors, eps_sorted = _estimate_errors(sub, domain, fixed)
        for mech in sub.mechanisms:
            for eps in eps_sorted:
                rows.append(
                    (
                        config.sweep_parameter,
                        float(value),
                        mech,
                        eps,
                        float(np.mean(errors[(mech, eps)])),
                        sub.runs,
                        sub.seed,
                    )
                )
    return _write_csv(
        config, "sweep", "parameter,value,mechanism,eps,mse,runs,seed", rows
    )


def cmd_multidim(config: ExperimentConfig) -> str:
    """Attribute-sampled multidimensional estimation; error is the sum of
    per-dimension squared errors against each dimension's full-data mean."""
    fixed = None
    d = config.d
    if config.csv_path is not None:
        fixed = load_csv_matrix(config.csv_path)
        d = fixed.shape[1]
    if not 1 <= config.k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={config.k}, d={d}")
    sums = {
        (mech, eps): [] for mech in config.mechanisms for eps in config.eps_grid
    }
    eps_sorted = sorted(config.eps_grid)
    for run in range(config.runs):
        if fixed is None:
            data_rng = _stream(config.seed, run, 0, _P_DATA)
            raw = np.column_stack(
                [_gen_samples(config, data_rng) for _ in range(d)]
            )
        else:
            raw = fixed
        cols = []
        for dim in range(raw.shape[1]):
            scaled, _ = rescale_to(raw[:, dim], config.beta)
            cols.append(scaled)
        rows_mat = np.column_stack(cols)
        mdata = MultiDataset(rows_mat, np.full(d, config.beta))
        truths = rows_mat.mean(axis=0)
        n = rows_mat.shape[0]
        assignment = assign_attributes(
            n, d, config.k, _stream(config.seed, run, 0, _P_ASSIGN)
        )
        pools = [
            np.nonzero((assignment == dim).any(axis=1))[0] for dim in range(d)
        ]
        split_rng = _stream(config.seed, run, 0, _P_SPLIT)
        masks = [split_rng.random(pool.size) < config.split for pool in pools]
        for mechanism in config.mechanisms:
            stream_id = _P_MECH + _MECH_STREAM_ID[mechanism]
            for eps_idx, eps in enumerate(eps_sorted):
                rng = _stream(config.seed, run, eps_idx, stream_id)
                total = 0.0
                if mechanism == "adaptive":
                    res = run_multidim_protocol(
                        mdata, eps, config.split, config.k, config.shape, rng,
                        n_bins=config.bins, assignment=assignment,
                        split_masks=masks,
                    )
                    for dim in range(d):
                        total += squared_error(res.estimates[dim], truths[dim])
                else:
                    for dim in range(d):
                        phase2 = rows_mat[pools[dim], dim][~masks[dim]]
                        est = _baseline_estimate(
                            mechanism, phase2, config.beta, eps, rng
                        )
                        total += squared_error(est, truths[dim])
                sums[(mechanism, eps)].append(total)
    rows = [
        (
            mech,
            eps,
            float(np.mean(sums[(mech, eps)])),
            d,
            config.k,
            config.runs,
            config.seed,
        )
        for mech in config.mechanisms
        for eps in eps_sorted
    ]
    return _write_csv(
        config, "multidim", "mechanism,eps,sum_mse,d,k,runs,seed", rows
    )


_COMMANDS = {
    "variance": cmd_variance,
    "estimate": cmd_estimate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "multidim": cmd_multidim,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldpmean",
        description="Locally differentially private mean estimation experiments",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="INI file with an [experiment] section")
    parser.add_argument("--eps", help="comma-separated privacy budgets")
    parser.add_argument("--mechanisms", help="comma-separated mechanism names")
    parser.add_argument("--beta", type=float)
    parser.add_argument("--bins", type=int)
    parser.add_argument("--noise-window", type=int, dest="noise_window")
    parser.add_argument("--tail-ratio", type=float, dest="tail_ratio")
    parser.add_argument("--split", type=float)
    parser.add_argument("--runs", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--n", type=int, dest="n_samples")
    parser.add_argument("--dataset", help="generator or distribution spec")
    parser.add_argument("--csv", dest="csv_path")
    parser.add_argument("--column", type=int, dest="csv_column")
    parser.add_argument("--d", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--parameter", dest="sweep_parameter",
                        help="sweep parameter: " + ", ".join(SWEEP_PARAMETERS))
    parser.add_argument("--grid", dest="sweep_grid",
                        help="comma-separated sweep values")
    parser.add_argument("--out", help="output path, - for stdout")
    return parser


_TUPLE_FLOAT = ("eps_grid", "sweep_grid")
_INT_FIELDS = ("bins", "noise_window", "runs", "seed", "n_samples",
               "csv_column", "d", "k")
_FLOAT_FIELDS = ("beta", "tail_ratio", "split")


def _coerce(name: str, value):
    if value is None:
        return None
    if name in _TUPLE_FLOAT:
        if isinstance(value, str):
            return tuple(float(v) for v in value.split(",") if v.strip())
        return tuple(float(v) for v in value)
    if name == "mechanisms":
        if isinstance(value, str):
            return tuple(m.strip() for m in value.split(",") if m.strip())
        return tuple(value)
    if name in _INT_FIELDS:
        return int(value)
    if name in _FLOAT_FIELDS:
        return float(value)
    return str(value)


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    """Defaults, then the config file's [experiment] section, then flags."""
    values = {}
    if path is not None:
        ini = configparser.ConfigParser()
        read = ini.read(path)
        if not read:
            raise ValueError(f"cannot read config file {path!r}")
        if not ini.has_section("experiment"):
            raise ValueError(f"{path!r} has no [experiment] section")
        known = {f.name for f in fields(ExperimentConfig)}
        alias = {"eps": "eps_grid", "n": "n_samples", "csv": "csv_path",
                 "column": "csv_column", "grid": "sweep_grid",
                 "parameter": "sweep_parameter"}
        for key, raw in ini.items("experiment"):
            name = alias.get(key, key)
            if name not in known:
                raise ValueError(f"unknown config key {key!r} in {path!r}")
            values[name] = _coerce(name, raw)
    for name, raw in overrides.items():
        if raw is not None:
            values[name] = _coerce(name, raw)
    return ExperimentConfig(**values)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {}
    for f in fields(ExperimentConfig):
        if hasattr(args, f.name):
            overrides[f.name] = getattr(args, f.name)
    if args.eps is not None:
        overrides["eps_grid"] = args.eps
    try:
        config = load_config(args.config, overrides)
        _COMMANDS[args.command](config)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
