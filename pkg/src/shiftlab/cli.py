"""Command-line surface for the package.

One binary, six subcommands:

    measures    exact information quantities for all dataset variants
    sweep       regularization sweeps per criterion, one trajectory CSV each
    verify      randomized inequality checking, JSON report, nonzero on failure
    sample      ancestral sampling to CSV plus a metadata sidecar
    baselines   train/test scores of the fixed-feature classifiers
    decompose   test-error decompositions for optimized or supplied encoders

Flags override values from ``--config <json>``. All file output is atomic
(temp file + rename) and byte-stable for a fixed argv and seed. Exit codes:
0 success, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    baseline_table,
    decompose_test_error,
    optimal_latent_classifier,
    write_decomposition_csv,
)
from .core import Channel
from .datasets import (
    DatasetVariant,
    build_joint,
    export_records,
    measurement_table,
    sample,
    sufficient_statistic_view,
    write_metadata,
)
from .encoder import (
    CriterionKind,
    EncoderParams,
    OptimizerConfig,
    materialize,
    optimize,
    sweep,
    write_trajectory_csv,
)
from .errors import ShiftLabError
from .infotheory import check_propositions, fuzz_propositions
from . import plots

__all__ = ["RunConfig", "build_parser", "run", "main"]

# Strongly regularized runs pass through a stationary plateau whose CE
# variation dips below the library's default stopping tolerance before the
# dynamics escape; the command line widens the window so full sweeps land on
# the true endpoints. Library callers keep the narrow default.
_CLI_WINDOW = 10_000

_DATASET_CHOICES = [v.value for v in DatasetVariant] + ["all"]
_CRITERION_CHOICES = [c.value for c in CriterionKind] + ["all"]
_CONFIG_FIELDS = (
    "dataset", "criterion", "lambda_grid", "seed", "out", "format",
    "optimizer", "plots",
)


@dataclass(frozen=True)
class RunConfig:
    """Resolved run parameters; round-trips losslessly through JSON."""

    dataset: str = "all"
    criterion: str = "all"
    lambda_grid: tuple[float, ...] | None = None
    seed: int = 0
    out: str = "."
    format: str = "csv"
    optimizer: dict = field(default_factory=dict)
    plots: bool = True

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if self.lambda_grid is not None:
            d["lambda_grid"] = list(self.lambda_grid)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - set(_CONFIG_FIELDS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if data.get("lambda_grid") is not None:
            data = {**data, "lambda_grid": tuple(float(x) for x in data["lambda_grid"])}
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


def _atomic_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic(path: str, write_fn) -> None:
    """Run a path-taking writer against a temp file, then rename into place."""
    tmp = path + ".tmp"
    write_fn(tmp)
    os.replace(tmp, path)


def _emit(path: str) -> None:
    print(f"wrote {path}")


def _variants(cfg: RunConfig) -> list[DatasetVariant]:
    if cfg.dataset == "all":
        return list(DatasetVariant)
    return [DatasetVariant.parse(cfg.dataset)]


def _criteria(cfg: RunConfig) -> list[CriterionKind]:
    if cfg.criterion == "all":
        return list(CriterionKind)
    return [CriterionKind.parse(cfg.criterion)]


def _optimizer_config(cfg: RunConfig) -> OptimizerConfig:
    overrides = {"convergence_window": _CLI_WINDOW, **cfg.optimizer}
    if "seed" in overrides:
        raise ValueError("set the run seed via --seed, not optimizer.seed")
    valid = {f.name for f in dataclasses.fields(OptimizerConfig)}
    unknown = set(overrides) - valid
    if unknown:
        raise ValueError(f"unknown optimizer keys: {sorted(unknown)}")
    return OptimizerConfig(seed=cfg.seed, **overrides)


def _float6(x: float) -> float:
    return float(f"{x:.6f}")


def _cmd_measures(cfg: RunConfig) -> int:
    variants = _variants(cfg)
    tables = {v.value: measurement_table(v) for v in variants}
    quantities = list(next(iter(tables.values())))
    if cfg.format == "json":
        payload = {name: {q: _float6(t[q]) for q in quantities}
                   for name, t in tables.items()}
        text = json.dumps(payload, indent=2) + "\n"
        path = os.path.join(cfg.out, "measures.json")
    else:
        lines = ["quantity," + ",".join(tables)]
        for q in quantities:
            lines.append(q + "," + ",".join(f"{tables[n][q]:.6f}" for n in tables))
        text = "\n".join(lines) + "\n"
        path = os.path.join(cfg.out, "measures.csv")
    print(text, end="")
    _atomic_text(path, text)
    _emit(path)
    if cfg.plots:
        fig_path = os.path.join(cfg.out, "measures.png")
        _atomic(fig_path, lambda p: plots.measures_figure(tables, p))
        _emit(fig_path)
    return 0


def _trajectory_json(traj) -> str:
    points = [
        {
            "lambda": p.lam,
            "train_ce": p.train_ce,
            "test_ce": p.test_ce,
            "regularizer": p.regularizer_value,
            "predictive_info": p.predictive_info,
            "iterations": p.iterations_run,
            "converged": p.converged,
        }
        for p in traj.points
    ]
    return json.dumps({"criterion": traj.criterion.value, "points": points},
                      indent=2) + "\n"


def _cmd_sweep(cfg: RunConfig) -> int:
    config = _optimizer_config(cfg)
    for variant in _variants(cfg):
        joint = build_joint(variant)
        trajectories = {}
        for criterion in _criteria(cfg):
            traj = sweep(joint, criterion, lambda_grid=cfg.lambda_grid,
                         config=config)
            trajectories[criterion.value] = traj
            ext = "json" if cfg.format == "json" else "csv"
            path = os.path.join(
                cfg.out, f"trajectory_{variant.value}_{criterion.value}.{ext}"
            )
            if cfg.format == "json":
                _atomic_text(path, _trajectory_json(traj))
            else:
                _atomic(path, lambda p, t=traj: write_trajectory_csv(t, p))
            _emit(path)
        if cfg.plots:
            scores = {k.value: v for k, v in baseline_table(variant).items()}
            fig_path = os.path.join(cfg.out, f"trajectory_{variant.value}.png")
            _atomic(fig_path, lambda p: plots.trajectory_figure(
                trajectories, scores, p, title=variant.value))
            _emit(fig_path)
    return 0


def _digit_encoder(n_inputs: int = 20) -> Channel:
    """Deterministic reference encoder keeping only the digit coordinate."""
    table = np.zeros((n_inputs, 10))
    table[np.arange(n_inputs), np.arange(n_inputs) % 10] = 1.0
    return Channel(("xhat",), ("z", 10), table)


def _cmd_verify(cfg: RunConfig, fuzz_cases: int) -> int:
    report: dict[str, dict] = {}
    failed = False
    for variant in _variants(cfg):
        view = sufficient_statistic_view(build_joint(variant))
        fuzz = fuzz_propositions(view, cases=fuzz_cases, seed=cfg.seed)
        reference = check_propositions(view, _digit_encoder())
        report[variant.value] = {
            "fuzz": fuzz.to_dict(),
            "reference_digit_encoder": reference.to_dict(),
        }
        bad = len(fuzz.violations) + len(reference.violations())
        failed = failed or bad > 0
        print(
            f"{variant.value}: {fuzz.cases} cases, "
            f"{fuzz.records_checked} records checked, {bad} violations"
        )
    path = os.path.join(cfg.out, "verify_report.json")
    _atomic_text(path, json.dumps(report, indent=2) + "\n")
    _emit(path)
    return 1 if failed else 0


def _cmd_sample(cfg: RunConfig, n: int, split: int) -> int:
    if cfg.dataset == "all":
        raise ValueError("sample needs a single --dataset")
    variant = DatasetVariant.parse(cfg.dataset)
    records = sample(variant, n=n, seed=cfg.seed, split=split)
    path = os.path.join(cfg.out, f"samples_{variant.value}.csv")
    _atomic(path, lambda p: export_records(records, p))
    _emit(path)
    meta = os.path.join(cfg.out, f"samples_{variant.value}.json")
    _atomic(meta, lambda p: write_metadata(p, variant, n, cfg.seed, split))
    _emit(meta)
    return 0


def _cmd_baselines(cfg: RunConfig) -> int:
    tables = {
        v.value: {k.value: scores for k, scores in baseline_table(v).items()}
        for v in _variants(cfg)
    }
    if cfg.format == "json":
        payload = {
            name: {kind: {"train_ce": tr, "test_ce": te}
                   for kind, (tr, te) in scores.items()}
            for name, scores in tables.items()
        }
        text = json.dumps(payload, indent=2) + "\n"
        path = os.path.join(cfg.out, "baselines.json")
    else:
        lines = ["dataset,baseline,train_ce,test_ce"]
        for name, scores in tables.items():
            for kind, (tr, te) in scores.items():
                lines.append(f"{name},{kind},{tr:.9g},{te:.9g}")
        text = "\n".join(lines) + "\n"
        path = os.path.join(cfg.out, "baselines.csv")
    print(text, end="")
    _atomic_text(path, text)
    _emit(path)
    if cfg.plots:
        fig_path = os.path.join(cfg.out, "baselines.png")
        _atomic(fig_path, lambda p: plots.baseline_figure(tables, p))
        _emit(fig_path)
    return 0


def _decomposition_json(rows) -> str:
    payload = [
        {
            "criterion": crit,
            "lambda": lam,
            "test_error": d.test_error,
            "info_loss": d.info_loss,
            "latent_error": d.latent_error,
            "bound_gap": d.bound_gap,
        }
        for crit, lam, d in rows
    ]
    return json.dumps(payload, indent=2) + "\n"


def _cmd_decompose(cfg: RunConfig, lam: float, encoder_path: str | None) -> int:
    config = _optimizer_config(cfg)
    for variant in _variants(cfg):
        joint = build_joint(variant)
        view = sufficient_statistic_view(joint)
        rows = []
        if encoder_path is not None:
            logits = np.load(encoder_path)
            channel = materialize(EncoderParams(logits))
            rows.append(("supplied", lam, channel))
        else:
            for criterion in _criteria(cfg):
                result = optimize(joint, criterion, lam, config)
                rows.append((criterion.value, lam, materialize(result.params)))
        decomposed = []
        for name, strength, channel in rows:
            joint_z = view.extend_with_channel(channel)
            classifier = optimal_latent_classifier(joint_z)
            decomposed.append(
                (name, strength, decompose_test_error(joint_z, classifier))
            )
        ext = "json" if cfg.format == "json" else "csv"
        path = os.path.join(cfg.out, f"decomposition_{variant.value}.{ext}")
        if cfg.format == "json":
            _atomic_text(path, _decomposition_json(decomposed))
        else:
            _atomic(path, lambda p, r=decomposed: write_decomposition_csv(r, p))
        _emit(path)
        if cfg.plots:
            fig_path = os.path.join(cfg.out, f"decomposition_{variant.value}.png")
            _atomic(fig_path, lambda p: plots.decomposition_figure(
                decomposed, p, title=variant.value))
            _emit(fig_path)
    return 0


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--dataset", choices=_DATASET_CHOICES, default=None)
    sub.add_argument("--criterion", choices=_CRITERION_CHOICES, default=None)
    sub.add_argument("--lambda-grid", default=None, metavar="X,Y,...",
                     help="comma-separated nonnegative strengths, sorted")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out", default=None, metavar="DIR")
    sub.add_argument("--format", choices=["csv", "json"], default=None)
    sub.add_argument("--config", default=None, metavar="FILE",
                     help="JSON run config; explicit flags override it")
    sub.add_argument("--no-plots", action="store_true", default=False,
                     help="skip the PNG next to each table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shiftlab",
        description="Exact selection-bias analysis and encoder optimization "
                    "on the synthetic colored-digit family.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, info in (
        ("measures", "emit the information-quantity table"),
        ("sweep", "run regularization sweeps, one trajectory per criterion"),
        ("verify", "fuzz the inequality suite and write a report"),
        ("sample", "draw records from one dataset variant"),
        ("baselines", "score the fixed-feature classifiers"),
        ("decompose", "emit test-error decompositions"),
    ):
        sub = subs.add_parser(name, help=info)
        _add_common_flags(sub)
        if name == "verify":
            sub.add_argument("--fuzz", type=int, default=1000, metavar="N")
        if name == "sample":
            sub.add_argument("--n", type=int, default=10_000)
            sub.add_argument("--split", type=int, choices=[0, 1], default=1)
        if name == "decompose":
            sub.add_argument("--lam", type=float, default=1e6,
                             help="regularization strength for fresh runs")
            sub.add_argument("--encoder", default=None, metavar="NPY",
                             help="logits file; skips optimization")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        with open(args.config) as fh:
            cfg = RunConfig.from_json(fh.read())
    else:
        cfg = RunConfig()
    overrides: dict = {}
    if args.dataset is not None:
        overrides["dataset"] = args.dataset
    if args.criterion is not None:
        overrides["criterion"] = args.criterion
    if args.lambda_grid is not None:
        overrides["lambda_grid"] = tuple(
            float(x) for x in args.lambda_grid.split(",") if x.strip()
        )
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.format is not None:
        overrides["format"] = args.format
    if args.no_plots:
        overrides["plots"] = False
    return dataclasses.replace(cfg, **overrides)


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve_config(args)
        os.makedirs(cfg.out, exist_ok=True)
        if args.command == "measures":
            return _cmd_measures(cfg)
        if args.command == "sweep":
            return _cmd_sweep(cfg)
        if args.command == "verify":
            return _cmd_verify(cfg, args.fuzz)
        if args.command == "sample":
            return _cmd_sample(cfg, args.n, args.split)
        if args.command == "baselines":
            return _cmd_baselines(cfg)
        return _cmd_decompose(cfg, args.lam, args.encoder)
    except (ShiftLabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
