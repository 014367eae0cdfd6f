"""Batch command-line front end.

Subcommands: synth, train, assign, eval, kuiper-test, cv.  Options resolve
as defaults < config file < explicit flags, and every run echoes its fully
resolved configuration next to its outputs.  Exit codes: 0 success, 1 usage
error, 2 data error, 3 numerical failure.  Partial outputs are removed when
a command fails.
"""

from __future__ import annotations

import csv
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from .config import load_config, write_config
from .data import (Dataset, read_dataset_csv, read_labels_csv, write_dataset_csv,
                   write_labels_csv)
from .divergence import (AllPairs, DivergenceSpec, KuiperUB, MMD,
                         SampleWithoutReplacement, default_pair_sampling)
from .errors import DataFormatError, NumericalError
from .experiment import (aggregate_reports, cross_validate, evaluate_fold,
                         evaluation_event_flags)
from .kuiper import kuiper_test
from .metrics import evaluate
from .network import load_checkpoint, save_checkpoint
from .plotting import save_curves_figure
from .survival import km_curve
from .synthetic import SynthSpec, generate
from .training import TrainConfig, assign, train

_DEFAULTS = {
    "seed": "0", "k": "2", "tau": "30", "folds": "5",
    "epochs": "100", "batch_size": "1024", "learning_rate": "0.01",
    "hidden_layers": "1", "hidden_units": "128", "activation": "relu",
    "batch_norm": "0", "l2": "0.01", "early_stop_patience": "15",
    "divergence": "kuiper_ub", "mmd_bandwidth": "", "pair_samples": "",
    "termination": "observed", "w_fixed": "10", "n_train": "",
    "event_features": "1",
}


# ---------------------------------------------------------------------------
# option resolution
# ---------------------------------------------------------------------------

def _resolve(config_path: str | None, overrides: dict[str, object]) -> dict[str, str]:
    resolved = dict(_DEFAULTS)
    if config_path:
        resolved.update(load_config(config_path))
    for key, value in overrides.items():
        if value is not None:
            resolved[key] = str(value)
    return resolved


def _get_int(cfg, key):
    value = cfg.get(key, "")
    if value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise click.UsageError(f"option {key} must be an integer, got {value!r}")


def _get_float(cfg, key):
    value = cfg.get(key, "")
    if value == "":
        return None
    try:
        return float(value)
    except ValueError:
        raise click.UsageError(f"option {key} must be a number, got {value!r}")


def _divergence_spec(cfg, n_clusters: int) -> DivergenceSpec:
    name = cfg["divergence"]
    if name == "kuiper_ub":
        variant = KuiperUB()
    elif name == "mmd":
        variant = MMD(bandwidth=_get_float(cfg, "mmd_bandwidth"))
    else:
        raise click.UsageError("divergence must be kuiper_ub or mmd")
    pair_samples = _get_int(cfg, "pair_samples")
    sampling = (default_pair_sampling(n_clusters) if pair_samples is None
                else SampleWithoutReplacement(pair_samples))
    return DivergenceSpec(variant=variant, pair_sampling=sampling)


def _train_config(cfg) -> TrainConfig:
    k = _get_int(cfg, "k")
    return TrainConfig(
        n_clusters=k,
        hidden_layers=_get_int(cfg, "hidden_layers"),
        hidden_units=_get_int(cfg, "hidden_units"),
        batch_size=_get_int(cfg, "batch_size"),
        learning_rate=_get_float(cfg, "learning_rate"),
        activation=cfg["activation"],
        batch_norm=bool(_get_int(cfg, "batch_norm")),
        l2=_get_float(cfg, "l2"),
        epochs=_get_int(cfg, "epochs"),
        early_stop_patience=_get_int(cfg, "early_stop_patience"),
        seed=_get_int(cfg, "seed"),
        tau=_get_int(cfg, "tau"),
        divergence=_divergence_spec(cfg, k),
        termination_mode=cfg["termination"],
        fixed_window=_get_int(cfg, "w_fixed"),
        event_features=bool(_get_int(cfg, "event_features")),
    )


# ---------------------------------------------------------------------------
# output handling
# ---------------------------------------------------------------------------

class _Staging:
    """Tracks files written by a command so failures leave nothing behind."""

    def __init__(self):
        self.files: list[Path] = []
        self.dirs: list[Path] = []

    def directory(self, path: Path) -> Path:
        if not path.exists():
            path.mkdir(parents=True)
            self.dirs.append(path)
        return path

    def file(self, path: Path) -> Path:
        self.files.append(path)
        return path

    def discard(self) -> None:
        for p in self.files:
            p.unlink(missing_ok=True)
        for d in reversed(self.dirs):
            try:
                d.rmdir()
            except OSError:
                pass


@contextmanager
def _staged():
    staging = _Staging()
    try:
        yield staging
    except BaseException:
        staging.discard()
        raise


def _default_out_dir(seed: int) -> Path:
    stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
    return Path("run") / f"{stamp}-{seed}"


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_report(mapping: dict, path: Path) -> None:
    lines = [f"{key}={_format_value(mapping[key])}" for key in mapping]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_curves_csv(curves, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"s_{k}" for k in range(len(curves))])
        length = len(curves[0].values)
        for t in range(length):
            writer.writerow([t] + [repr(float(c.values[t])) for c in curves])


def _write_train_log(log: list[dict], path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "epoch", "step", "objective", "skipped_pairs", "note"])
        for rec in log:
            obj = rec["objective"]
            writer.writerow([rec["kind"], rec["epoch"], rec["step"],
                             "" if obj is None else repr(float(obj)),
                             rec["skipped_pairs"], rec["note"]])


def _echo_keys(cfg: dict[str, str], extra: dict[str, object]) -> dict[str, str]:
    echo = dict(cfg)
    for key, value in extra.items():
        if value is not None:
            echo[key] = str(value)
    echo.pop("out", None)
    return echo


def _load_dataset(path: str, t_m: int) -> Dataset:
    if t_m is None:
        raise click.UsageError("--tm is required")
    return read_dataset_csv(path, t_m)


def _labels_for(data: Dataset, path: str) -> np.ndarray:
    table = read_labels_csv(path)
    try:
        return np.array([table[s.id] for s in data.subjects], dtype=np.int64)
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing label for subject {exc}") from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

@click.group()
def cli():
    """Lifetime clustering toolkit."""


@cli.command()
@click.option("--clusters", default="C1,C2,C3", show_default=True,
              help="Comma-separated subset of C1,C2,C3.")
@click.option("--n", "n_per_cluster", type=int, default=10000, show_default=True)
@click.option("--tm", type=int, default=150, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def synth(clusters, n_per_cluster, tm, seed, out):
    """Generate the synthetic benchmark and write data plus labels CSVs."""
    names = tuple(c.strip() for c in clusters.split(",") if c.strip())
    try:
        spec = SynthSpec(clusters=names, n_per_cluster=n_per_cluster,
                         t_m=tm, seed=seed)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    data, labels = generate(spec)
    out_path = Path(out)
    labels_path = out_path.with_name(out_path.stem + "_labels.csv")
    with _staged() as staging:
        if out_path.parent != Path("."):
            staging.directory(out_path.parent)
        write_dataset_csv(data, staging.file(out_path))
        write_labels_csv([s.id for s in data.subjects], labels,
                         staging.file(labels_path))
    click.echo(f"wrote {len(data)} subjects to {out_path} (labels: {labels_path})")


_train_options = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False)),
    click.option("--k", type=int, default=None),
    click.option("--seed", type=int, default=None),
    click.option("--tau", type=int, default=None),
    click.option("--epochs", type=int, default=None),
    click.option("--batch-size", "batch_size", type=int, default=None),
    click.option("--learning-rate", "learning_rate", type=float, default=None),
    click.option("--hidden-layers", "hidden_layers", type=int, default=None),
    click.option("--hidden-units", "hidden_units", type=int, default=None),
    click.option("--activation", type=click.Choice(["relu", "tanh"]), default=None),
    click.option("--batch-norm", "batch_norm", type=int, default=None),
    click.option("--l2", type=float, default=None),
    click.option("--early-stop-patience", "early_stop_patience", type=int, default=None),
    click.option("--divergence", type=click.Choice(["kuiper_ub", "mmd"]), default=None),
    click.option("--pair-samples", "pair_samples", type=int, default=None),
    click.option("--termination", type=click.Choice(["observed", "learnable", "fixed"]),
                 default=None),
    click.option("--w-fixed", "w_fixed", type=int, default=None),
    click.option("--event-features", "event_features", type=int, default=None,
                 help="1 to add event-window summary features, 0 for covariates only."),
]


def _with_train_options(fn):
    for option in reversed(_train_options):
        fn = option(fn)
    return fn


@cli.command(name="train")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--tm", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@_with_train_options
def train_cmd(data_path, tm, out, config_path, **flags):
    """Train a clustering model and write a checkpoint."""
    cfg = _resolve(config_path, {**flags, "data": data_path, "tm": tm})
    config = _train_config(cfg)
    data_path = cfg.get("data") or None
    if data_path is None:
        raise click.UsageError("--data is required (flag or config)")
    data = _load_dataset(data_path, _get_int(cfg, "tm"))
    result = train(data, config)
    out_dir = Path(out) if out else _default_out_dir(config.seed)
    echo = _echo_keys(cfg, {})
    with _staged() as staging:
        staging.directory(out_dir)
        write_config(echo, staging.file(out_dir / "config_echo.txt"))
        save_checkpoint(result.params, staging.file(out_dir / "checkpoint.txt"),
                        config_echo=echo, seed=config.seed)
        _write_train_log(result.log, staging.file(out_dir / "train_log.csv"))
    click.echo(f"best validation objective: {result.best_val_objective!r}")
    click.echo(f"outputs in {out_dir}")


@cli.command(name="assign")
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tm", type=int, required=True)
@click.option("--tau", type=int, default=None, help="Defaults to the checkpoint's tau.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def assign_cmd(checkpoint_path, data_path, tm, tau, out):
    """Assign subjects to clusters with a trained checkpoint."""
    params = load_checkpoint(checkpoint_path)
    if tau is None:
        echoed = [line for line in Path(checkpoint_path).read_text(encoding="utf-8")
                  .splitlines() if line.startswith("config.tau=")]
        tau = int(echoed[0].split("=", 1)[1]) if echoed else int(_DEFAULTS["tau"])
    data = _load_dataset(data_path, tm)
    labels, alpha = assign(params, data, tau)
    with _staged() as staging:
        write_labels_csv([s.id for s in data.subjects], labels,
                         staging.file(Path(out)), alpha=alpha)
    click.echo(f"wrote labels for {len(data)} subjects to {out}")


@cli.command(name="eval")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--tm", type=int, required=True)
@click.option("--labels", "labels_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--true-labels", "true_labels_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--w-fixed", "w_fixed", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
def eval_cmd(data_path, tm, labels_path, true_labels_path, w_fixed, out):
    """Score a hard clustering; writes the report, curve CSV and figure."""
    data = _load_dataset(data_path, tm)
    labels = _labels_for(data, labels_path)
    true_labels = _labels_for(data, true_labels_path) if true_labels_path else None
    flags = evaluation_event_flags(data, w_fixed)
    report, curves = evaluate(data.observed_lifetimes(), flags, labels,
                              data.t_max, true_labels=true_labels)
    mapping = {"n_subjects": len(data), **report.as_mapping()}
    out_dir = Path(out) if out else _default_out_dir(0)
    echo = {"data": data_path, "tm": tm, "labels": labels_path,
            "w_fixed": w_fixed}
    if true_labels_path:
        echo["true_labels"] = true_labels_path
    with _staged() as staging:
        staging.directory(out_dir)
        write_config(echo, staging.file(out_dir / "config_echo.txt"))
        _write_report(mapping, staging.file(out_dir / "report.txt"))
        _write_curves_csv(curves, staging.file(out_dir / "curves.csv"))
        save_curves_figure(curves, staging.file(out_dir / "curves.png"))
    for key, value in mapping.items():
        click.echo(f"{key}={_format_value(value)}")


@cli.command(name="kuiper-test")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--terms", type=int, default=10000, show_default=True)
def kuiper_cmd(path_a, path_b, terms):
    """Two-sample Kuiper test between two lifetime sample files."""
    sample_a = _read_sample(path_a)
    sample_b = _read_sample(path_b)
    t_max = int(max(sample_a[0].max(), sample_b[0].max()))
    curve_a = km_curve(sample_a[0], np.ones(len(sample_a[0])), sample_a[1], t_max)
    curve_b = km_curve(sample_b[0], np.ones(len(sample_b[0])), sample_b[1], t_max)
    result = kuiper_test(curve_a, curve_b, terms=terms)
    for key, value in [("d_plus", result.d_plus), ("d_minus", result.d_minus),
                       ("v_stat", result.v_stat), ("m_effective", result.effective_m),
                       ("lambda", result.lam), ("p_lower", result.p_lower),
                       ("p_upper", result.p_upper), ("p_reference", result.p_reference)]:
        click.echo(f"{key}={_format_value(value)}")


def _read_sample(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Lifetime sample file: one lifetime per row, optional event column."""
    lifetimes, events = [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                lifetime = int(row[0])
            except ValueError:
                if not lifetimes:
                    continue  # header
                raise DataFormatError(f"{path}: bad lifetime cell {row[0]!r}")
            try:
                event = float(row[1]) if len(row) > 1 and row[1].strip() != "" else 1.0
            except ValueError:
                raise DataFormatError(f"{path}: bad event cell {row[1]!r}")
            lifetimes.append(lifetime)
            events.append(event)
    if not lifetimes:
        raise DataFormatError(f"{path}: no samples")
    return np.array(lifetimes, dtype=np.int64), np.array(events)


@cli.command(name="cv")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--tm", type=int, default=None)
@click.option("--true-labels", "true_labels_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--folds", type=int, default=None)
@click.option("--n-train", "n_train", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@_with_train_options
def cv_cmd(data_path, tm, true_labels_path, folds, n_train, out, config_path, **flags):
    """K-fold cross-validation: train per fold, score the held-out fold."""
    cfg = _resolve(config_path, {**flags, "folds": folds, "n_train": n_train,
                                 "data": data_path, "tm": tm,
                                 "true_labels": true_labels_path})
    config = _train_config(cfg)
    data_path = cfg.get("data") or None
    if data_path is None:
        raise click.UsageError("--data is required (flag or config)")
    data = _load_dataset(data_path, _get_int(cfg, "tm"))
    true_labels_path = cfg.get("true_labels") or None
    true_labels = _labels_for(data, true_labels_path) if true_labels_path else None
    outcomes = cross_validate(
        data, config, n_folds=_get_int(cfg, "folds"),
        n_train=_get_int(cfg, "n_train"), true_labels=true_labels,
        w_fixed=_get_int(cfg, "w_fixed"))
    summary = aggregate_reports(outcomes)
    out_dir = Path(out) if out else _default_out_dir(config.seed)
    echo = _echo_keys(cfg, {})
    with _staged() as staging:
        staging.directory(out_dir)
        write_config(echo, staging.file(out_dir / "config_echo.txt"))
        for outc in outcomes:
            mapping = {"fold": outc.fold,
                       "n_subjects": len(outc.test_indices),
                       **outc.report.as_mapping()}
            _write_report(mapping, staging.file(out_dir / f"report_fold{outc.fold}.txt"))
            _write_curves_csv(outc.curves,
                              staging.file(out_dir / f"curves_fold{outc.fold}.csv"))
            save_curves_figure(outc.curves,
                               staging.file(out_dir / f"curves_fold{outc.fold}.png"),
                               title=f"fold {outc.fold}")
        _write_report(summary, staging.file(out_dir / "report.txt"))
    for key, value in summary.items():
        click.echo(f"{key}={_format_value(value)}")
    click.echo(f"outputs in {out_dir}")


# ---------------------------------------------------------------------------
# entry point with the documented exit codes
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (DataFormatError, OSError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
