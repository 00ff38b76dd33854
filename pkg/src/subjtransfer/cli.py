"""Command-line entry point: ``subjtransfer synth | run | sweep | report``.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 partial sweep failure.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Sequence

import click
from pydantic import ValidationError

from .config import ExperimentConfig, dump_config, load_config
from .dataio import DatasetError, SubjectDataset, load_subjects, save_subjects, synth_generate
from .figures import FigureArtifacts, emit_figures
from .protocol import EvalReport, ProtocolError, preprocess_all, rows_to_csv, run_target_ratios
from .transfer import LossRecord, save_bundle
from .transfer.bundle import write_loss_history

log = logging.getLogger("subjtransfer")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_PARTIAL = 0, 1, 2, 3


class ValidationFailure(click.ClickException):
    exit_code = EXIT_VALIDATION


class RuntimeFailure(click.ClickException):
    exit_code = EXIT_RUNTIME


class PartialFailure(click.ClickException):
    exit_code = EXIT_PARTIAL


def _load_cfg(ctx: click.Context) -> ExperimentConfig:
    obj = ctx.obj
    try:
        cfg = load_config(obj["config"])
    except ValidationError as exc:
        errs = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
        raise ValidationFailure(f"invalid config: {errs}") from None
    except (OSError, ValueError) as exc:
        raise ValidationFailure(f"invalid config: {exc}") from None
    updates: dict[str, Any] = {}
    if obj["out"] is not None:
        updates["output_dir"] = str(obj["out"])
    if obj["seed"] is not None:
        updates["seeds"] = [obj["seed"]]
    return cfg.model_copy(update=updates) if updates else cfg


def _subjects(cfg: ExperimentConfig) -> list[SubjectDataset]:
    try:
        if cfg.dataset_root:
            return load_subjects(cfg.dataset_root)
        if cfg.synth is not None:
            return synth_generate(cfg.synth.build())
    except DatasetError as exc:
        raise ValidationFailure(f"[dataio] {exc}") from None
    raise ValidationFailure("config needs either dataset_root or a synth section")


@click.group()
@click.option("--config", "config", type=click.Path(dir_okay=False), default=None, help="YAML experiment config.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory (overrides config).")
@click.option("--seed", type=int, default=None, help="Single experiment seed (overrides config seeds).")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes for sweeps.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx: click.Context, config: str | None, out: str | None, seed: int | None, jobs: int, verbose: int) -> None:
    """Target-centred subject transfer augmentation for motor-imagery EEG."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config, "out": out, "seed": seed, "jobs": max(1, jobs)}


@main.command()
@click.pass_context
def synth(ctx: click.Context) -> None:
    """Generate the synthetic dataset described by the config's synth section."""
    cfg = _load_cfg(ctx)
    if cfg.synth is None:
        raise ValidationFailure("synth: config has no synth section")
    root = Path(cfg.output_dir)
    try:
        subjects = synth_generate(cfg.synth.build())
        save_subjects(subjects, root)
    except DatasetError as exc:
        raise RuntimeFailure(f"[dataio] {exc}") from None
    click.echo(f"wrote {len(subjects)} subjects to {root}")


def _write_run_outputs(out: Path, cfg: ExperimentConfig, report: EvalReport) -> None:
    out.mkdir(parents=True, exist_ok=True)
    report.write(out)
    dump_config(cfg, out / "config.resolved.yaml")
    figs = FigureArtifacts()
    for r in report.results:
        tag = f"{r.subject}_{r.method}_x{r.ratio}_seed{r.seed}"
        if r.bundle is not None:
            bdir = out / "bundles" / f"{r.subject}_seed{r.seed}"
            if not bdir.exists():
                save_bundle(r.bundle, bdir)
        if r.selection is not None:
            (out / "selections").mkdir(exist_ok=True)
            (out / "selections" / f"{r.subject}_seed{r.seed}.json").write_text(
                json.dumps(r.selection.to_json(), sort_keys=True) + "\n")
        for name, spec in r.spectra.items():
            (figs.psd if spec.kind == "psd" else figs.csd)[f"{tag}_{name}"] = spec
        for name, wave in r.averaged.items():
            figs.averaged[f"{tag}_{name}"] = (wave, r.train_set.trials.fs if r.train_set else 1.0,
                                              r.train_set.trials.channel_names if r.train_set else ())
    if not figs.empty():
        emit_figures(figs, out / "figures")


@main.command()
@click.option("--target", default=None, help="Target subject id (default: every subject in turn).")
@click.option("--method", type=click.Choice(["none", "noise", "multiple", "flip", "cycle_gan"]), default=None)
@click.option("--ratio", type=click.IntRange(min=1), default=None)
@click.pass_context
def run(ctx: click.Context, target: str | None, method: str | None, ratio: int | None) -> None:
    """One method/ratio cell, each target in turn; writes report, bundles and spectra."""
    cfg = _load_cfg(ctx)
    if method is not None or ratio is not None:
        cfg = cfg.model_copy(update={"augment": cfg.augment.model_copy(
            update={k: v for k, v in (("method", method), ("ratio", ratio)) if v is not None})})
    subjects = _subjects(cfg)
    ids = [s.subject_id for s in subjects]
    targets = [target] if target else (cfg.targets or ids)
    unknown = [t for t in targets if t not in ids]
    if unknown:
        raise ValidationFailure(f"unknown target subject(s) {unknown}; available {ids}")
    report = EvalReport()
    try:
        data = preprocess_all(subjects, cfg.preprocess.build())
        for seed in cfg.seeds:
            pcfg = cfg.protocol(seed=seed)
            for tid in targets:
                report.results.extend(run_target_ratios(data, tid, pcfg, [pcfg.ratio], keep_artifacts=True))
    except ProtocolError as exc:
        raise RuntimeFailure(str(exc)) from None
    out = Path(cfg.output_dir)
    _write_run_outputs(out, cfg, report)
    for row in report.summary():
        click.echo(f"{row['method']} x{row['ratio']}: {row['Mean (SD)']} median {row['Median']} "
                   f"range {row['Range (Max–Min)']}")


# ---------------------------------------------------------------- sweep

_WORKER: dict[str, Any] = {}


def _init_worker(subjects: list[SubjectDataset]) -> None:
    _WORKER["subjects"] = subjects


def _sweep_cell(cell: dict[str, Any]) -> dict[str, Any]:
    cfg = ExperimentConfig.model_validate(cell["config"])
    pcfg = cfg.protocol(method=cell["method"], seed=cell["seed"])
    pcfg = replace(pcfg, spectral=False)
    try:
        results = run_target_ratios(_WORKER["subjects"], cell["target"], pcfg, cell["ratios"], keep_artifacts=True)
    except Exception as exc:  # reported per cell, the sweep continues
        return {"cell": {k: cell[k] for k in ("target", "method", "seed", "ratios")}, "error": str(exc)}
    return {"rows": [r.row() | {"n_train_augmented": r.n_train_augmented, "n_test": r.n_test} for r in results],
            "losses": [(r.subject, r.seed, [asdict(h) for h in r.bundle.loss_history]) for r in results[:1]
                       if r.bundle is not None]}


def sweep_cells(cfg: ExperimentConfig, subject_ids: Sequence[str]) -> list[dict[str, Any]]:
    """One work unit per (target, method, seed); cycle_gan units cover every ratio with one trained bundle."""
    targets = cfg.targets or list(subject_ids)
    resolved = cfg.resolved()
    return [
        {"config": resolved, "target": t, "method": m, "seed": s, "ratios": [0] if m == "none" else list(cfg.ratios)}
        for s in cfg.seeds for m in cfg.methods for t in targets
    ]


@main.command()
@click.pass_context
def sweep(ctx: click.Context) -> None:
    """Every (target, method, ratio, seed) cell; aggregate CSV plus per-ratio summary rows."""
    cfg = _load_cfg(ctx)
    if not cfg.ratios:
        raise ValidationFailure("ratios: sweep needs a nonempty ratios list")
    subjects = _subjects(cfg)
    ids = [s.subject_id for s in subjects]
    unknown = [t for t in (cfg.targets or []) if t not in ids]
    if unknown:
        raise ValidationFailure(f"unknown target subject(s) {unknown}")
    try:
        data = preprocess_all(subjects, cfg.preprocess.build())
    except ProtocolError as exc:
        raise RuntimeFailure(str(exc)) from None
    cells = sweep_cells(cfg, ids)
    jobs = ctx.obj["jobs"]
    if jobs > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(data,)) as pool:
            outcomes = list(pool.map(_sweep_cell, cells))
    else:
        _init_worker(data)
        outcomes = [_sweep_cell(c) for c in cells]

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted((r for o in outcomes for r in o.get("rows", [])),
                  key=lambda r: (r["method"], r["ratio"], r["subject"], r["seed"]))
    failures = [o for o in outcomes if "error" in o]
    report = _report_from_rows(rows)
    report.write(out)
    (out / "aggregate.csv").write_text(
        rows_to_csv(rows, ["subject", "method", "ratio", "seed", "accuracy", "n_train_augmented", "n_test"]))
    dump_config(cfg, out / "config.resolved.yaml")
    for o in outcomes:
        for subject, seed, hist in o.get("losses", []):
            (out / "loss_history").mkdir(exist_ok=True)
            write_loss_history([LossRecord(**h) for h in hist], out / "loss_history" / f"{subject}_seed{seed}.csv")
    emit_figures(FigureArtifacts(ratio_sweep=_ratio_rows(report)), out / "figures")
    (out / "failures.json").write_text(json.dumps([f["cell"] | {"error": f["error"]} for f in failures],
                                                  indent=2, sort_keys=True) + "\n")
    for row in report.summary():
        click.echo(f"{row['method']} x{row['ratio']}: {row['Mean (SD)']}")
    if failures:
        for f in failures:
            click.echo(f"FAILED {f['cell']}: {f['error']}", err=True)
        raise PartialFailure(f"{len(failures)} of {len(cells)} sweep cells failed (see failures.json)")


def _report_from_rows(rows: list[dict[str, Any]]) -> EvalReport:
    from .protocol import SubjectResult

    return EvalReport([SubjectResult(r["subject"], r["method"], r["ratio"], r["seed"], r["accuracy"], 0,
                                     r.get("n_train_augmented", 0), r.get("n_test", 0)) for r in rows])


def _ratio_rows(report: EvalReport) -> list[dict[str, Any]]:
    return [{"method": r["method"], "ratio": r["ratio"], "mean": r["mean"], "sd": r["sd"]} for r in report.summary()]


@main.command()
@click.argument("result_dir", type=click.Path(exists=True, file_okay=False), required=False)
@click.pass_context
def report(ctx: click.Context, result_dir: str | None) -> None:
    """Re-render figures from a run/sweep output directory."""
    cfg = _load_cfg(ctx)
    src = Path(result_dir or cfg.output_dir)
    path = src / "accuracy_by_seed.csv"
    if not path.is_file():
        raise ValidationFailure(f"{path} not found; run or sweep first")
    with open(path, newline="") as fh:
        rows = [{"subject": r["subject"], "method": r["method"], "ratio": int(r["ratio"]), "seed": int(r["seed"]),
                 "accuracy": float(r["accuracy"])} for r in csv.DictReader(fh)]
    rep = _report_from_rows(rows)
    files = emit_figures(FigureArtifacts(ratio_sweep=_ratio_rows(rep)), src / "figures")
    for row in rep.summary():
        click.echo(f"{row['method']:>9} x{row['ratio']:<3} {row['Mean (SD)']:>14} {row['Median']:>7} {row['Range (Max–Min)']}")
    click.echo(f"wrote {len(files)} files to {src / 'figures'}")


def cli(argv: Sequence[str] | None = None) -> int:
    """Entry point mapping click's usage errors onto the validation exit code."""
    try:
        main.main(args=list(argv) if argv is not None else None, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code if isinstance(exc, (ValidationFailure, RuntimeFailure, PartialFailure)) else EXIT_VALIDATION
    except click.exceptions.Abort:
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(cli())
