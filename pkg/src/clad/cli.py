"""Command-line entry point driving the whole pipeline.

Subcommands: gen | ingest | train | grid | score | eval | kappa |
compare | serve. Exit codes: 0 success, 1 usage error, 2 data or
validation error, 3 internal error; all errors go to stderr. Report
commands write figures next to their delimited outputs.

Every command accepts ``--config run.yaml`` (see docs/config.md);
explicit flags override config values. Runs are reproducible: the same
config, inputs, and seed produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import data as data_mod
from . import evaluation, figures, gbdt, mlp, tuning
from .cost import CostParams, FpVariant, cost_weights, dataset_costs, money_str
from .errors import CladError, ParseError, ValidationError
from .model_io import load_model, model_fingerprint, save_model
from .scoring import evaluate_model, score_dataset
from .service import ModelRegistry, SessionStore, create_app


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ParseError(f"config file {path}: {exc}") from None
    if not isinstance(loaded, dict):
        raise ParseError(f"config file {path}: top level must be a mapping")
    return loaded


def _cost_params(config: dict, alpha, mr, admin_cost, fp_variant) -> CostParams:
    section = dict(config.get("cost", {}))
    if alpha is not None:
        section["alpha"] = alpha
    if mr is not None:
        section["mr"] = mr
    if admin_cost is not None:
        section["admin_cost"] = admin_cost
    if fp_variant is not None:
        section["fp_variant"] = fp_variant
    section.setdefault("alpha", 0.2)
    section.setdefault("mr", 0.05)
    section.setdefault("admin_cost", 10.0)
    section.setdefault("fp_variant", "full_limit")
    return CostParams(
        alpha=float(section["alpha"]),
        mr=float(section["mr"]),
        admin_cost=float(section["admin_cost"]),
        fp_variant=FpVariant(section["fp_variant"]),
    )


def _cost_options(fn):
    for opt in (
        click.option("--alpha", type=float, default=None, help="Adjustment rate."),
        click.option("--mr", type=float, default=None, help="Minimum-payment rate."),
        click.option("--admin-cost", type=float, default=None, help="Administrative cost (BS)."),
        click.option(
            "--fp-variant",
            type=click.Choice([v.value for v in FpVariant]),
            default=None,
            help="False-positive exposure variant.",
        ),
    ):
        fn = opt(fn)
    return fn


def _echo_summary(ds) -> None:
    for line in data_mod.summarize(ds).lines():
        click.echo(line)


@click.group()
def cli() -> None:
    """Cost-sensitive limit-adjustment decision engine."""


@cli.command()
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output CSV path.")
@click.option("--n", "n_records", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--positive-ratio", type=float, default=0.7454, show_default=True)
@click.option("--mean-limit", type=float, default=1463.72, show_default=True)
@click.option("--label-noise", type=float, default=0.05, show_default=True)
def gen(out, n_records, seed, positive_ratio, mean_limit, label_noise):
    """Generate a calibrated synthetic case file and print its summary."""
    config = data_mod.SyntheticConfig(
        n_records=n_records,
        positive_ratio=positive_ratio,
        mean_limit=mean_limit,
        label_noise=label_noise,
        seed=seed,
    )
    ds = data_mod.generate_synthetic(config)
    data_mod.serialize(ds, out)
    click.echo(f"wrote {len(ds)} records to {out}")
    if len(ds):
        _echo_summary(ds)


@cli.command()
@click.argument("data", type=click.Path(exists=False))
@click.option("--no-labels", is_flag=True, help="File has no label column.")
def ingest(data, no_labels):
    """Validate a case file and print its summary."""
    ds = data_mod.ingest(data, has_labels=not no_labels)
    click.echo(f"ingested {len(ds)} records from {data}")
    if ds.has_labels and len(ds):
        _echo_summary(ds)


def _params_for(family: str, config: dict, params_json: str | None, seed: int | None):
    section = dict(config.get(family, {}))
    if params_json:
        try:
            section.update(json.loads(params_json))
        except json.JSONDecodeError as exc:
            raise ParseError(f"--params is not valid JSON: {exc}") from None
    if seed is not None:
        section["seed"] = seed
    try:
        if family == "gbdt":
            return gbdt.GbdtParams(**section)
        return mlp.MlpParams(**{**section, "hidden_layers": tuple(section.get("hidden_layers", (4, 4, 6, 8)))})
    except TypeError as exc:
        raise ValidationError(f"bad {family} hyperparameter: {exc}") from None


@cli.command()
@click.option("--data", type=click.Path(), required=True)
@click.option("--family", type=click.Choice(["gbdt", "mlp"]), default="gbdt", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Model file path.")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--params", "params_json", default=None, help="JSON hyperparameter overrides.")
@click.option("--seed", type=int, default=None)
@_cost_options
def train(data, family, out, config_path, params_json, seed, alpha, mr, admin_cost, fp_variant):
    """Train one cost-sensitive model and write the model file."""
    config = _load_config(config_path)
    cost = _cost_params(config, alpha, mr, admin_cost, fp_variant)
    ds = data_mod.ingest(data)
    params = _params_for(family, config, params_json, seed)
    weights = cost_weights(ds.labels(), dataset_costs(ds, cost))
    model = gbdt.train(ds, params, weights) if family == "gbdt" else mlp.train(ds, params, weights)
    save_model(model, out)
    click.echo(f"trained {family} on {len(ds)} records -> {out} ({model_fingerprint(Path(out).read_bytes())})")


@cli.command()
@click.option("--data", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(), required=True, help="Config with a grid section.")
@click.option("--k", type=int, default=None, help="Folds (default from config, else 10).")
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=os.cpu_count(), show_default="CPU count")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@_cost_options
def grid(data, config_path, k, seed, jobs, out_dir, alpha, mr, admin_cost, fp_variant):
    """Exhaustive grid search with k-fold CV; write the sweep report."""
    config = _load_config(config_path)
    cost = _cost_params(config, alpha, mr, admin_cost, fp_variant)
    grid_section = config.get("grid")
    if not grid_section or "space" not in grid_section:
        raise ValidationError("config must provide grid.family and grid.space")
    space = tuning.SearchSpace(
        model_family=grid_section.get("family", "gbdt"),
        grid={name: tuple(values) for name, values in grid_section["space"].items()},
    )
    folds_section = dict(config.get("folds", {}))
    k = k if k is not None else int(folds_section.get("k", 10))
    seed = seed if seed is not None else int(folds_section.get("seed", 0))
    stratified = bool(folds_section.get("stratified", True))

    ds = data_mod.ingest(data)
    plan = tuning.make_folds(ds, k=k, seed=seed, stratified=stratified)
    click.echo(f"grid: {space.size} combinations x {k} folds ({space.model_family})")
    ranking = tuning.grid_search(ds, space, cost, plan, base_seed=seed, jobs=jobs)
    best = tuning.select_best(ranking)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "trials.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "mean_cost", "mean_accuracy", "error", "params", "fold_costs"])
        for rank, t in enumerate(ranking, start=1):
            writer.writerow(
                [rank, f"{t.mean_cost:.4f}", f"{t.mean_accuracy:.6f}", t.error or "", t.params_key,
                 ";".join(f"{c:.4f}" for c in t.fold_costs)]
            )
    (out / "best_params.json").write_text(
        json.dumps({"family": space.model_family, "params": best.params, "mean_cost": best.mean_cost,
                    "mean_accuracy": best.mean_accuracy}, indent=2, sort_keys=True, default=list)
        + "\n",
        encoding="utf-8",
    )
    (out / "report.txt").write_text(
        "\n".join([f"trials {len(ranking)} of {space.size} combinations"] + tuning.ranking_lines(ranking)) + "\n",
        encoding="utf-8",
    )
    figures.grid_costs([t.mean_cost for t in ranking], out / "grid_costs.png")
    click.echo(f"best {space.model_family}: {best.params_key} mean_cost={best.mean_cost:.2f}")
    click.echo(f"report written to {out}")


@cli.command()
@click.option("--data", type=click.Path(), required=True)
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Scores CSV path.")
@click.option("--no-labels", is_flag=True)
@_cost_options
def score(data, model_path, out, no_labels, alpha, mr, admin_cost, fp_variant):
    """Score cases: probability, threshold, decision, instance costs."""
    cost = _cost_params({}, alpha, mr, admin_cost, fp_variant)
    ds = data_mod.ingest(data, has_labels=not no_labels)
    model = load_model(model_path)
    scored = score_dataset(ds, model, cost)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "probability", "threshold", "c_fp", "c_fn", "decision"])
        for case in scored:
            writer.writerow(
                [case.record_id, f"{case.probability:.6f}", f"{case.threshold:.6f}",
                 money_str(case.costs.c_fp), money_str(case.costs.c_fn), case.decision]
            )
    click.echo(f"scored {len(scored)} cases -> {out}")


@cli.command("eval")
@click.option("--data", type=click.Path(), required=True)
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--label", default=None, help="Report label (default: model file stem).")
@click.option("--threshold", type=float, default=None,
              help="Fixed decision threshold instead of the per-case cost cutoff.")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@_cost_options
def eval_cmd(data, model_path, label, threshold, out_dir, alpha, mr, admin_cost, fp_variant):
    """Evaluate a model on labeled cases; write report, CSV, and figures."""
    cost = _cost_params({}, alpha, mr, admin_cost, fp_variant)
    ds = data_mod.ingest(data)
    model = load_model(model_path)
    label = label or Path(model_path).stem
    report, scored = evaluate_model(label, ds, model, cost, threshold=threshold)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.json").write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with (out / "cases.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "label", "probability", "threshold", "decision", "c_fp", "c_fn"])
        for rec, case in zip(ds.records, scored):
            decision = case.decision if threshold is None else int(case.probability > threshold)
            writer.writerow(
                [case.record_id, rec.label, f"{case.probability:.6f}", f"{case.threshold:.6f}",
                 decision, money_str(case.costs.c_fp), money_str(case.costs.c_fn)]
            )
    m = report.matrix
    lines = [
        f"model            {report.label}",
        f"dataset          {report.dataset_fingerprint} ({m.n} cases)",
        f"tp/fp/fn/tn      {m.tp}/{m.fp}/{m.fn}/{m.tn}",
        f"accuracy         {report.accuracy:.4f}",
        f"total cost       {money_str(report.total_cost)} BS",
    ]
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    figures.confusion_heatmap(m, out / "confusion.png", title=f"{report.label} vs outcomes")
    if isinstance(model, gbdt.GbdtModel):
        figures.importance_bars(list(model.schema), list(model.feature_importance()), out / "importance.png")
    for line in lines:
        click.echo(line)


@cli.command()
@click.option("--matrix", "matrix_text", default=None, help="Counts tp,fp,fn,tn.")
@click.option("--matrix-file", type=click.Path(), default=None, help="File holding one tp,fp,fn,tn record.")
@click.option("--committee", "committee_path", type=click.Path(), default=None,
              help="Decision CSV of the committee rater.")
@click.option("--model-decisions", "model_path", type=click.Path(), default=None,
              help="Decision CSV of the model rater.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
def kappa(matrix_text, matrix_file, committee_path, model_path, out_dir):
    """Two-rater agreement from a 4-count matrix or two decision files."""
    if matrix_text and (committee_path or model_path):
        raise click.UsageError("give either --matrix or two decision files, not both")
    if matrix_file:
        matrix_text = Path(matrix_file).read_text(encoding="utf-8").strip()
    if matrix_text:
        cm = evaluation.parse_matrix(matrix_text)
    elif committee_path and model_path:
        committee = _read_decisions(committee_path)
        model = _read_decisions(model_path)
        shared = sorted(set(committee) & set(model))
        if not shared:
            raise ValidationError("the two decision files share no record ids")
        cm = evaluation.agreement_matrix([committee[rid] for rid in shared], [model[rid] for rid in shared])
    else:
        raise click.UsageError("provide --matrix/--matrix-file or both --committee and --model-decisions")
    report = evaluation.cohen_kappa(cm)
    click.echo(f"kappa = {report.kappa:.2f}")
    for line in report.lines():
        click.echo(line)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "agreement.json").write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n",
                                            encoding="utf-8")
        figures.agreement_panel(report, out / "agreement.png")
        click.echo(f"report written to {out}")


def _read_decisions(path: str) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "record_id" not in reader.fieldnames or "decision" not in reader.fieldnames:
            raise ValidationError(f"{path}: needs 'record_id' and 'decision' columns")
        for row_no, row in enumerate(reader, start=2):
            if row["decision"] not in ("0", "1"):
                raise ParseError(f"{path}: row {row_no}: decision must be 0 or 1", row=row_no)
            out[row["record_id"]] = int(row["decision"])
    return out


@cli.command()
@click.argument("report_a", type=click.Path())
@click.argument("report_b", type=click.Path())
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
def compare(report_a, report_b, out_dir):
    """Diff two eval reports computed over the same dataset."""
    a = evaluation.EvalReport.from_dict(json.loads(Path(report_a).read_text(encoding="utf-8")))
    b = evaluation.EvalReport.from_dict(json.loads(Path(report_b).read_text(encoding="utf-8")))
    summary = evaluation.compare_models(a, b)
    for line in summary.lines():
        click.echo(line)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.json").write_text(
            json.dumps(
                {"a": a.as_dict(), "b": b.as_dict(), "accuracy_delta": summary.accuracy_delta,
                 "cost_delta": money_str(summary.cost_delta), "fp_delta": summary.fp_delta,
                 "winner_by_cost": summary.winner_by_cost, "winner_by_accuracy": summary.winner_by_accuracy},
                indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        figures.comparison_bars(a, b, summary, out / "comparison.png")
        click.echo(f"report written to {out}")


@cli.command()
@click.option("--store", "store_dir", type=click.Path(file_okay=False), required=True)
@click.option("--data", type=click.Path(), required=True, help="Case file served for scoring.")
@click.option("--no-labels", is_flag=True)
@click.option("--models-dir", type=click.Path(file_okay=False), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8570, show_default=True)
@click.option("--token", default=None, envvar="CLAD_API_TOKEN",
              help="Static API token; unset disables auth.")
@_cost_options
def serve(store_dir, data, no_labels, models_dir, host, port, token, alpha, mr, admin_cost, fp_variant):
    """Run the scoring and decision-recording service."""
    import uvicorn

    del alpha  # alpha is per-session; only mr/admin/variant are service-level
    cost = _cost_params({}, None, mr, admin_cost, fp_variant)
    ds = data_mod.ingest(data, has_labels=not no_labels)
    app = create_app(
        store=SessionStore(store_dir),
        registry=ModelRegistry(models_dir),
        cases={rec.record_id: rec for rec in ds.records},
        dataset=ds if ds.has_labels else None,
        mr=cost.mr,
        admin_cost=cost.admin_cost,
        fp_variant=cost.fp_variant.value,
        token=token,
    )
    uvicorn.run(app, host=host, port=port)


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except CladError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except Exception as exc:  # pragma: no cover - internal faults
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
