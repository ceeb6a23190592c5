"""Command-line surface: prompt-preview, extract, train, evaluate, compare,
fewshot.

Settings come from an optional JSON config file with flag overrides (flags
win). Secrets are only ever read from the environment variable named by the
provider settings. Exit codes: 0 success (possibly with per-record failures),
2 configuration or validation error, 3 provider exhaustion.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

import click

from . import dataset as ds
from . import evalkit, models, prompts, vorc
from .llm import CompletionRequest, ProviderConfigError, ProviderError, configure_provider
from .schema import SchemaError, load_schema

EXIT_CONFIG = 2
EXIT_PROVIDER = 3

_CONFIG_KEYS = ("schema", "templates", "corpus", "provider", "budget",
                "parallelism", "seed", "output_dir")


class CliState:
    def __init__(self, config: dict, seed: int | None, output_dir: str | None, as_json: bool):
        self.config = config
        self.seed = seed if seed is not None else config.get("seed", 7)
        self.output_dir = Path(output_dir or config.get("output_dir", "."))
        self.as_json = as_json

    def setting(self, key: str, override=None, required: bool = False):
        value = override if override is not None else self.config.get(key)
        if required and value is None:
            _fail(f"missing required setting {key!r} (flag or config file)")
        return value


def _fail(message: str, code: int = EXIT_CONFIG):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        _fail(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        _fail(f"config file {p} is not valid JSON: {e}")
    unknown = set(doc) - set(_CONFIG_KEYS)
    if unknown:
        _fail(f"unknown config keys: {', '.join(sorted(unknown))}")
    return doc


def _provider_from(state: CliState, replay_script: str | None):
    if replay_script is not None:
        settings = {"kind": "replay", "script": replay_script}
    else:
        settings = state.setting("provider", required=True)
    try:
        kind = settings.get("kind")
        return configure_provider(kind, {k: v for k, v in settings.items() if k != "kind"})
    except ProviderConfigError as e:
        _fail(str(e))


def _schema_from(state: CliState, schema_path: str | None):
    path = state.setting("schema", schema_path, required=True)
    try:
        return load_schema(path)
    except (SchemaError, OSError) as e:
        _fail(str(e))


def _templates_from(state: CliState, templates_path: str | None, schema):
    path = state.setting("templates", templates_path, required=True)
    try:
        return prompts.load_templates(path, schema)
    except prompts.PromptError as e:
        _fail(str(e))


def _read_corpus(path: Path) -> list[dict]:
    entries = []
    try:
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                if "id" not in doc or "text" not in doc:
                    _fail(f"{path}:{lineno}: corpus lines need 'id' and 'text'")
                entries.append(doc)
    except OSError as e:
        _fail(f"cannot read corpus: {e}")
    except json.JSONDecodeError as e:
        _fail(f"{path}: invalid JSON line: {e}")
    return entries


@click.group()
@click.option("--config", "config_path", type=str, default=None,
              help="JSON config file; flags override its values.")
@click.option("--seed", type=int, default=None, help="Random seed for splits.")
@click.option("--output-dir", type=str, default=None, help="Directory for outputs.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def main(ctx, config_path, seed, output_dir, as_json):
    """Extract tables from medical reports and model them."""
    ctx.obj = CliState(_load_config_file(config_path), seed, output_dir, as_json)


@main.command("prompt-preview")
@click.option("--schema", "schema_path", type=str, default=None)
@click.option("--templates", "templates_path", type=str, default=None)
@click.option("--report", "report_path", type=str, default=None, help="File holding one report.")
@click.option("--report-text", type=str, default=None)
@click.option("--no-reasoning", is_flag=True, help="Render the extract-only ablation.")
@click.pass_obj
def cmd_prompt_preview(state, schema_path, templates_path, report_path, report_text, no_reasoning):
    """Render the extraction prompt for one report without contacting a provider."""
    schema = _schema_from(state, schema_path)
    bundle = _templates_from(state, templates_path, schema)
    if report_text is None:
        if report_path is None:
            _fail("provide --report or --report-text")
        try:
            report_text = Path(report_path).read_text(encoding="utf-8").strip("\n")
        except OSError as e:
            _fail(f"cannot read report: {e}")
    if no_reasoning:
        bundle = bundle.without_reasoning()
    click.echo(bundle.render(report_text))


@main.command("extract")
@click.option("--schema", "schema_path", type=str, default=None)
@click.option("--templates", "templates_path", type=str, default=None)
@click.option("--corpus", "corpus_path", type=str, default=None)
@click.option("--replay", "replay_script", type=str, default=None,
              help="Use a replay provider with this script file.")
@click.option("--budget", type=int, default=None, help="Max correction prompts per record.")
@click.option("--parallelism", type=int, default=None)
@click.pass_obj
def cmd_extract(state, schema_path, templates_path, corpus_path, replay_script, budget, parallelism):
    """Convert a report corpus into a table CSV plus provenance."""
    schema = _schema_from(state, schema_path)
    bundle = _templates_from(state, templates_path, schema)
    provider = _provider_from(state, replay_script)
    corpus = _read_corpus(Path(state.setting("corpus", corpus_path, required=True)))
    budget = vorc.VorcBudget(budget if budget is not None else state.config.get("budget", 3))
    parallelism = parallelism if parallelism is not None else state.config.get("parallelism", 1)

    try:
        result = vorc.extract_corpus(provider, [(d["id"], d["text"]) for d in corpus],
                                     schema, bundle, budget, parallelism)
    except ValueError as e:
        _fail(str(e))

    out = state.output_dir
    out.mkdir(parents=True, exist_ok=True)
    records = result.records
    table = ds.TabularDataset(schema=schema, rows=[r.values for r in records],
                              ids=[r.source_id for r in records])
    ds.save_csv(table, out / "extracted.csv")
    with (out / "provenance.jsonl").open("w", encoding="utf-8") as fh:
        for entry in vorc.provenance_entries(result):
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    stats = asdict(result.stats)
    (out / "extract_stats.json").write_text(json.dumps(stats, sort_keys=True) + "\n",
                                            encoding="utf-8")
    rate = result.stats.vorc_call_rate
    click.echo(f"extracted {result.stats.n_records}/{result.stats.n_reports} records, "
               f"{result.stats.n_failures} failures, "
               f"vorc_call_rate={'-' if rate is None else f'{rate:.3f}'}")
    failures = result.failures
    if failures and all(f.reason == "provider-error" for f in failures) \
            and not records and result.stats.n_reports > 0:
        _fail("provider failed on every record", EXIT_PROVIDER)


def _prepare_training(dataset, seed):
    assignment = ds.split(dataset, seed)
    encoder = ds.fit_encoder(dataset, assignment.train_ids)
    X_train = ds.transform(dataset, encoder, assignment.train_ids)
    X_val = ds.transform(dataset, encoder, assignment.val_ids)
    y = dataset.label_array()
    return assignment, encoder, X_train, X_val, y


def _grid_report_csv(result) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["family", "params", "val_accuracy"])
    for point in result.report:
        writer.writerow([result.family, json.dumps(point.params, sort_keys=True),
                         f"{point.val_accuracy:.6f}"])
    return buf.getvalue()


@main.command("train")
@click.option("--data", "data_path", type=str, required=True, help="Dataset CSV with labels.")
@click.option("--schema", "schema_path", type=str, default=None)
@click.option("--family", type=click.Choice(models.FAMILIES), required=True)
@click.pass_obj
def cmd_train(state, data_path, schema_path, family):
    """Grid-search a model family on a 70/10/20 split and save the best model."""
    schema = _schema_from(state, schema_path)
    try:
        dataset = ds.load_csv(data_path, schema)
        assignment, encoder, X_train, X_val, y = _prepare_training(dataset, state.seed)
        result = models.grid_search(family, X_train.values, y[list(assignment.train_ids)],
                                    X_val.values, y[list(assignment.val_ids)],
                                    feature_names=encoder.column_names)
    except (ds.DatasetError, ValueError) as e:
        _fail(str(e))

    out = state.output_dir
    out.mkdir(parents=True, exist_ok=True)
    artifact = models.ModelArtifact(family=family, model=result.model, encoder=encoder,
                                    column_names=encoder.column_names, label=schema.label,
                                    params=result.params, seed=state.seed)
    model_path = out / f"model_{family}.json"
    models.save_model(artifact, model_path)
    (out / "grid_report.csv").write_text(_grid_report_csv(result), encoding="utf-8")
    ds.save_split(assignment, out / "split.json")
    click.echo(f"saved {model_path} (params={json.dumps(result.params, sort_keys=True)}, "
               f"val_accuracy={result.val_accuracy:.4f})")


@main.command("evaluate")
@click.option("--model", "model_path", type=str, required=True)
@click.option("--data", "data_path", type=str, required=True)
@click.option("--split", "split_path", type=str, required=True)
@click.option("--schema", "schema_path", type=str, default=None)
@click.option("--part", type=click.Choice(["train", "val", "test"]), default="test")
@click.pass_obj
def cmd_evaluate(state, model_path, data_path, split_path, schema_path, part):
    """Score a saved model on one split of a dataset."""
    schema = _schema_from(state, schema_path)
    try:
        artifact = models.load_model(model_path)
        dataset = ds.load_csv(data_path, schema)
        assignment = ds.load_split(split_path)
        ids = {"train": assignment.train_ids, "val": assignment.val_ids,
               "test": assignment.test_ids}[part]
        scores = artifact.predict_proba_dataset(dataset, ids)
        y = dataset.label_array()[list(ids)]
        report = evalkit.classification_metrics(y, scores)
    except (models.PersistError, ds.DatasetError, evalkit.EvalError, ValueError, OSError) as e:
        _fail(str(e))
    click.echo(evalkit.render_report({f"classification ({part})": report},
                                     "json" if state.as_json else "text"), nl=False)


def _restrict_to(dataset, keep_ids):
    indices = [i for i, rid in enumerate(dataset.ids) if rid in keep_ids]
    return dataset.subset(indices)


@main.command("compare")
@click.option("--truth", "truth_path", type=str, required=True, help="Ground-truth CSV with labels.")
@click.option("--extracted", "extracted_path", type=str, required=True)
@click.option("--provenance", "provenance_path", type=str, default=None)
@click.option("--schema", "schema_path", type=str, default=None)
@click.option("--family", type=click.Choice(models.FAMILIES), required=True)
@click.pass_obj
def cmd_compare(state, truth_path, extracted_path, provenance_path, schema_path, family):
    """Extraction metrics plus fidelity between truth-trained and
    extraction-trained models of one family."""
    schema = _schema_from(state, schema_path)
    provenance = None
    if provenance_path:
        try:
            provenance = [json.loads(line) for line in
                          Path(provenance_path).read_text(encoding="utf-8").splitlines() if line]
        except (OSError, json.JSONDecodeError) as e:
            _fail(f"cannot read provenance: {e}")
    try:
        truth = ds.load_csv(truth_path, schema)
        extracted = ds.load_csv(extracted_path, schema)
        extraction = evalkit.extraction_metrics(extracted, truth, provenance)

        common = set(extracted.ids)
        truth_sub = _restrict_to(truth, common)
        if truth_sub.n != extracted.n:
            _fail("extracted table contains ids that are absent from the truth table")
        label_by_id = dict(zip(truth_sub.ids, truth_sub.labels))
        order = {rid: k for k, rid in enumerate(truth_sub.ids)}
        ext_indices = sorted(range(extracted.n), key=lambda i: order[extracted.ids[i]])
        ext_sub = extracted.subset(ext_indices)
        ext_sub = ds.TabularDataset(schema=schema, rows=ext_sub.rows, ids=ext_sub.ids,
                                    labels=[label_by_id[rid] for rid in ext_sub.ids])

        pair = {}
        y_test = None
        for name, table in (("gt", truth_sub), ("extracted", ext_sub)):
            assignment, encoder, X_train, X_val, y = _prepare_training(table, state.seed)
            result = models.grid_search(family, X_train.values, y[list(assignment.train_ids)],
                                        X_val.values, y[list(assignment.val_ids)],
                                        feature_names=encoder.column_names)
            X_test = ds.transform(table, encoder, assignment.test_ids)
            pair[name] = (result.model, X_test,
                          models.feature_importances_named(result.model, encoder.column_names))
            y_test = y[list(assignment.test_ids)]  # identical for both pipelines
        fidelity = evalkit.fidelity(pair["gt"][0], pair["extracted"][0],
                                    pair["gt"][1].values, pair["extracted"][1].values,
                                    y_test, pair["gt"][2], pair["extracted"][2])
    except (ds.DatasetError, evalkit.EvalError, ValueError) as e:
        _fail(str(e))
    click.echo(evalkit.render_report(
        {"extraction": extraction, f"fidelity ({family})": fidelity},
        "json" if state.as_json else "text"), nl=False)


def _parse_answer(text: str, label_spec):
    candidates = [text.strip()]
    if candidates[0]:
        candidates.append(candidates[0].splitlines()[0].strip())
    for c in candidates:
        if c == label_spec.positive_value:
            return 1
        if c == label_spec.negative_value:
            return 0
    return None


@main.command("fewshot")
@click.option("--schema", "schema_path", type=str, default=None)
@click.option("--shots", "shots_path", type=str, required=True,
              help="JSON-lines file of {'text', 'label'} examples.")
@click.option("--corpus", "corpus_path", type=str, default=None)
@click.option("--replay", "replay_script", type=str, default=None)
@click.pass_obj
def cmd_fewshot(state, schema_path, shots_path, corpus_path, replay_script):
    """Few-shot label classification baseline over a report corpus."""
    schema = _schema_from(state, schema_path)
    if schema.label is None:
        _fail("schema has no label; few-shot classification needs one")
    provider = _provider_from(state, replay_script)
    corpus = _read_corpus(Path(state.setting("corpus", corpus_path, required=True)))
    try:
        shot_docs = _read_corpus_like(Path(shots_path))
        shots = [(d["text"], str(d["label"])) for d in shot_docs]
    except (OSError, json.JSONDecodeError, KeyError) as e:
        _fail(f"cannot read shots file: {e}")

    rows = []
    abstained = 0
    try:
        for doc in corpus:
            prompt = prompts.build_fewshot_classifier_prompt(shots, doc["text"], schema.label)
            text = provider.complete(CompletionRequest(prompt=prompt)).text
            predicted = _parse_answer(text, schema.label)
            if predicted is None:
                abstained += 1
            rows.append({"id": doc["id"], "predicted": predicted, "gold": doc.get("label")})
    except prompts.PromptError as e:
        _fail(str(e))
    except ProviderError as e:
        _fail(str(e), EXIT_PROVIDER)

    out = state.output_dir
    out.mkdir(parents=True, exist_ok=True)
    with (out / "fewshot_labels.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "predicted", "gold"])
        for r in rows:
            pred = "" if r["predicted"] is None else (
                schema.label.positive_value if r["predicted"] else schema.label.negative_value)
            writer.writerow([r["id"], pred, r["gold"] if r["gold"] is not None else ""])

    scored = [r for r in rows if r["predicted"] is not None and r["gold"] is not None]
    report = {"n reports": len(rows), "n scored": len(scored), "n abstained": abstained}
    if scored:
        y = [1 if str(r["gold"]) == schema.label.positive_value else 0 for r in scored]
        pred = [r["predicted"] for r in scored]
        metrics = evalkit.classification_metrics(y, pred)
        # the few-shot baseline emits labels, not scores, so AUC is not reported
        report.update({"accuracy": metrics.accuracy, "precision": metrics.precision,
                       "recall": metrics.recall, "f1": metrics.f1})
    click.echo(evalkit.render_report({"fewshot": report},
                                     "json" if state.as_json else "text"), nl=False)


def _read_corpus_like(path: Path) -> list[dict]:
    entries = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries


if __name__ == "__main__":
    main()
