"""Operator command line: each pipeline stage as a reproducible subcommand.

Every command reads a JSON run configuration, writes its artifacts under the
output directory, and records a manifest fragment (input hashes, config
echo, output hashes). All randomness flows from explicit seeds in the
configuration; commands never read system entropy. Failures exit nonzero
after printing a single machine-parseable line to stderr:
``{"error": "<category>", "message": "..."}``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import advtrain, gbdt, metrics, preprocess, surrogate
from .attack import AttackConfig, epsilon_sweep, fgsm_batch
from .errors import ConfigError, PipelineError
from .flowdata import NUMERIC, FlowSchema, SynthSpec, load_csv, synth_generate, write_csv
from .gbdt import Hyperparams
from .jsonutil import hash_file, read_json, write_json
from .preprocess import read_matrix_csv, write_matrix_csv
from .surrogate import SurrogateTrainCfg

STAGE_FILES = {
    "dataset": "dataset.csv",
    "stats": "stats.json",
    "train_matrix": "train.csv",
    "test_matrix": "test.csv",
    "model": "model.json",
    "surrogate": "surrogate.json",
    "adversarial": "adversarial.csv",
    "sidecar": "adversarial.sidecar.json",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustids",
        description="Adversarially robust boosted-tree intrusion detection pipeline",
    )
    parser.add_argument("command", choices=["synth", "preprocess", "train", "attack", "adv-train", "eval", "sweep"])
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides config out_dir)")
    parser.add_argument("--workers", type=int, default=None, help="worker count for chunked preprocessing")
    return parser


def _fail_line(category: str, message: str) -> None:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = read_json(args.config)
    except (OSError, json.JSONDecodeError) as exc:
        _fail_line("config-validation", f"cannot read config {args.config}: {exc}")
        return 2
    try:
        out = _resolve_out(cfg, args.out)
        _validate(args.command, cfg, out)
        handler = {
            "synth": cmd_synth,
            "preprocess": cmd_preprocess,
            "train": cmd_train,
            "attack": cmd_attack,
            "adv-train": cmd_advtrain,
            "eval": cmd_eval,
            "sweep": cmd_sweep,
        }[args.command]
        handler(cfg, out, workers=args.workers)
        return 0
    except ConfigError as exc:
        _fail_line(exc.category, str(exc))
        return 2
    except PipelineError as exc:
        _fail_line(exc.category, str(exc))
        return 1
    except ValueError as exc:
        _fail_line("invalid-argument", str(exc))
        return 1
    except OSError as exc:
        _fail_line("io-error", str(exc))
        return 1


# ---------------------------------------------------------------- config

def _resolve_out(cfg: dict, out_flag) -> Path:
    out = out_flag or cfg.get("out_dir")
    if not out:
        raise ConfigError(["out_dir: required (set in config or pass --out)"])
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dataset_csv(cfg: dict, out: Path) -> Path:
    csv_path = (cfg.get("dataset") or {}).get("csv")
    return Path(csv_path) if csv_path else out / STAGE_FILES["dataset"]


def _schema(cfg: dict) -> FlowSchema:
    if cfg.get("schema"):
        return FlowSchema.from_dict(cfg["schema"])
    synth = (cfg.get("dataset") or {}).get("synth")
    if synth:
        return SynthSpec.from_dict(synth).schema
    raise ConfigError(["schema: required when dataset.csv is external and no synth spec is given"])


def _validate(command: str, cfg: dict, out: Path) -> None:
    problems: list[str] = []
    dataset = cfg.get("dataset") or {}
    synth = dataset.get("synth")

    def need_seed(section: dict | None, path: str, key: str):
        if section is not None and key not in section:
            problems.append(f"{path}.{key}: required (all randomness must be explicitly seeded)")

    def need_file(path: Path, label: str):
        if not path.is_file():
            problems.append(f"{label}: file not found at {path}")

    if command == "synth":
        if synth is None:
            problems.append("dataset.synth: required for the synth command")
        else:
            need_seed(synth, "dataset.synth", "seed")
            try:
                SynthSpec.from_dict(synth)
            except (PipelineError, TypeError) as exc:
                problems.append(f"dataset.synth: {exc}")

    if command in ("preprocess", "adv-train"):
        pre = cfg.get("preprocess")
        if pre is None:
            problems.append("preprocess: section required")
        else:
            need_seed(pre, "preprocess", "split_seed")
            frac = pre.get("train_fraction", 0.7)
            if not 0.0 < float(frac) < 1.0:
                problems.append("preprocess.train_fraction: must lie strictly between 0 and 1")
            if int(pre.get("chunk_rows", 65536)) < 1:
                problems.append("preprocess.chunk_rows: must be >= 1")
        need_file(_dataset_csv(cfg, out), "dataset.csv")
        if not cfg.get("schema") and synth is None:
            problems.append("schema: required when no synth spec is present")

    if command in ("train",):
        need_file(out / STAGE_FILES["stats"], "stats.json")
        need_file(out / STAGE_FILES["train_matrix"], "train.csv")

    if command in ("attack", "adv-train", "sweep"):
        need_seed(cfg.get("surrogate", {}), "surrogate", "seed")

    if command == "attack":
        need_file(out / STAGE_FILES["stats"], "stats.json")
        need_file(out / STAGE_FILES["train_matrix"], "train.csv")
        target = (cfg.get("attack") or {}).get("target", "test")
        if target not in ("train", "test"):
            problems.append("attack.target: must be 'train' or 'test'")
        else:
            need_file(out / STAGE_FILES[f"{target}_matrix"], f"{target}.csv")

    if command == "eval":
        section = cfg.get("eval") or {}
        need_file(_resolve_artifact(out, section.get("model", STAGE_FILES["model"])), "eval.model")
        need_file(_resolve_artifact(out, section.get("matrix", STAGE_FILES["test_matrix"])), "eval.matrix")

    if command == "sweep":
        section = cfg.get("sweep") or {}
        eps = section.get("epsilons")
        if not eps:
            problems.append("sweep.epsilons: required nonempty list")
        elif any(float(e) < 0 for e in eps):
            problems.append("sweep.epsilons: values must be nonnegative")
        need_file(_resolve_artifact(out, section.get("model", STAGE_FILES["model"])), "sweep.model")
        need_file(out / STAGE_FILES["test_matrix"], "test.csv")

    if problems:
        raise ConfigError(problems)


def _resolve_artifact(out: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else out / p


def _write_manifest(out: Path, command: str, cfg: dict, inputs: dict, outputs: dict) -> None:
    doc = {
        "command": command,
        "config": cfg,
        "inputs": {name: hash_file(p) for name, p in inputs.items()},
        "outputs": {name: hash_file(p) for name, p in outputs.items()},
    }
    write_json(out / f"{command}.manifest.json", doc)


def _booster_hp(cfg: dict, n_classes: int) -> Hyperparams:
    section = dict(cfg.get("booster") or {})
    section.pop("n_classes", None)
    return Hyperparams(n_classes=n_classes, **section)


def _surrogate_cfg(cfg: dict) -> SurrogateTrainCfg:
    return SurrogateTrainCfg(**(cfg.get("surrogate") or {}))


def _attack_cfg(cfg: dict, column_kinds=None) -> AttackConfig:
    section = dict(cfg.get("attack") or {})
    section.pop("target", None)
    mask = section.get("perturb_mask")
    if mask == "numeric-only":
        if column_kinds is None:
            raise ConfigError(["attack.perturb_mask: 'numeric-only' needs stats.json for column kinds"])
        section["perturb_mask"] = [kind == NUMERIC for kind in column_kinds]
    return AttackConfig.from_dict(section)


def _stats_kinds(stats: preprocess.PreprocessStats) -> tuple[str, ...]:
    return tuple(kind for _, kind in stats.schema.feature_columns)


# ---------------------------------------------------------------- commands

def cmd_synth(cfg: dict, out: Path, workers=None) -> None:
    spec = SynthSpec.from_dict(cfg["dataset"]["synth"])
    table = synth_generate(spec)
    dataset = out / STAGE_FILES["dataset"]
    write_csv(table, dataset)
    _write_manifest(out, "synth", cfg, {}, {"dataset.csv": dataset})
    print(f"wrote {dataset} ({table.n_rows} rows)")


def cmd_preprocess(cfg: dict, out: Path, workers=None) -> None:
    pre = cfg["preprocess"]
    dataset = _dataset_csv(cfg, out)
    schema = _schema(cfg)
    table = load_csv(dataset, schema)
    n_workers = workers or int(pre.get("workers", 1))
    chunk = int(pre.get("chunk_rows", 65536))
    split = preprocess.split(
        table.n_rows,
        float(pre.get("train_fraction", 0.7)),
        int(pre["split_seed"]),
        labels=np.asarray(table.labels) if pre.get("stratified") else None,
        stratified=bool(pre.get("stratified", False)),
    )
    fit_table = table.select(split.train) if pre.get("fit_on_train_only") else table
    stats = preprocess.fit_stats(fit_table)
    X, y = preprocess.transform_parallel(table, stats, chunk_rows=chunk, workers=n_workers)

    stats_path = out / STAGE_FILES["stats"]
    train_path = out / STAGE_FILES["train_matrix"]
    test_path = out / STAGE_FILES["test_matrix"]
    write_json(stats_path, stats.to_dict())
    write_matrix_csv(X.take(split.train), y[split.train], train_path)
    write_matrix_csv(X.take(split.test), y[split.test], test_path)
    _write_manifest(
        out,
        "preprocess",
        cfg,
        {"dataset.csv": dataset},
        {"stats.json": stats_path, "train.csv": train_path, "test.csv": test_path},
    )
    print(f"wrote {stats_path}, {train_path} ({split.train.size} rows), {test_path} ({split.test.size} rows)")


def _load_stats(out: Path) -> preprocess.PreprocessStats:
    return preprocess.PreprocessStats.from_dict(read_json(out / STAGE_FILES["stats"]))


def cmd_train(cfg: dict, out: Path, workers=None) -> None:
    stats = _load_stats(out)
    X, y = read_matrix_csv(out / STAGE_FILES["train_matrix"], column_kinds=_stats_kinds(stats))
    hp = _booster_hp(cfg, stats.n_classes)
    model = gbdt.train(X, y, hp)
    model_path = out / STAGE_FILES["model"]
    gbdt.save_model(model, model_path)
    _write_manifest(
        out,
        "train",
        cfg,
        {"train.csv": out / STAGE_FILES["train_matrix"], "stats.json": out / STAGE_FILES["stats"]},
        {"model.json": model_path},
    )
    print(f"wrote {model_path} (hash {model.content_hash()[:12]}, {len(model.trees)} trees)")


def cmd_attack(cfg: dict, out: Path, workers=None) -> None:
    stats = _load_stats(out)
    kinds = _stats_kinds(stats)
    sur_path = out / STAGE_FILES["surrogate"]
    if sur_path.is_file():
        sur = surrogate.load_params(sur_path)
    else:
        X_train, y_train = read_matrix_csv(out / STAGE_FILES["train_matrix"], column_kinds=kinds)
        sur = surrogate.train_surrogate(X_train, y_train, _surrogate_cfg(cfg), n_classes=stats.n_classes)
        surrogate.save_params(sur, sur_path)

    target = (cfg.get("attack") or {}).get("target", "test")
    target_path = out / STAGE_FILES[f"{target}_matrix"]
    X, y = read_matrix_csv(target_path, column_kinds=kinds)
    acfg = _attack_cfg(cfg, kinds)
    adv = fgsm_batch(sur, X, y, acfg)
    adv_path = out / STAGE_FILES["adversarial"]
    write_matrix_csv(adv, y, adv_path)

    sidecar = dict(acfg.to_dict())
    sidecar["target"] = target
    sidecar["source_matrix"] = {"name": target_path.name, "sha256": hash_file(target_path)}
    sidecar["surrogate_hash"] = sur.content_hash()
    model_path = out / STAGE_FILES["model"]
    if model_path.is_file():
        sidecar["model_hash"] = gbdt.load_model(model_path).content_hash()
    sidecar_path = out / STAGE_FILES["sidecar"]
    write_json(sidecar_path, sidecar)
    _write_manifest(
        out,
        "attack",
        cfg,
        {target_path.name: target_path},
        {"adversarial.csv": adv_path, "adversarial.sidecar.json": sidecar_path, "surrogate.json": sur_path},
    )
    print(f"wrote {adv_path} (epsilon {acfg.epsilon}, target {target})")


def cmd_advtrain(cfg: dict, out: Path, workers=None) -> None:
    pre = cfg["preprocess"]
    dataset = _dataset_csv(cfg, out)
    table = load_csv(dataset, _schema(cfg))
    stats_probe = preprocess.fit_stats(table)
    hp = _booster_hp(cfg, stats_probe.n_classes)
    kinds = _stats_kinds(stats_probe)
    baseline, robust, result = advtrain.adversarial_training_pipeline(
        table,
        hp,
        _surrogate_cfg(cfg),
        _attack_cfg(cfg, kinds),
        split_seed=int(pre["split_seed"]),
        train_fraction=float(pre.get("train_fraction", 0.7)),
        fit_on_train_only=bool(pre.get("fit_on_train_only", False)),
        chunk_rows=int(pre.get("chunk_rows", 65536)),
        workers=workers or int(pre.get("workers", 1)),
        attack_fraction=float((cfg.get("attack") or {}).get("fraction", 1.0)),
        stratified=bool(pre.get("stratified", False)),
    )
    outputs = {}
    for name, model in (("baseline.json", baseline), ("robust.json", robust)):
        gbdt.save_model(model, out / name)
        outputs[name] = out / name
    surrogate.save_params(result.surrogate_params, out / STAGE_FILES["surrogate"])
    outputs["surrogate.json"] = out / STAGE_FILES["surrogate"]
    write_json(out / STAGE_FILES["stats"], result.stats.to_dict())
    outputs["stats.json"] = out / STAGE_FILES["stats"]
    for name, matrix, labels in (
        ("train.csv", result.X_train, result.y_train),
        ("test.csv", result.X_test, result.y_test),
        ("adv_test.csv", result.X_adv_test, result.y_test),
    ):
        write_matrix_csv(matrix, labels, out / name)
        outputs[name] = out / name
    for name, rep in result.reports.items():
        path = out / f"report_{name}.json"
        write_json(path, rep.to_dict())
        outputs[path.name] = path
    for name, cm in result.confusions.items():
        path = out / f"confusion_{name}.csv"
        metrics.confusion_to_csv(cm, path)
        outputs[path.name] = path

    run_manifest = dict(result.manifest)
    run_manifest["config"] = cfg
    run_manifest["artifacts"] = {name: hash_file(p) for name, p in outputs.items()}
    manifest_path = out / "run_manifest.json"
    write_json(manifest_path, run_manifest)
    outputs["run_manifest.json"] = manifest_path
    _write_manifest(out, "adv-train", cfg, {"dataset.csv": dataset}, outputs)
    pairs = result.metric_pairs
    for name in ("baseline_clean", "baseline_adversarial", "robust_clean", "robust_adversarial"):
        acc, f1 = pairs[name]
        print(f"{name}: accuracy={acc:.6f} f1_weighted={f1:.6f}")


def cmd_eval(cfg: dict, out: Path, workers=None) -> None:
    section = cfg.get("eval") or {}
    model_path = _resolve_artifact(out, section.get("model", STAGE_FILES["model"]))
    matrix_path = _resolve_artifact(out, section.get("matrix", STAGE_FILES["test_matrix"]))
    tag = section.get("tag", "")
    prefix = f"{tag}." if tag else ""
    model = gbdt.load_model(model_path)
    stats_path = out / STAGE_FILES["stats"]
    class_names = None
    kinds = None
    if stats_path.is_file():
        stats = preprocess.PreprocessStats.from_dict(read_json(stats_path))
        if stats.n_classes == model.hyperparams.n_classes:
            class_names = stats.class_names
        kinds = _stats_kinds(stats)
    X, y = read_matrix_csv(matrix_path, column_kinds=kinds)
    pred = gbdt.predict_class(model, X)
    cm = metrics.confusion(y, pred, model.hyperparams.n_classes, class_names)
    rep = metrics.report(cm)

    formats = (cfg.get("report") or {}).get("formats", ["json", "text", "csv"])
    top_n = int((cfg.get("report") or {}).get("top_features", 10))
    outputs = {}
    if "json" in formats:
        path = out / f"{prefix}report.json"
        write_json(path, rep.to_dict())
        outputs[path.name] = path
    if "text" in formats:
        path = out / f"{prefix}report.txt"
        path.write_text(metrics.render_text(rep), encoding="utf-8")
        outputs[path.name] = path
    if "csv" in formats:
        path = out / f"{prefix}confusion.csv"
        metrics.confusion_to_csv(cm, path)
        outputs[path.name] = path
    importance = gbdt.feature_importance(model)[:top_n]
    imp_path = out / f"{prefix}feature_importance.json"
    write_json(imp_path, [{"feature": f, "gain": g} for f, g in importance])
    outputs[imp_path.name] = imp_path

    _write_manifest(
        out,
        "eval",
        cfg,
        {model_path.name: model_path, matrix_path.name: matrix_path},
        outputs,
    )
    print(f"accuracy={rep.accuracy:.6f} f1_weighted={rep.weighted_f1:.6f} ({matrix_path.name})")


def cmd_sweep(cfg: dict, out: Path, workers=None) -> None:
    stats = _load_stats(out)
    kinds = _stats_kinds(stats)
    model_path = _resolve_artifact(out, (cfg.get("sweep") or {}).get("model", STAGE_FILES["model"]))
    model = gbdt.load_model(model_path)
    sur_path = out / STAGE_FILES["surrogate"]
    if sur_path.is_file():
        sur = surrogate.load_params(sur_path)
    else:
        X_train, y_train = read_matrix_csv(out / STAGE_FILES["train_matrix"], column_kinds=kinds)
        sur = surrogate.train_surrogate(X_train, y_train, _surrogate_cfg(cfg), n_classes=stats.n_classes)
        surrogate.save_params(sur, sur_path)
    X, y = read_matrix_csv(out / STAGE_FILES["test_matrix"], column_kinds=kinds)
    rows = epsilon_sweep(sur, model, X, y, cfg["sweep"]["epsilons"], _attack_cfg(cfg, kinds))

    sweep_json = out / "sweep.json"
    write_json(
        sweep_json,
        [{"epsilon": e, "surrogate_accuracy": s, "ensemble_accuracy": m} for e, s, m in rows],
    )
    sweep_csv = out / "sweep.csv"
    with open(sweep_csv, "w", newline="", encoding="utf-8") as fh:
        import csv as _csv

        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["epsilon", "surrogate_accuracy", "ensemble_accuracy"])
        for e, s, m in rows:
            writer.writerow([repr(e), repr(s), repr(m)])
    _write_manifest(
        out,
        "sweep",
        cfg,
        {model_path.name: model_path, "test.csv": out / STAGE_FILES["test_matrix"]},
        {"sweep.json": sweep_json, "sweep.csv": sweep_csv},
    )
    for e, s, m in rows:
        print(f"epsilon={e}: surrogate={s:.6f} ensemble={m:.6f}")


if __name__ == "__main__":
    sys.exit(main())
