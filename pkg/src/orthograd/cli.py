"""Command-line entry points: pretrain, unlearn, compare.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration failure.
``ORTHOGRAD_THREADS`` caps the worker slots used for (method, seed) runs;
records are sorted before emission so the results file is byte-identical
for any worker count.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import data, net
from .config import (
    METHOD_NAMES, ConfigError, ExperimentConfig, load_experiment_config,
)
from .evaluation import (
    RunRecord, emit_records, evaluate_splits, parse_records, render_sweep,
    render_table, upsert_records, uis,
)
from .unlearn import MethodKind, StoppingRule, UnlearnConfig, run_unlearning

USAGE_EXIT = 2
RUNTIME_EXIT = 1


def _resolve(cfg: ExperimentConfig, relpath: str) -> Path:
    base = Path(cfg.source).parent
    p = Path(relpath)
    return p if p.is_absolute() else base / p


def _build_dataset(cfg: ExperimentConfig) -> tuple[data.Dataset, data.Dataset]:
    if cfg.dataset_kind == "blobs":
        full = data.gen_gaussian_blobs(
            cfg.classes, cfg.dim, cfg.per_class + cfg.test_per_class,
            spread=cfg.spread, seed=cfg.dataset_seed)
        return data.partition_train_test(full, cfg.per_class)
    train = data.load_csv_dataset(_resolve(cfg, cfg.train_path), cfg.dim, cfg.classes)
    test = data.load_csv_dataset(_resolve(cfg, cfg.test_path), cfg.dim, cfg.classes)
    return train, test


def _build_splits(cfg: ExperimentConfig, train, test, retain_size: int | None = None):
    return data.make_unlearn_split(
        train, test, mode=cfg.split_mode,
        retain_size=cfg.retain_size if retain_size is None else retain_size,
        seed=cfg.split_seed, fraction=cfg.fraction, class_label=cfg.class_label)


def _method_settings(cfg: ExperimentConfig, method: str) -> dict:
    table = dict(cfg.unlearn_base)
    table.update(cfg.unlearn_overrides.get(method, {}))
    src = cfg.source
    out = {
        "alpha": float(table.get("alpha", "0.9")),
        "eta": float(table.get("eta", "0.001")),
        "unlearn_batch": int(table.get("unlearn_batch", "32")),
        "retain_batch": int(table.get("retain_batch", "32")),
        "max_epochs": int(table.get("max_epochs", "30")),
        "use_lora": table.get("use_lora", "false") == "true",
        "lora_rank": int(table.get("lora_rank", "8")),
        "lora_scale": float(table.get("lora_scale", "32")),
        "seed": int(table.get("seed", "0")),
    }
    if table.get("use_lora", "false") not in ("true", "false"):
        raise ConfigError(f"{src}: use_lora expects 'true' or 'false'")
    if "stop_threshold" in table:
        out["stop_threshold"] = float(table["stop_threshold"])
    return out


def _stopping_rule(cfg: ExperimentConfig, settings: dict, a_p_test: float) -> StoppingRule:
    if cfg.split_mode == "random":
        return StoppingRule.random_forget(
            target=a_p_test, threshold=settings.get("stop_threshold", 0.5))
    return StoppingRule.class_forget(threshold=settings.get("stop_threshold", 1.0))


def _network_spec(cfg: ExperimentConfig) -> net.NetworkSpec:
    try:
        return net.NetworkSpec(cfg.layer_sizes, cfg.activation)
    except ValueError as exc:
        raise ConfigError(f"{cfg.source}: invalid network ({exc})") from None


def _worker_slots(n_jobs: int) -> int:
    raw = os.environ.get("ORTHOGRAD_THREADS", "1")
    try:
        slots = int(raw)
    except ValueError:
        raise ConfigError(f"ORTHOGRAD_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(slots, n_jobs))


def _original_record(cfg: ExperimentConfig, report, n_retain: int) -> RunRecord:
    return RunRecord(
        method="original", seed=cfg.pretrain_seed, epoch=0,
        A_u=report.A_u, A_r=report.A_r, A_test=report.A_test,
        uis=0.0, stop_epoch=0, stopped_early=False, n_retain=n_retain)


def cmd_pretrain(args) -> int:
    cfg = load_experiment_config(args.config)
    spec = _network_spec(cfg)
    if spec.in_dim != cfg.dim or spec.n_classes != cfg.classes:
        raise ConfigError(
            f"{cfg.source}: network ends {spec.in_dim}->{spec.n_classes}, "
            f"dataset needs {cfg.dim}->{cfg.classes}")
    train, test = _build_dataset(cfg)
    params = net.pretrain(spec, train, epochs=cfg.pretrain_epochs,
                          batch_size=cfg.pretrain_batch, eta=cfg.pretrain_eta,
                          seed=cfg.pretrain_seed)

    ckpt_path = _resolve(cfg, cfg.checkpoint_path)
    ckpt_path.parent.mkdir(parents=True, exist_ok=True)
    net.save_checkpoint(ckpt_path, params, seed=cfg.pretrain_seed)

    splits = _build_splits(cfg, train, test)
    report = evaluate_splits(params, splits, epoch=0, method="original",
                             seed=cfg.pretrain_seed)
    train_acc = net.evaluate_accuracy(params, train)

    results_path = _resolve(cfg, cfg.results_path)
    results_path.parent.mkdir(parents=True, exist_ok=True)
    existing = parse_records(results_path) if results_path.exists() else []
    emit_records(upsert_records(existing, [_original_record(cfg, report, splits.n_retain)]),
                 results_path)

    print(f"pretrained {'-'.join(str(s) for s in spec.layer_sizes)} "
          f"({spec.activation}) for {cfg.pretrain_epochs} epochs")
    print(f"train accuracy {train_acc:.2f}  test accuracy {report.A_test:.2f}")
    print(f"checkpoint written to {ckpt_path}")
    return 0


def _parse_methods(raw: str) -> list[MethodKind]:
    if raw == "all":
        return [MethodKind(name) for name in METHOD_NAMES]
    if raw not in METHOD_NAMES:
        raise ConfigError(f"unknown method {raw!r}; expected 'all' or one of "
                          + ", ".join(METHOD_NAMES))
    return [MethodKind(raw)]


def _parse_int_csv(raw: str, what: str) -> list[int]:
    try:
        values = [int(part) for part in raw.split(",") if part != ""]
    except ValueError:
        raise ConfigError(f"{what} expects comma-separated integers, got {raw!r}") from None
    if not values:
        raise ConfigError(f"{what} must list at least one value")
    return values


def cmd_unlearn(args) -> int:
    cfg = load_experiment_config(args.config)
    ckpt_path = _resolve(cfg, cfg.checkpoint_path)
    if not ckpt_path.exists():
        raise ConfigError(f"checkpoint not found: {ckpt_path} (run 'orthograd pretrain' first)")
    pretrained, _meta = net.load_checkpoint(ckpt_path)

    methods = _parse_methods(args.method)
    seeds = (_parse_int_csv(args.seed_list, "--seed-list")
             if args.seed_list else [_method_settings(cfg, methods[0].value)["seed"]])
    sizes = (_parse_int_csv(args.retain_sizes, "--retain-sizes")
             if args.retain_sizes else [cfg.retain_size])

    train, test = _build_dataset(cfg)
    runs_dir = _resolve(cfg, cfg.runs_dir)
    runs_dir.mkdir(parents=True, exist_ok=True)

    # splits and the pretrained reference depend only on the retain size
    per_size = {}
    for size in sizes:
        splits = _build_splits(cfg, train, test, retain_size=size)
        report = evaluate_splits(pretrained, splits)
        per_size[size] = (splits, report.A_test)

    jobs = [(m, s, size) for size in sizes for m in methods for s in seeds]

    def one_run(job):
        method, seed, size = job
        splits, a_p_test = per_size[size]
        settings = _method_settings(cfg, method.value)
        rule = _stopping_rule(cfg, settings, a_p_test)
        ucfg = UnlearnConfig(
            method=method, stopping=rule, alpha=settings["alpha"], eta=settings["eta"],
            unlearn_batch=settings["unlearn_batch"], retain_batch=settings["retain_batch"],
            max_epochs=settings["max_epochs"], use_lora=settings["use_lora"],
            lora_rank=settings["lora_rank"], lora_scale=settings["lora_scale"], seed=seed)
        result = run_unlearning(pretrained, splits, ucfg)
        final = result.trace[-1]
        record = RunRecord(
            method=method.value, seed=seed, epoch=final.epoch,
            A_u=final.A_u, A_r=final.A_r, A_test=final.A_test,
            uis=uis(a_p_test, final.A_test, final.A_u),
            stop_epoch=result.stop_epoch, stopped_early=result.stopped_early,
            n_retain=size)

        stem = f"{method.value}-nr{size}-s{seed}"
        net.save_checkpoint(runs_dir / f"unlearned-{stem}.ckpt", result.params, seed=seed)
        trace_lines = [
            f"epoch={r.epoch} A_u={r.A_u:.6g} A_r={r.A_r:.6g} A_test={r.A_test:.6g}"
            for r in result.trace
        ]
        (runs_dir / f"trace-{stem}.txt").write_text("\n".join(trace_lines) + "\n",
                                                    encoding="utf-8")
        return record

    slots = _worker_slots(len(jobs))
    if slots > 1:
        with ThreadPoolExecutor(max_workers=slots) as pool:
            records = list(pool.map(one_run, jobs))
    else:
        records = [one_run(job) for job in jobs]

    results_path = _resolve(cfg, cfg.results_path)
    results_path.parent.mkdir(parents=True, exist_ok=True)
    existing = parse_records(results_path) if results_path.exists() else []
    emit_records(upsert_records(existing, records), results_path)

    for rec in sorted(records, key=RunRecord.sort_key):
        early = "stopped" if rec.stopped_early else "epoch cap"
        print(f"{rec.method:<22} seed={rec.seed} n_retain={rec.n_retain} "
              f"A_u={rec.A_u:.2f} A_test={rec.A_test:.2f} uis={rec.uis:.3f} "
              f"({early} at {rec.stop_epoch})")
    print(f"{len(records)} records written to {results_path}")
    return 0


def cmd_compare(args) -> int:
    try:
        records = parse_records(args.results)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(render_sweep(records) if args.sweep else render_table(records))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthograd",
        description="Gradient-orthogonalization unlearning experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_pre = sub.add_parser("pretrain", help="train the base classifier and write its checkpoint")
    p_pre.add_argument("config", help="experiment config file")

    p_un = sub.add_parser("unlearn", help="run unlearning methods against a checkpoint")
    p_un.add_argument("config", help="experiment config file")
    p_un.add_argument("--method", default="all",
                      help="method name or 'all' (default: all)")
    p_un.add_argument("--seed-list", default="",
                      help="comma-separated run seeds (default: config seed)")
    p_un.add_argument("--retain-sizes", default="",
                      help="comma-separated retain sizes for a sweep (default: config value)")

    p_cmp = sub.add_parser("compare", help="summarize a results file")
    p_cmp.add_argument("results", help="results file written by 'unlearn'")
    p_cmp.add_argument("--sweep", action="store_true",
                       help="group by retain size instead of aggregating")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"pretrain": cmd_pretrain, "unlearn": cmd_unlearn, "compare": cmd_compare}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"orthograd: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ValueError, OSError, FileNotFoundError) as exc:
        print(f"orthograd: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
