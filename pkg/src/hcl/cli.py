"""Command-line entry point.

Subcommands: train, eval, ablate, verify, synth. Configuration is a flat
``key = value`` text file; any key can be overridden on the command line
with ``--set key=value`` (plus a few dedicated shortcut flags). Every run
directory receives the fully resolved config so each result is replayable
from its artifacts alone.

Exit codes: 0 success, 1 property or training failure, 2 usage or IO error.
The environment variable HCL_RUN_DIR overrides the default run-output root.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import curriculum, data, losses, metrics, mlp, verify
from .taxonomy import Taxonomy

RUN_ROOT_ENV = "HCL_RUN_DIR"
ABLATION_ARMS = ("ce", "hcl-hier", "hcl-cl", "hcl")

# key -> (type, default); bools accept true/false, 1/0, yes/no
CONFIG_SPEC: dict[str, tuple[type, object]] = {
    "data": (str, "synth"),  # synth | native | arff
    "data_dir": (str, ""),
    "arff_path": (str, ""),
    "split_ratios": (str, "0.6,0.2,0.2"),
    "split_seed": (int, 0),
    "normalize": (bool, True),
    "leaves_only": (bool, False),
    "levels": (int, 3),
    "branching": (int, 3),
    "examples_per_leaf": (int, 150),
    "feature_dim": (int, 16),
    "separation": (float, 2.0),
    "label_noise": (float, 0.0),
    "data_seed": (int, 0),
    "hidden_width": (int, 800),
    "dropout": (float, 0.25),
    "lr": (float, 1e-3),
    "epochs": (int, 100),
    "batch_size": (int, 64),
    "seed": (int, 0),
    "optimizer": (str, "adam"),
    "loss": (str, "hcl"),
    "scope": (str, losses.SCOPE_ALL_SHALLOWER),
    "decision_threshold": (float, 0.5),
    "focal_gamma": (float, 2.0),
    "selection_rule": (str, curriculum.RULE_OPTIMAL_PREFIX),
    "selection_thresh": (str, ""),  # empty string means unset
}


class UsageError(ValueError):
    pass


def _coerce(key: str, raw: str):
    typ, _ = CONFIG_SPEC[key]
    raw = raw.strip()
    if typ is bool:
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise UsageError(f"config key {key!r}: expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError:
        raise UsageError(
            f"config key {key!r}: expected {typ.__name__}, got {raw!r}"
        ) from None


def _check_key(key: str) -> str:
    if key not in CONFIG_SPEC:
        valid = ", ".join(sorted(CONFIG_SPEC))
        raise UsageError(f"unknown config key {key!r}; valid keys: {valid}")
    return key


def parse_config_file(path) -> dict:
    """Flat key = value lines; blank lines and # comments are skipped."""
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value, got {line!r}")
            key, _, val = line.partition("=")
            key = _check_key(key.strip())
            values[key] = _coerce(key, val)
    return values


def resolve_config(config_path=None, overrides=None) -> dict:
    cfg = {key: default for key, (_, default) in CONFIG_SPEC.items()}
    if config_path:
        cfg.update(parse_config_file(config_path))
    for key, raw in (overrides or []):
        key = _check_key(key)
        cfg[key] = _coerce(key, raw)
    return cfg


def emit_config(cfg: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in CONFIG_SPEC:
            fh.write(f"{key} = {cfg[key]}\n")


def _collect_overrides(args) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, val = item.partition("=")
        pairs.append((key.strip(), val))
    for flag in ("loss", "seed", "epochs", "lr"):
        val = getattr(args, flag, None)
        if val is not None:
            pairs.append((flag, str(val)))
    return pairs


def _split_ratios(cfg: dict) -> tuple[float, float, float]:
    parts = str(cfg["split_ratios"]).split(",")
    if len(parts) != 3:
        raise UsageError(
            f"split_ratios needs three comma-separated numbers, got {cfg['split_ratios']!r}"
        )
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise UsageError(f"split_ratios is not numeric: {cfg['split_ratios']!r}") from None


def build_dataset(cfg: dict) -> data.Dataset:
    """Source, split and (optionally) normalize the dataset a config names."""
    source = cfg["data"]
    if source == "synth":
        d = data.synth_generate(data.SynthConfig(
            levels=cfg["levels"],
            branching=cfg["branching"],
            examples_per_leaf=cfg["examples_per_leaf"],
            feature_dim=cfg["feature_dim"],
            cluster_separation=cfg["separation"],
            label_noise=cfg["label_noise"],
            seed=cfg["data_seed"],
        ))
    elif source == "native":
        if not cfg["data_dir"]:
            raise UsageError("data = native requires data_dir")
        d = data.load_native_dir(cfg["data_dir"])
    elif source == "arff":
        if not cfg["arff_path"]:
            raise UsageError("data = arff requires arff_path")
        d = data.parse_arff_hmc(cfg["arff_path"])
    else:
        raise UsageError(f"unknown data source {cfg['data']!r}; use synth, native or arff")
    d = data.split(d, ratios=_split_ratios(cfg), seed=cfg["split_seed"])
    if cfg["normalize"]:
        d, _ = data.normalize(d)
    return d


def train_config(cfg: dict) -> mlp.TrainConfig:
    thresh = cfg["selection_thresh"]
    return mlp.TrainConfig(
        hidden_width=cfg["hidden_width"],
        dropout_rate=cfg["dropout"],
        learning_rate=cfg["lr"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        seed=cfg["seed"],
        optimizer=cfg["optimizer"],
        loss_mode=cfg["loss"],
        transform_scope=cfg["scope"],
        decision_threshold=cfg["decision_threshold"],
        focal_gamma=cfg["focal_gamma"],
        selection_rule=cfg["selection_rule"],
        selection_thresh=float(thresh) if str(thresh).strip() else None,
    )


def _run_root() -> str:
    return os.environ.get(RUN_ROOT_ENV, "runs")


def make_run_dir(out: str | None, command: str, seed: int) -> str:
    if out:
        path = out
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = os.path.join(_run_root(), f"{command}-{stamp}-s{seed}")
    os.makedirs(path, exist_ok=True)
    return path


def _dataset_name(cfg: dict) -> str:
    if cfg["data"] == "synth":
        return "synthetic"
    path = cfg["data_dir"] or cfg["arff_path"]
    return os.path.splitext(os.path.basename(os.path.normpath(path)))[0]


def _final_reports(params, d: data.Dataset, leaves_only: bool) -> dict:
    out = {}
    for name in data.SPLIT_NAMES:
        idx = d.indices(name)
        scores, _ = mlp.forward(params, d.features[idx])
        rep = metrics.evaluate(d.labels[idx], scores, d.taxonomy, leaves_only=leaves_only)
        out[name] = rep
    return out


def _selection_history(log, tax: Taxonomy) -> list[dict]:
    history = []
    for entry in log:
        ids = np.flatnonzero(entry.selected == 1)
        history.append({
            "epoch": entry.epoch,
            "classes": [tax.class_names[int(c)] for c in ids],
        })
    return history


def _write_metrics_jsonl(log, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry.jsonl_dict(), sort_keys=True) + "\n")


def cmd_train(args) -> int:
    cfg = resolve_config(args.config, _collect_overrides(args))
    d = build_dataset(cfg)
    tc = train_config(cfg)
    run_dir = make_run_dir(args.out, "train", tc.seed)

    start = time.perf_counter()
    params, log = mlp.train(d, d.taxonomy, tc)
    duration = time.perf_counter() - start

    emit_config(cfg, os.path.join(run_dir, "config.resolved.cfg"))
    mlp.save_checkpoint(os.path.join(run_dir, "checkpoint.bin"), params)
    _write_metrics_jsonl(log, os.path.join(run_dir, "metrics.jsonl"))

    finals = _final_reports(params, d, cfg["leaves_only"])
    record = {
        "command": "train",
        "dataset": _dataset_name(cfg),
        "config": {key: cfg[key] for key in CONFIG_SPEC},
        "seed": tc.seed,
        "duration_sec": duration,
        "epochs": [entry.jsonl_dict() for entry in log],
        "selection_history": _selection_history(log, d.taxonomy),
        "final": {name: rep.to_json_dict() for name, rep in finals.items()},
    }
    with open(os.path.join(run_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")

    test = finals["test"]
    print(f"run dir: {run_dir}")
    print(
        f"test hit@1 {100 * test.hit_at_1:.2f}  mrr {100 * test.mrr:.2f}  "
        f"hierdist {test.hier_dist:.2f}  ({len(log)} epochs, {duration:.1f}s)"
    )
    return 0


def _load_eval_inputs(args):
    """Checkpoint plus the dataset it should be scored on."""
    checkpoint = args.checkpoint
    config_path = args.config
    if args.run:
        checkpoint = checkpoint or os.path.join(args.run, "checkpoint.bin")
        config_path = config_path or os.path.join(args.run, "config.resolved.cfg")
    if not checkpoint:
        raise UsageError("eval needs --checkpoint (or --run)")
    params = mlp.load_checkpoint(checkpoint)

    if args.data_dir:
        d = data.load_native_dir(args.data_dir)
        leaves_only = False
    elif config_path:
        cfg = resolve_config(config_path, _collect_overrides(args))
        d = build_dataset(cfg)
        leaves_only = cfg["leaves_only"]
    else:
        raise UsageError("eval needs --config, --run or --data-dir to locate the data")
    return params, d, leaves_only, checkpoint


def cmd_eval(args) -> int:
    params, d, leaves_only, checkpoint = _load_eval_inputs(args)

    want_d, _, want_c = params.dims
    if (want_d, want_c) != (d.n_features, d.taxonomy.n_classes):
        raise UsageError(
            f"checkpoint expects D={want_d}, C={want_c} but the dataset has "
            f"D={d.n_features}, C={d.taxonomy.n_classes}"
        )

    if args.split:
        idx = d.indices(args.split)  # raises on untagged datasets
        x, y = d.features[idx], d.labels[idx]
    else:
        x, y = d.features, d.labels
    scores, _ = mlp.forward(params, x)
    rep = metrics.evaluate(y, scores, d.taxonomy, leaves_only=leaves_only)

    payload = rep.to_json_dict()
    payload["split"] = args.split or "all"
    payload["n_examples"] = rep.n_examples
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    out_path = args.out or os.path.join(
        os.path.dirname(os.path.abspath(checkpoint)),
        f"eval_report_{args.split or 'all'}.json",
    )
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    return 0


def _format_ablation_md(dataset_name: str, rows: list[dict]) -> str:
    lines = [
        f"# Ablation: {dataset_name}",
        "",
        "| Loss | Hit@1 | MRR | HierDist |",
        "| --- | --- | --- | --- |",
    ]
    for row in rows:
        lines.append(
            f"| {row['loss_mode']} | {row['hit1']:.2f} | {row['mrr']:.2f} "
            f"| {row['hierdist']:.2f} |"
        )
    return "\n".join(lines) + "\n"


def cmd_ablate(args) -> int:
    cfg = resolve_config(args.config, _collect_overrides(args))
    d = build_dataset(cfg)  # one dataset and split shared by every arm
    run_dir = make_run_dir(args.out, "ablate", cfg["seed"])
    emit_config(cfg, os.path.join(run_dir, "config.resolved.cfg"))

    start = time.perf_counter()
    rows = []
    for arm in ABLATION_ARMS:
        tc = dataclasses.replace(train_config(cfg), loss_mode=arm)
        params, _ = mlp.train(d, d.taxonomy, tc)
        idx = d.indices("test")
        scores, _ = mlp.forward(params, d.features[idx])
        rep = metrics.evaluate(d.labels[idx], scores, d.taxonomy,
                               leaves_only=cfg["leaves_only"])
        rows.append({
            "loss_mode": arm,
            "hit1": round(100.0 * rep.hit_at_1, 2),
            "mrr": round(100.0 * rep.mrr, 2),
            "hierdist": round(rep.hier_dist, 2),
        })
        print(f"{arm:9s} hit@1 {rows[-1]['hit1']:6.2f}  mrr {rows[-1]['mrr']:6.2f}  "
              f"hierdist {rows[-1]['hierdist']:.2f}")
    duration = time.perf_counter() - start

    table = {
        "dataset": _dataset_name(cfg),
        "seed": cfg["seed"],
        "duration_sec": duration,
        "rows": rows,
    }
    with open(os.path.join(run_dir, "ablation.json"), "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=2, sort_keys=True)
        fh.write("\n")
    md = _format_ablation_md(table["dataset"], rows)
    with open(os.path.join(run_dir, "ablation.md"), "w", encoding="utf-8") as fh:
        fh.write(md)
    print(f"run dir: {run_dir}")
    return 0


def cmd_verify(args) -> int:
    results = verify.run_all(args.trials, args.seed)
    failed = False
    for res in results:
        status = "ok" if res.ok else "FAIL"
        print(f"{res.name:24s} {status}  ({res.trials} trials)")
        for key, val in sorted(res.info.items()):
            print(f"  {key}: {val:.6g}" if isinstance(val, float) else f"  {key}: {val}")
        if not res.ok:
            failed = True
            print("  counterexample:")
            print("  " + json.dumps(res.counterexample, indent=2).replace("\n", "\n  "))
    if failed:
        print("verification FAILED", file=sys.stderr)
        return 1
    print("all properties hold")
    return 0


def cmd_synth(args) -> int:
    cfg = data.SynthConfig(
        levels=args.levels,
        branching=args.branching,
        examples_per_leaf=args.examples_per_leaf,
        feature_dim=args.feature_dim,
        cluster_separation=args.separation,
        label_noise=args.label_noise,
        seed=args.seed,
    )
    d = data.synth_generate(cfg)
    data.emit_native(d, args.out)
    print(f"wrote {d.n_examples} examples, {d.taxonomy.n_classes} classes to {args.out}")
    return 0


def _positive_int(raw: str) -> int:
    val = int(raw)
    if val < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {raw}")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcl",
        description="hierarchy-constrained curriculum losses: train, evaluate, verify",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p, with_train_shortcuts=True):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        if with_train_shortcuts:
            p.add_argument("--loss", choices=mlp.LOSS_MODES, help="shortcut for --set loss=...")
            p.add_argument("--seed", type=int, help="shortcut for --set seed=...")
            p.add_argument("--epochs", type=int, help="shortcut for --set epochs=...")
            p.add_argument("--lr", type=float, help="shortcut for --set lr=...")

    p_train = sub.add_parser("train", help="train a model and persist the run")
    add_config_flags(p_train)
    p_train.add_argument("--out", help="run directory (default: timestamped under the run root)")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p_eval.add_argument("--run", help="run directory holding checkpoint and resolved config")
    p_eval.add_argument("--checkpoint", help="checkpoint file")
    p_eval.add_argument("--data-dir", help="native-format dataset directory (no split tags)")
    p_eval.add_argument("--split", choices=data.SPLIT_NAMES, help="evaluate one split only")
    p_eval.add_argument("--out", help="where to write the report JSON")
    add_config_flags(p_eval, with_train_shortcuts=False)
    p_eval.set_defaults(func=cmd_eval)

    p_abl = sub.add_parser("ablate", help="run the four-arm loss-mode comparison")
    add_config_flags(p_abl)
    p_abl.add_argument("--out", help="run directory")
    p_abl.set_defaults(func=cmd_ablate)

    p_ver = sub.add_parser("verify", help="run the randomized property suite")
    p_ver.add_argument("--trials", type=_positive_int, default=200)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(func=cmd_verify)

    p_syn = sub.add_parser("synth", help="write a synthetic dataset in native format")
    p_syn.add_argument("--out", required=True, help="output directory")
    p_syn.add_argument("--levels", type=int, default=3)
    p_syn.add_argument("--branching", type=int, default=3)
    p_syn.add_argument("--examples-per-leaf", type=int, default=150)
    p_syn.add_argument("--feature-dim", type=int, default=16)
    p_syn.add_argument("--separation", type=float, default=2.0)
    p_syn.add_argument("--label-noise", type=float, default=0.0)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except mlp.TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
