"""Command-line front end: generate/ingest -> inject -> transform -> train -> eval -> explain -> report.

Every command writes under ``--out`` (default ``$LINKSIGHT_OUT``, else
``linksight-out``) and prints a one-line summary. Exit status is 0 on
success, 1 for a pipeline error and 2 for a usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import evaluation, explain, imaging, inject, nn, traces
from ._seeding import derive_seed
from .config import format_kv, parse_kv
from .nn import checkpoint

DEFAULT_OUT = "linksight-out"
TRAIN_META = "train.meta"

COMMAND_MODULE = {
    "generate": "traces", "ingest": "traces", "inject": "inject", "transform": "imaging",
    "train": "nn", "eval": "eval", "sweep": "eval", "baseline": "baseline",
    "explain": "explain", "report": "eval",
}


class UsageError(Exception):
    pass


# -- argument helpers ---------------------------------------------------------

def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.replace(" ", "").split(",") if p)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.replace(" ", "").split(",") if p)


def _window(text: str) -> int | None:
    return None if text.lower() in ("none", "") else int(text)


def _target(text: str):
    return "auto" if text == "auto" else int(text)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="root seed for every random draw")
    p.add_argument("--config", help="flat key=value file mirroring the flags")
    p.add_argument("--out", help="output directory (default $LINKSIGHT_OUT or ./linksight-out)")
    return p


def _training() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--kind", default="rp", choices=[k.value for k in imaging.ImageKind])
    p.add_argument("--classes", type=int, default=5, choices=(1, 5),
                   help="5 for anomaly type, 1 for the binary detector")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--class-weights", type=_floats, default=None,
                   help="comma list indexed by label (default 0.1 for None, 1 otherwise)")
    p.add_argument("--filters", type=_ints, default=nn.config.DEFAULT_FILTERS)
    p.add_argument("--kernels", type=_ints, default=nn.config.DEFAULT_KERNELS)
    p.add_argument("--dense-units", type=int, default=64)
    p.add_argument("--dtype", default="float64", choices=("float64", "float32"))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linksight", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    common, training = _common(), _training()

    p = sub.add_parser("generate", parents=[common], help="synthetic anomaly-free traces")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--length", type=int, default=traces.DEFAULT_LENGTH)
    p.add_argument("--mean", type=float, default=40.0)
    p.add_argument("--stddev", type=float, default=3.0)

    p = sub.add_parser("ingest", parents=[common], help="parse trace files into a dataset")
    p.add_argument("--input", nargs="+", required=True, help="trace files or directories")
    p.add_argument("--length", type=int, default=None, help="truncate to this many samples")
    p.add_argument("--keep-lossy", action="store_true", help="keep the lossy traces instead")

    p = sub.add_parser("inject", parents=[common], help="build a labeled dataset")
    p.add_argument("--input", required=True, help="dataset directory of normal traces")
    p.add_argument("--fraction", type=float, default=0.33)
    p.add_argument("--plan", help="key=value injection plan file")
    p.add_argument("--no-scale", action="store_true",
                   help="keep the 300-sample ranges for other trace lengths")

    p = sub.add_parser("transform", parents=[common], help="render traces as images")
    p.add_argument("--input", required=True, help="dataset directory or trace file")
    p.add_argument("--kind", default="rp", choices=[k.value for k in imaging.ImageKind])
    p.add_argument("--format", default="pgm", choices=("pgm", "csv"))
    p.add_argument("--epsilon", type=float, default=None, help="threshold for rp_binary")

    p = sub.add_parser("train", parents=[common, training], help="train the CNN")
    p.add_argument("--input", required=True)
    p.add_argument("--holdout", type=float, default=0.2, help="share kept out for eval")

    p = sub.add_parser("eval", parents=[common, training], help="repeated split/train/evaluate")
    p.add_argument("--input", required=True)
    p.add_argument("--model", help="evaluate this checkpoint instead of training")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--ratio", type=float, default=0.8)

    p = sub.add_parser("sweep", parents=[common, training], help="anomaly-share sweep")
    p.add_argument("--input", required=True, help="dataset directory of normal traces")
    p.add_argument("--shares", type=_floats, default=evaluation.DEFAULT_SHARES)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--fold-limit", type=int, default=None, help="run only the first N folds")

    p = sub.add_parser("baseline", parents=[common], help="1-NN DTW baseline")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--window", type=_window, default=None, help="Sakoe-Chiba radius")
    p.add_argument("--classes", type=int, default=5, choices=(1, 5))
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--ratio", type=float, default=0.8)

    p = sub.add_parser("explain", parents=[common], help="guided-backprop saliency maps")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="dataset directory or trace file")
    p.add_argument("--ids", default="", help="comma list of trace ids (default all)")
    p.add_argument("--class", dest="target", type=_target, default="auto",
                   help="auto or a class index")
    p.add_argument("--format", default="pgm", choices=("pgm", "csv"))

    p = sub.add_parser("report", parents=[common], help="summarize report CSVs")
    p.add_argument("--input", nargs="+", required=True)
    return parser


# -- configuration files --------------------------------------------------------

def _apply_config(parser: argparse.ArgumentParser, argv, args) -> argparse.Namespace:
    sub = parser._subparsers._group_actions[0].choices[args.command]
    try:
        values = parse_kv(Path(args.config).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"{args.config}: {exc}") from None
    actions = {}
    for a in sub._actions:
        for opt in a.option_strings:
            if opt.startswith("--"):
                actions[opt[2:].replace("-", "_")] = a
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise UsageError(f"{args.config}: unknown key {key!r} for {args.command}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = _bool(raw)
        elif action.nargs == "+":
            defaults[action.dest] = [p for p in raw.replace(",", " ").split() if p]
        else:
            defaults[action.dest] = raw
        action.required = False
    sub.set_defaults(**defaults)
    args = parser.parse_args(argv)
    for dest in defaults:
        if getattr(args, dest) is None:
            raise UsageError(f"{args.config}: empty value for {dest!r}")
    return args


# -- input helpers ---------------------------------------------------------------

def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("LINKSIGHT_OUT") or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _trace_files(paths) -> list[Path]:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.rglob("*.trace")))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(f"no such file or directory: {p}")
    return files


def _load_traces(path) -> list[traces.Trace]:
    path = Path(path)
    if (path / traces.MANIFEST).exists():
        return traces.load_dataset(path).traces
    out = []
    for f in _trace_files([path]):
        try:
            t = traces.parse_trace_file(f.read_text())
        except traces.TraceParseError as exc:
            raise traces.TraceParseError(f"{f}: {exc}") from None
        out.append(t if t.id else t.replace(id=f.stem))
    if not out:
        raise ValueError(f"no traces found in {path}")
    return out


def _experiment_config(args, **extra) -> evaluation.ExperimentConfig:
    return evaluation.ExperimentConfig(
        transform=args.kind, num_classes=args.classes, seed=args.seed,
        class_weights=args.class_weights, epochs=args.epochs, learning_rate=args.lr,
        batch_size=args.batch, momentum=args.momentum, filters=args.filters,
        kernels=args.kernels, dense_units=args.dense_units, dtype=args.dtype, **extra,
    )


def _write(path: Path, data) -> None:
    if isinstance(data, str):
        data = data.encode()
    path.write_bytes(data)


# -- commands -------------------------------------------------------------------------

def cmd_generate(args, out: Path) -> str:
    ds = traces.generate_synthetic_normal(args.count, args.length, args.mean, args.stddev, args.seed)
    traces.save_dataset(ds, out)
    return f"generate: {len(ds)} traces of length {ds.trace_length} -> {out}"


def cmd_ingest(args, out: Path) -> str:
    parsed = []
    for f in _trace_files(args.input):
        try:
            t = traces.parse_trace_file(f.read_text())
        except traces.TraceParseError as exc:
            raise traces.TraceParseError(f"{f}: {exc}") from None
        parsed.append(t if t.id else t.replace(id=f.stem))
    kept = traces.filter_complete(parsed, keep_lossy=args.keep_lossy)
    length = args.length
    if length is None:
        if not kept:
            raise ValueError("no trace survived filtering")
        length = min(len(t) for t in kept)
    kept = traces.fit_length(kept, length)
    if not kept:
        raise ValueError(f"no trace has {length} samples")
    ds = traces.LabeledDataset(kept, length, args.seed,
                               {"source": "ingest", "files": len(parsed)})
    traces.save_dataset(ds, out)
    return f"ingest: kept {len(kept)} of {len(parsed)} traces (length {length}) -> {out}"


def cmd_inject(args, out: Path) -> str:
    base = traces.load_dataset(args.input)
    plan = inject.InjectionPlan.from_text(Path(args.plan).read_text()) if args.plan else inject.InjectionPlan()
    plan = replace(plan, affected_fraction=args.fraction, seed=args.seed)
    if base.trace_length != traces.DEFAULT_LENGTH and not args.no_scale:
        plan = plan.scaled(base.trace_length)
    ds = inject.build_labeled_dataset(base.traces, plan)
    traces.save_dataset(ds, out)
    _write(out / "plan.txt", plan.to_text())
    lines = ["id,parameters"]
    for tid, params in ds.injections:
        lines.append(f"{tid}," + ";".join(f"{k}={v}" for k, v in params.items()))
    _write(out / "injections.csv", "\n".join(lines) + "\n")
    per_kind = ds.provenance["affected_per_kind"]
    return f"inject: {len(ds)} traces, {per_kind} per anomaly kind -> {out}"


def cmd_transform(args, out: Path) -> str:
    items = _load_traces(args.input)
    img_dir = out / "images"
    img_dir.mkdir(exist_ok=True)
    for t in items:
        if args.kind == "rp_binary":
            if args.epsilon is None:
                raise ValueError("rp_binary needs --epsilon")
            m = imaging.recurrence_plot(t, epsilon=args.epsilon, binarize=True)
        else:
            m = imaging.transform(t, args.kind)
        _write(img_dir / f"{t.id}.{args.format}", imaging.export_image(m, args.format))
    return f"transform: {len(items)} {args.kind} images ({args.format}) -> {img_dir}"


def _read_meta(model_path: Path) -> dict:
    meta = model_path.parent / TRAIN_META
    return parse_kv(meta.read_text()) if meta.exists() else {}


def cmd_train(args, out: Path) -> str:
    ds = traces.load_dataset(args.input)
    cfg = _experiment_config(args)
    net = cfg.network_config(ds.trace_length)
    if 0 < args.holdout < 1:
        train_idx, test_idx = evaluation.shuffle_split(ds, 1 - args.holdout, derive_seed(args.seed, "split-0"))
    elif args.holdout == 0:
        train_idx, test_idx = np.arange(len(ds)), np.arange(0)
    else:
        raise ValueError("--holdout must lie in [0, 1)")
    images = evaluation.prepare_images([ds.traces[i] for i in train_idx], args.kind, args.dtype)
    state = nn.init_state(net, derive_seed(args.seed, "init-0"), dtype=np.dtype(args.dtype))
    state, history = nn.train(
        state, net, images, ds.labels()[train_idx], cfg.weights(), epochs=args.epochs,
        learning_rate=args.lr, batch_size=args.batch, seed=derive_seed(args.seed, "shuffle-0"),
        momentum=args.momentum,
    )
    checkpoint.save(out / "model.ckpt", state, net)
    _write(out / "history.csv", "epoch,loss\n" + "".join(f"{e},{v!r}\n" for e, v in enumerate(history)))
    test_ids = {ds.traces[i].id for i in test_idx}
    _write(out / "split.csv", "id,part\n" + "".join(
        f"{t.id},{'test' if t.id in test_ids else 'train'}\n" for t in ds.traces))
    _write(out / TRAIN_META, format_kv({"kind": args.kind, "dtype": args.dtype, "seed": args.seed}))
    last = f"{history[-1]:.6g}" if history else "n/a"
    return f"train: {len(train_idx)} images, {args.epochs} epochs, final loss {last} -> {out / 'model.ckpt'}"


def _evaluate_model(args, ds: traces.LabeledDataset, cfg) -> evaluation.ExperimentReport:
    model = Path(args.model)
    state, net = checkpoint.load(model)
    meta = _read_meta(model)
    kind = meta.get("kind", args.kind)
    cfg = replace(cfg, transform=kind, repeats=1, num_classes=net.num_classes)
    split = model.parent / "split.csv"
    idx = np.arange(len(ds))
    if split.exists():
        rows = list(csv.DictReader(io.StringIO(split.read_text())))
        test = {r["id"] for r in rows if r["part"] == "test"}
        idx = np.array([i for i, t in enumerate(ds.traces) if t.id in test], dtype=np.int64)
        if len(idx) == 0:
            raise ValueError(f"no held-out trace of {split} found in the dataset")
    images = evaluation.prepare_images([ds.traces[i] for i in idx], kind, state.dtype)
    pred = nn.predict(state, net, images)
    truth = evaluation.eval_labels(ds.labels()[idx], net.num_classes)
    n_labels = 2 if net.num_classes == 1 else 5
    metrics = evaluation.precision_recall_f1(evaluation.confusion_counts(truth, pred, n_labels))
    flops = nn.count_flops(net)
    return evaluation.ExperimentReport(cfg, [evaluation.RepeatResult(0, metrics)],
                                       nn.count_params(net), flops, nn.tec(flops))


def _write_report(report: evaluation.ExperimentReport, out: Path) -> None:
    _write(out / "report.csv", report.to_csv())
    _write(out / "report.txt", report.to_text())


def cmd_eval(args, out: Path) -> str:
    ds = traces.load_dataset(args.input)
    cfg = _experiment_config(args, repeats=args.repeats, split_ratio=args.ratio)
    report = _evaluate_model(args, ds, cfg) if args.model else evaluation.run_experiment(ds, cfg)
    _write_report(report, out)
    return (f"eval: macro-F1 {report.macro_f1_mean:.4f} +- {report.macro_f1_std:.4f} over "
            f"{len(report.repeats)} repeat(s) -> {out / 'report.csv'}")


def cmd_sweep(args, out: Path) -> str:
    base = traces.load_dataset(args.input)
    cfg = _experiment_config(args, shares=args.shares, folds=args.folds, fold_limit=args.fold_limit)
    rows = evaluation.anomaly_share_sweep(base.traces, cfg)
    _write(out / "sweep.csv", evaluation.format_sweep(rows))
    best = max(rows, key=lambda r: r.mean_f1) if rows else None
    tail = f", best share {best.share!r} at F1 {best.mean_f1:.4f}" if best else ""
    return f"sweep: {len(rows)} shares{tail} -> {out / 'sweep.csv'}"


def cmd_baseline(args, out: Path) -> str:
    ds = traces.load_dataset(args.input)
    cfg = evaluation.ExperimentConfig(classifier="knn", num_classes=args.classes, seed=args.seed,
                                      repeats=args.repeats, split_ratio=args.ratio, k=args.k,
                                      window=args.window)
    report = evaluation.run_experiment(ds, cfg)
    _write_report(report, out)
    return (f"baseline: {args.k}-NN DTW macro-F1 {report.macro_f1_mean:.4f} over "
            f"{len(report.repeats)} repeat(s) -> {out / 'report.csv'}")


def cmd_explain(args, out: Path) -> str:
    model = Path(args.model)
    state, net = checkpoint.load(model)
    kind = _read_meta(model).get("kind", "rp")
    items = _load_traces(args.input)
    if args.ids:
        wanted = [s for s in args.ids.split(",") if s]
        by_id = {t.id: t for t in items}
        missing = [w for w in wanted if w not in by_id]
        if missing:
            raise ValueError(f"unknown trace id(s): {', '.join(missing)}")
        items = [by_id[w] for w in wanted]
    sal_dir = out / "saliency"
    sal_dir.mkdir(exist_ok=True)
    lines = ["id,target_class"]
    for t in items:
        image = imaging.model_input(imaging.transform(t, kind))
        smap = explain.guided_backprop(state, net, image, args.target, image_id=t.id)
        _write(sal_dir / f"{t.id}.{args.format}", explain.render_saliency(smap, args.format))
        lines.append(f"{t.id},{smap.target_class}")
    _write(sal_dir / "targets.csv", "\n".join(lines) + "\n")
    return f"explain: {len(items)} saliency maps ({kind}) -> {sal_dir}"


def cmd_report(args, out: Path) -> str:
    rows = []
    class_order: list[str] = []
    for path in args.input:
        summary = evaluation.read_report_csv(Path(path).read_text())
        for name in summary["class_f1"]:
            if name not in class_order:
                class_order.append(name)
        rows.append((path, summary))
    header = ["source", "macro_f1_mean", "macro_f1_std", "params", "flops", "tec_joules"]
    header += [f"f1_{c}" for c in class_order]
    lines = [",".join(header)]
    for path, s in rows:
        vals = [path, repr(s["macro_f1_mean"]), repr(s["macro_f1_std"]), str(s["params"]),
                str(s["flops"]), repr(s["tec_joules"])]
        vals += [repr(s["class_f1"][c]) if c in s["class_f1"] else "" for c in class_order]
        lines.append(",".join(vals))
    _write(out / "summary.csv", "\n".join(lines) + "\n")
    best = max(rows, key=lambda r: r[1]["macro_f1_mean"])
    return f"report: {len(rows)} report(s), best {best[0]} macro-F1 {best[1]['macro_f1_mean']:.4f} -> {out / 'summary.csv'}"


COMMANDS = {
    "generate": cmd_generate, "ingest": cmd_ingest, "inject": cmd_inject,
    "transform": cmd_transform, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep,
    "baseline": cmd_baseline, "explain": cmd_explain, "report": cmd_report,
}


def _module_tag(exc: BaseException, command: str) -> str:
    tag = COMMAND_MODULE[command]
    tb = exc.__traceback__
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("linksight.") and name != __name__:
            tag = name.split(".")[1]
        tb = tb.tb_next
    return {"evaluation": "eval", "_seeding": "cli", "config": "cli"}.get(tag, tag)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"linksight: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        out = _out_dir(args)
        summary = COMMANDS[args.command](args, out)
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"linksight {_module_tag(exc, args.command)}: error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
