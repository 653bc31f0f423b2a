"""Experiment protocol: stratified splits, per-class metrics, repeated runs, share sweeps."""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import baseline, imaging, inject, nn
from ._seeding import derive_seed
from .traces import CLASS_ORDER, DEFAULT_LENGTH, LabeledDataset, Trace

BINARY_CLASS_NAMES = ("normal", "anomaly")
DEFAULT_SHARES = (0.01, 0.03, 0.10, 0.20, 0.33, 0.50)


@dataclass
class ConfusionCounts:
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @property
    def total(self) -> int:
        return int(self.tp[0] + self.fp[0] + self.fn[0] + self.tn[0])


def confusion_counts(y_true, y_pred, num_labels: int) -> ConfusionCounts:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    tp, fp, fn, tn = (np.zeros(num_labels, dtype=np.int64) for _ in range(4))
    for c in range(num_labels):
        t, p = y_true == c, y_pred == c
        tp[c] = np.sum(t & p)
        fp[c] = np.sum(~t & p)
        fn[c] = np.sum(t & ~p)
        tn[c] = np.sum(~t & ~p)
    return ConfusionCounts(tp, fp, fn, tn)


@dataclass
class ClassMetrics:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    # True where the ratio was 0/0 and reported as 0
    precision_undefined: np.ndarray
    recall_undefined: np.ndarray

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def macro_recall(self) -> float:
        return float(self.recall.mean())

    @property
    def macro_f1(self) -> float:
        return float(self.f1.mean())


def _safe_ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    undefined = den == 0
    out = np.divide(num, den, out=np.zeros_like(num), where=~undefined)
    return out, undefined


def precision_recall_f1(counts: ConfusionCounts) -> ClassMetrics:
    precision, p_undef = _safe_ratio(counts.tp, counts.tp + counts.fp)
    recall, r_undef = _safe_ratio(counts.tp, counts.tp + counts.fn)
    f1, _ = _safe_ratio(2 * precision * recall, precision + recall)
    return ClassMetrics(precision, recall, f1, p_undef, r_undef)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _labels_of(data) -> np.ndarray:
    if isinstance(data, LabeledDataset):
        return data.labels()
    return np.asarray(data, dtype=np.int64)


def shuffle_split(data, ratio: float = 0.8, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stratified seeded shuffle split; returns (train_idx, test_idx).

    The train part holds ``round(ratio*n)`` samples, spread over classes by
    largest remainder so each class with at least two members lands in
    both parts. Singleton classes go to train with a warning.
    """
    labels = _labels_of(data)
    n = len(labels)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    rng = np.random.default_rng(derive_seed(seed, "shuffle-split"))
    perm = rng.permutation(n)
    classes, sizes = np.unique(labels, return_counts=True)

    quota = {}
    frac = {}
    for c, size in zip(classes, sizes):
        if size == 1:
            warnings.warn(f"class {c} has a single member; placing it in train", stacklevel=2)
            quota[c], frac[c] = 1, -1.0
            continue
        q = ratio * size
        quota[c] = min(max(int(math.floor(q)), 1), size - 1)
        frac[c] = q - math.floor(q)
    size_of = dict(zip(classes, sizes))
    want = _round_half_up(ratio * n)
    diff = want - sum(quota.values())
    # hand out / take back single samples by fractional remainder, class order breaks ties
    if diff > 0:
        for c in sorted(classes, key=lambda c: (-frac[c], c)):
            if diff == 0:
                break
            if size_of[c] > 1 and quota[c] < size_of[c] - 1:
                quota[c] += 1
                diff -= 1
    elif diff < 0:
        for c in sorted(classes, key=lambda c: (frac[c], c)):
            if diff == 0:
                break
            if size_of[c] > 1 and quota[c] > 1:
                quota[c] -= 1
                diff += 1

    taken = {c: 0 for c in classes}
    train_mask = np.zeros(n, dtype=bool)
    for i in perm:
        c = labels[i]
        if taken[c] < quota[c]:
            train_mask[i] = True
            taken[c] += 1
    return perm[train_mask[perm]], perm[~train_mask[perm]]


def stratified_kfold(data, folds: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded stratified k-fold; every sample is tested exactly once."""
    labels = _labels_of(data)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    rng = np.random.default_rng(derive_seed(seed, "kfold"))
    perm = rng.permutation(len(labels))
    fold_of = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        members = perm[labels[perm] == c]
        fold_of[members] = (np.arange(len(members)) + offset) % folds
        offset += len(members)
    out = []
    for k in range(folds):
        test = perm[fold_of[perm] == k]
        train = perm[fold_of[perm] != k]
        out.append((train, test))
    return out


@dataclass
class ExperimentConfig:
    transform: str = "rp"
    classifier: str = "cnn"  # cnn | knn
    num_classes: int = 5  # 5, or 1 for the binary detector
    split_ratio: float = 0.8
    repeats: int = 10
    seed: int = 0
    class_weights: tuple | None = None
    shares: tuple = DEFAULT_SHARES
    folds: int = 5
    fold_limit: int | None = None  # sweep: evaluate only the first N folds
    epochs: int = 30
    learning_rate: float = 1e-3
    batch_size: int = 32
    momentum: float = 0.0
    filters: tuple = nn.config.DEFAULT_FILTERS
    kernels: tuple = nn.config.DEFAULT_KERNELS
    dense_units: int = 64
    dtype: str = "float64"
    k: int = 1
    window: int | None = None

    def __post_init__(self):
        if not 0 < self.split_ratio < 1:
            raise ValueError("split_ratio must lie in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.fold_limit is not None and not 1 <= self.fold_limit <= self.folds:
            raise ValueError("fold_limit must lie in [1, folds]")
        if self.classifier not in ("cnn", "knn"):
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if self.num_classes not in (1, 5):
            raise ValueError("num_classes must be 1 or 5")
        if self.classifier == "cnn" and self.transform not in imaging.TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")

    def network_config(self, input_size: int) -> nn.NetworkConfig:
        return nn.default_config(input_size, self.num_classes, tuple(self.filters),
                                 tuple(self.kernels), self.dense_units)

    def weights(self) -> np.ndarray:
        if self.class_weights is None:
            return nn.default_class_weights(self.num_classes)
        return np.asarray(self.class_weights, dtype=np.float64)

    @property
    def class_names(self) -> tuple[str, ...]:
        if self.num_classes == 1:
            return BINARY_CLASS_NAMES
        return tuple(k.value for k in CLASS_ORDER)


def eval_labels(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    return (labels != 0).astype(np.int64) if num_classes == 1 else labels


def prepare_images(traces: Sequence[Trace], kind: str, dtype="float64") -> np.ndarray:
    return np.stack([imaging.model_input(imaging.transform(t, kind)) for t in traces]).astype(dtype)


@dataclass
class RepeatResult:
    repeat: int
    metrics: ClassMetrics
    loss_history: list = field(default_factory=list)
    test_idx: np.ndarray | None = None
    state: nn.NetworkState | None = None  # trained CNN weights, kept for inspection


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    repeats: list[RepeatResult]
    params: int
    flops: int
    tec_joules: float

    @property
    def macro_f1s(self) -> np.ndarray:
        return np.array([r.metrics.macro_f1 for r in self.repeats])

    @property
    def macro_f1_mean(self) -> float:
        return float(self.macro_f1s.mean())

    @property
    def macro_f1_std(self) -> float:
        return float(self.macro_f1s.std())

    def class_f1(self, name: str) -> np.ndarray:
        idx = self.config.class_names.index(name)
        return np.array([r.metrics.f1[idx] for r in self.repeats])

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("repeat,class,precision,recall,f1\n")
        for r in self.repeats:
            for i, name in enumerate(self.config.class_names):
                m = r.metrics
                out.write(f"{r.repeat},{name},{float(m.precision[i])!r},{float(m.recall[i])!r},"
                          f"{float(m.f1[i])!r}\n")
        out.write("macro_f1_mean,macro_f1_std,params,flops,tec_joules\n")
        out.write(f"{self.macro_f1_mean!r},{self.macro_f1_std!r},{self.params},{self.flops},"
                  f"{float(self.tec_joules)!r}\n")
        return out.getvalue()

    def to_text(self) -> str:
        cfg = self.config
        names = cfg.class_names
        lines = [
            f"classifier={cfg.classifier} transform={cfg.transform} classes={len(names)} "
            f"repeats={len(self.repeats)} seed={cfg.seed}",
            f"{'class':<10}{'precision':>12}{'recall':>12}{'f1':>12}",
        ]
        for i, name in enumerate(names):
            p = np.mean([r.metrics.precision[i] for r in self.repeats])
            rc = np.mean([r.metrics.recall[i] for r in self.repeats])
            f = np.mean([r.metrics.f1[i] for r in self.repeats])
            lines.append(f"{name:<10}{p:>12.4f}{rc:>12.4f}{f:>12.4f}")
        lines.append(f"macro F1 {self.macro_f1_mean:.4f} +- {self.macro_f1_std:.4f}")
        lines.append(f"weights {self.params}  FLOPs {self.flops}  TEC {self.tec_joules:.6g} J")
        return "\n".join(lines) + "\n"


def read_report_csv(text: str) -> dict:
    """Parse ``ExperimentReport.to_csv`` output back into summary numbers.

    Returns the summary fields plus ``class_f1``: class name -> mean F1 over
    repeats, in file order.
    """
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or lines[0] != "repeat,class,precision,recall,f1":
        raise ValueError("not a report CSV (bad header)")
    try:
        cut = lines.index("macro_f1_mean,macro_f1_std,params,flops,tec_joules")
    except ValueError:
        raise ValueError("report CSV lacks the summary line") from None
    if cut + 1 >= len(lines):
        raise ValueError("report CSV lacks summary values")
    per_class: dict[str, list[float]] = {}
    for line in lines[1:cut]:
        parts = line.split(",")
        if len(parts) != 5:
            raise ValueError(f"malformed report row {line!r}")
        per_class.setdefault(parts[1], []).append(float(parts[4]))
    m, s, params, flops, energy = lines[cut + 1].split(",")
    return {
        "macro_f1_mean": float(m), "macro_f1_std": float(s), "params": int(params),
        "flops": int(flops), "tec_joules": float(energy),
        "class_f1": {k: float(np.mean(v)) for k, v in per_class.items()},
    }


def resources(cfg: ExperimentConfig, input_size: int) -> tuple[int, int, float]:
    if cfg.classifier != "cnn":
        return 0, 0, 0.0
    net = cfg.network_config(input_size)
    flops = nn.count_flops(net)
    return nn.count_params(net), flops, nn.tec(flops)


def fit_and_score(cfg: ExperimentConfig, dataset: LabeledDataset, images, train_idx, test_idx,
                  repeat: int, keep_state: bool = False) -> RepeatResult:
    """Train on ``train_idx``, evaluate on ``test_idx``."""
    labels = dataset.labels()
    truth = eval_labels(labels[test_idx], cfg.num_classes)
    n_labels = 2 if cfg.num_classes == 1 else 5
    history: list = []
    state = None
    if cfg.classifier == "knn":
        values = dataset.values()
        pred = baseline.knn_predict(values[train_idx], labels[train_idx], values[test_idx],
                                    cfg.k, baseline.DtwConfig(cfg.window))
        pred = eval_labels(pred, cfg.num_classes)
    else:
        net = cfg.network_config(dataset.trace_length)
        state = nn.init_state(net, derive_seed(cfg.seed, f"init-{repeat}"), dtype=np.dtype(cfg.dtype))
        try:
            state, history = nn.train(
                state, net, images[train_idx], labels[train_idx], cfg.weights(),
                epochs=cfg.epochs, learning_rate=cfg.learning_rate, batch_size=cfg.batch_size,
                seed=derive_seed(cfg.seed, f"shuffle-{repeat}"), momentum=cfg.momentum,
            )
        except nn.TrainingError as exc:
            raise nn.TrainingError(f"repeat {repeat}: {exc}") from exc
        pred = nn.predict(state, net, images[test_idx])
    metrics = precision_recall_f1(confusion_counts(truth, pred, n_labels))
    return RepeatResult(repeat, metrics, list(history), np.asarray(test_idx),
                        state if keep_state else None)


def run_experiment(dataset: LabeledDataset, cfg: ExperimentConfig, images=None,
                   keep_states: bool = False) -> ExperimentReport:
    """``repeats`` rounds of stratified split, train and evaluate.

    ``keep_states`` keeps each trained network on its ``RepeatResult``.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if cfg.classifier == "cnn" and images is None:
        images = prepare_images(dataset.traces, cfg.transform, cfg.dtype)
    results = []
    for r in range(cfg.repeats):
        train_idx, test_idx = shuffle_split(dataset, cfg.split_ratio, derive_seed(cfg.seed, f"split-{r}"))
        results.append(fit_and_score(cfg, dataset, images, train_idx, test_idx, r, keep_states))
    params, flops, energy = resources(cfg, dataset.trace_length)
    return ExperimentReport(cfg, results, params, flops, energy)


@dataclass
class SweepRow:
    share: float
    mean_f1: float
    fold_f1: list
    anomalous_per_kind: int


def anomaly_share_sweep(base: Sequence[Trace], cfg: ExperimentConfig,
                        plan: inject.InjectionPlan | None = None) -> list[SweepRow]:
    """Mean macro-F1 over stratified k-fold runs for each injected anomaly share."""
    if not base:
        raise ValueError("base corpus is empty")
    length = len(base[0])
    if plan is None:
        plan = inject.InjectionPlan(seed=cfg.seed)
        if length != DEFAULT_LENGTH:
            plan = plan.scaled(length)
    rows = []
    for share in cfg.shares:
        if math.floor(len(base) * share + 1e-9) < 1:
            warnings.warn(f"share {share} injects no trace into a base of {len(base)}; skipped",
                          stacklevel=2)
            continue
        ds = inject.build_labeled_dataset(base, replace(plan, affected_fraction=share))
        images = prepare_images(ds.traces, cfg.transform, cfg.dtype) if cfg.classifier == "cnn" else None
        f1s = []
        splits = stratified_kfold(ds, cfg.folds, derive_seed(cfg.seed, f"sweep-{share}"))
        for k, (tr, te) in enumerate(splits[:cfg.fold_limit]):
            f1s.append(fit_and_score(cfg, ds, images, tr, te, k).metrics.macro_f1)
        rows.append(SweepRow(share, float(np.mean(f1s)), f1s, ds.provenance["affected_per_kind"]))
    return rows


def format_sweep(rows: Sequence[SweepRow]) -> str:
    out = ["share,mean_f1,anomalous_per_kind"]
    out += [f"{r.share!r},{r.mean_f1!r},{r.anomalous_per_kind}" for r in rows]
    return "\n".join(out) + "\n"
