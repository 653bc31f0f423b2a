"""How many anomalous examples does the classifier need?

Rebuilds the desk-scale corpus at several anomaly shares and scores each
on one held-out fold. Slow: one full training per share.
"""
import time

from linksight import evaluation, traces

base = traces.generate_synthetic_normal(500, length=64, seed=1).traces
cfg = evaluation.ExperimentConfig(
    seed=1, shares=(0.03, 0.10, 0.33), folds=5, fold_limit=1, epochs=12,
    learning_rate=0.02, momentum=0.9, filters=(32, 16, 8, 4), dtype="float32",
)
t0 = time.time()
rows = evaluation.anomaly_share_sweep(base, cfg)
for r in rows:
    print(f"share {r.share:5.0%}  {r.anomalous_per_kind:4d} traces per anomaly  macro-F1 {r.mean_f1:.3f}")
print(f"({time.time() - t0:.0f} s)")
