"""1-NN dynamic time warping on raw traces, the classical baseline.

Same corpus recipe as the training demo. DTW needs no training, so the
cost is all in the 400 x 1600 distance matrix (a few seconds with numba).
"""
import time

import numpy as np

from linksight import baseline, evaluation, inject, traces
from linksight.traces import CLASS_ORDER

base = traces.generate_synthetic_normal(500, length=64, seed=1)
dataset = inject.build_labeled_dataset(base.traces, inject.InjectionPlan(seed=1).scaled(64))
labels = dataset.labels()
values = dataset.values()
train, test = evaluation.shuffle_split(dataset, 0.8, seed=0)

for window in (None, 8, 2):
    t0 = time.time()
    pred = baseline.knn_predict(values[train], labels[train], values[test], k=1,
                                cfg=baseline.DtwConfig(window))
    m = evaluation.precision_recall_f1(evaluation.confusion_counts(labels[test], pred, 5))
    f1 = "  ".join(f"{k.value} {m.f1[i]:.3f}" for i, k in enumerate(CLASS_ORDER))
    print(f"window={str(window):>4}  macro-F1 {m.macro_f1:.3f}  ({time.time() - t0:.1f} s)")
    print("   ", f1)

# where does 1-NN go wrong?
pred = baseline.knn_predict(values[train], labels[train], values[test])
confusion = np.zeros((5, 5), dtype=int)
np.add.at(confusion, (labels[test], pred), 1)
print("\nconfusion (rows true, columns predicted):")
print("         " + " ".join(f"{k.value:>8}" for k in CLASS_ORDER))
for i, k in enumerate(CLASS_ORDER):
    print(f"{k.value:>8} " + " ".join(f"{v:8d}" for v in confusion[i]))
