"""Which pixels of a recurrence plot drive the classifier's decision?

Trains a small network for a few epochs, then writes guided-backprop
saliency maps for one test image per class next to the input image.
"""
from pathlib import Path

import numpy as np

from linksight import evaluation, explain, imaging, inject, nn, traces
from linksight.traces import CLASS_ORDER

out = Path("demo-saliency")
out.mkdir(exist_ok=True)

base = traces.generate_synthetic_normal(200, length=64, seed=2)
dataset = inject.build_labeled_dataset(base.traces, inject.InjectionPlan(seed=2).scaled(64))
cfg = evaluation.ExperimentConfig(repeats=1, epochs=8, learning_rate=0.02, momentum=0.9,
                                  filters=(32, 16, 8, 4), dtype="float32")
images = evaluation.prepare_images(dataset.traces, "rp", "float32")
report = evaluation.run_experiment(dataset, cfg, images, keep_states=True)
run = report.repeats[0]
net = cfg.network_config(64)
print(f"macro-F1 after {cfg.epochs} epochs: {run.metrics.macro_f1:.3f}")

labels = dataset.labels()
for c, kind in enumerate(CLASS_ORDER):
    idx = next(int(i) for i in run.test_idx if labels[i] == c)
    smap = explain.guided_backprop(run.state, net, images[idx], target_class=c,
                                   image_id=dataset.traces[idx].id)
    v = smap.values
    # fraction of total saliency that falls on rows/cols where the trace sits at the floor
    low = dataset.traces[idx].values <= 5
    share = np.abs(v[low]).sum() / max(np.abs(v).sum(), 1e-30) if low.any() else 0.0
    print(f"{kind.value:<8} {smap.image_id:<18} saliency range [{v.min():.2e}, {v.max():.2e}]"
          f"  on low-RSSI rows: {share:.2f}")
    (out / f"{kind.value}-input.pgm").write_bytes(imaging.export_image(images[idx], "pgm"))
    (out / f"{kind.value}-saliency.pgm").write_bytes(explain.render_saliency(smap, "pgm"))
print(f"wrote {len(list(out.glob('*.pgm')))} images to {out}/")
