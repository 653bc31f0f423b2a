"""Train the anomaly classifier on a small synthetic corpus and score it.

500 clean traces of 64 samples are copied once per anomaly type, a third
of each copy gets the anomaly, and the recurrence-plot images feed the
four-convolution network (filter counts scaled down to 32/16/8/4). One
80:20 stratified split, 20 epochs; takes several minutes on one core.
"""
import time

import numpy as np

from linksight import evaluation, inject, nn, traces

LENGTH = 64
base = traces.generate_synthetic_normal(500, length=LENGTH, seed=1)
plan = inject.InjectionPlan(seed=1).scaled(LENGTH)
dataset = inject.build_labeled_dataset(base.traces, plan)
print(f"{len(dataset)} traces, class counts {dataset.class_counts()}")
print("scaled plan:", plan.suddend_start_range, plan.suddenr_start_range,
      plan.suddenr_duration_range, plan.slowd_start_range, plan.slowd_duration_range)

cfg = evaluation.ExperimentConfig(
    transform="rp", repeats=1, seed=0, epochs=20, learning_rate=0.02, momentum=0.9,
    batch_size=32, filters=(32, 16, 8, 4), dtype="float32",
)
net = cfg.network_config(LENGTH)
print(f"network: {nn.count_params(net)} weights, {nn.count_flops(net)} FLOPs per image, "
      f"TEC {nn.tec(nn.count_flops(net)) * 1e3:.3f} mJ")

t0 = time.time()
report = evaluation.run_experiment(dataset, cfg)
print(f"trained and scored in {time.time() - t0:.0f} s")
print()
print(report.to_text(), end="")

losses = np.array(report.repeats[0].loss_history)
print("loss every 5 epochs:", np.round(losses[::5], 4))
