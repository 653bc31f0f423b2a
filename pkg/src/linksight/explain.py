"""Guided-backpropagation saliency maps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import imaging
from .nn import ops
from .nn.config import NetworkConfig
from .nn.network import NetworkState, Probe, _as_batch, _check_state, backward_pass, forward_pass


@dataclass
class SaliencyMap:
    values: np.ndarray
    target_class: int
    image_id: str = ""


def guided_backprop(state: NetworkState, config: NetworkConfig, image,
                    target_class: int | str | None = "auto", image_id: str = "",
                    probe: Probe | None = None) -> SaliencyMap:
    """Gradient of the target sigmoid score w.r.t. the input image.

    At each ReLU the gradient only passes where the forward pre-activation
    was positive and the incoming gradient is positive. ``"auto"`` (or
    None) explains the highest-scoring class.
    """
    _check_state(state, config)
    x = _as_batch(config, image, state.dtype)
    if len(x) != 1:
        raise ValueError("guided_backprop explains one image at a time")
    logits, caches = forward_pass(state, config, x)
    scores = ops.sigmoid(logits)
    k = config.num_classes
    if target_class is None or target_class == "auto":
        target = int(scores[0].argmax())
    else:
        target = int(target_class)
        if not 0 <= target < k:
            raise ValueError(f"target_class {target} outside [0, {k - 1}]")
    d = np.zeros_like(logits)
    d[0, target] = scores[0, target] * (1.0 - scores[0, target])
    _, _, dx = backward_pass(state, config, caches, d, guided=True, probe=probe,
                             need_input_grad=True)
    values = dx[0]
    if values.shape[-1] == 1:
        values = values[..., 0]
    return SaliencyMap(np.asarray(values, dtype=np.float64), target, image_id)


def render_saliency(smap: SaliencyMap, fmt: str = "pgm") -> bytes:
    """Export with per-image min-max scaling; lighter pixels mean more influence."""
    return imaging.export_image(smap.values, fmt)
