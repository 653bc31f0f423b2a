"""Parameter, FLOP and energy accounting for a network configuration.

Convolutions follow the per-filter model::

    F_pf = ((I_r - K_r + 2P_r)/S_r + 1) * ((I_c - K_c + 2P_c)/S_c + 1) * (2*C*K_r*K_c + 1)
    F_c  = (F_pf + (2*C*K_r*K_c + 1)) * N_f          # with ReLU
    F_c  = F_pf * N_f                                # without activation

and the model total is the plain sum over layers. A dense layer is charged
as a convolution whose kernel covers its whole input (one output position,
``2*in + 1`` FLOPs per unit), so ReLU adds ``2*in + 1`` per unit as above.
The sigmoid output layer carries no surcharge. Max-pooling costs one
comparison per window element after the first.
"""
from __future__ import annotations

from .config import NetworkConfig

# theoretical float32 efficiency of the reference GPU, FLOPS per watt
DEFAULT_FLOPS_PER_WATT = 53.8e9


def conv_flops_per_filter(i_r: int, i_c: int, c: int, k_r: int, k_c: int,
                          p_r: int = 0, p_c: int = 0, s_r: int = 1, s_c: int = 1) -> int:
    rows = (i_r - k_r + 2 * p_r) // s_r + 1
    cols = (i_c - k_c + 2 * p_c) // s_c + 1
    return rows * cols * (2 * c * k_r * k_c + 1)


def layer_params(config: NetworkConfig) -> list[int]:
    shapes = config.shapes()
    out = []
    for layer, shape_in in zip(config.layers, shapes[:-1]):
        if layer.kind == "conv":
            kr, kc = layer.kernel
            out.append(layer.filters * (kr * kc * shape_in[2] + 1))
        elif layer.kind in ("dense", "output"):
            out.append(shape_in[0] * layer.units + layer.units)
        else:
            out.append(0)
    return out


def count_params(config: NetworkConfig) -> int:
    return sum(layer_params(config))


def layer_flops(config: NetworkConfig) -> list[int]:
    shapes = config.shapes()
    out = []
    for layer, shape_in, shape_out in zip(config.layers, shapes[:-1], shapes[1:]):
        relu = layer.activation == "relu"
        if layer.kind == "conv":
            h, w, c = shape_in
            kr, kc = layer.kernel
            f_pf = conv_flops_per_filter(h, w, c, kr, kc, *layer.padding, *layer.stride)
            per_position = 2 * c * kr * kc + 1
            out.append((f_pf + (per_position if relu else 0)) * layer.filters)
        elif layer.kind in ("dense", "output"):
            per_unit = 2 * shape_in[0] + 1
            out.append((per_unit + (per_unit if relu else 0)) * layer.units)
        elif layer.kind == "maxpool":
            ho, wo, c = shape_out
            kr, kc = layer.kernel
            out.append(ho * wo * c * (kr * kc - 1))
        else:
            out.append(0)
    return out


def count_flops(config: NetworkConfig) -> int:
    return sum(layer_flops(config))


def tec(flops: float, flops_per_watt: float = DEFAULT_FLOPS_PER_WATT) -> float:
    """Theoretical energy per prediction in joules."""
    if not flops_per_watt > 0:
        raise ValueError("flops_per_watt must be positive")
    return flops / flops_per_watt
