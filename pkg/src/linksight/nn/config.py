from __future__ import annotations

from dataclasses import dataclass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv | maxpool | flatten | dense | output
    filters: int = 0
    kernel: tuple[int, int] = (1, 1)
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)
    units: int = 0
    activation: str | None = None


def conv(filters: int, kernel: int | tuple[int, int], stride=1, padding=0,
         activation: str = "relu") -> LayerSpec:
    return LayerSpec("conv", filters=filters, kernel=_pair(kernel), stride=_pair(stride),
                     padding=_pair(padding), activation=activation)


def maxpool(size: int | tuple[int, int] = 2, stride=None) -> LayerSpec:
    size = _pair(size)
    return LayerSpec("maxpool", kernel=size, stride=_pair(stride) if stride is not None else size)


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


def dense(units: int, activation: str = "relu") -> LayerSpec:
    return LayerSpec("dense", units=units, activation=activation)


def output(units: int) -> LayerSpec:
    return LayerSpec("output", units=units, activation="sigmoid")


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        a, b = v
        return (int(a), int(b))
    return (int(v), int(v))


@dataclass(frozen=True)
class NetworkConfig:
    input_size: int
    layers: tuple[LayerSpec, ...]
    num_classes: int = 5
    channels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        self.shapes()

    def shapes(self) -> list[tuple[int, ...]]:
        """Input shape followed by the output shape of every layer."""
        if self.num_classes not in (1, 5):
            raise ConfigError("num_classes must be 1 (binary) or 5")
        if self.input_size < 1 or self.channels < 1:
            raise ConfigError("input size and channels must be positive")
        shape: tuple[int, ...] = (self.input_size, self.input_size, self.channels)
        shapes = [shape]
        for i, layer in enumerate(self.layers):
            shape = _layer_output(i, layer, shape)
            shapes.append(shape)
        if not self.layers or self.layers[-1].kind != "output":
            raise ConfigError("last layer must be the sigmoid output layer")
        if self.layers[-1].units != self.num_classes:
            raise ConfigError(
                f"output layer has {self.layers[-1].units} units, num_classes={self.num_classes}"
            )
        return shapes


def conv_output_dim(size: int, kernel: int, padding: int, stride: int) -> int:
    span = size - kernel + 2 * padding
    if span < 0 or span % stride:
        raise ConfigError(
            f"(I - K + 2P)/S + 1 is not a positive integer for I={size}, K={kernel}, "
            f"P={padding}, S={stride}"
        )
    return span // stride + 1


def _layer_output(i: int, layer: LayerSpec, shape: tuple[int, ...]) -> tuple[int, ...]:
    kind = layer.kind
    if kind in ("conv", "maxpool"):
        if len(shape) != 3:
            raise ConfigError(f"layer {i} ({kind}) needs a spatial input, got {shape}")
        if min(layer.kernel) < 1 or min(layer.stride) < 1 or min(layer.padding) < 0:
            raise ConfigError(f"layer {i}: kernel/stride must be positive, padding non-negative")
        h, w, c = shape
        if kind == "conv":
            if layer.filters < 1:
                raise ConfigError(f"layer {i}: conv needs at least one filter")
            if layer.activation not in ("relu", None):
                raise ConfigError(f"layer {i}: hidden activation must be relu")
            return (
                conv_output_dim(h, layer.kernel[0], layer.padding[0], layer.stride[0]),
                conv_output_dim(w, layer.kernel[1], layer.padding[1], layer.stride[1]),
                layer.filters,
            )
        (kr, kc), (sr, sc) = layer.kernel, layer.stride
        if kr > h or kc > w:
            raise ConfigError(f"layer {i}: pool window larger than input {shape}")
        return ((h - kr) // sr + 1, (w - kc) // sc + 1, c)
    if kind == "flatten":
        n = 1
        for d in shape:
            n *= d
        return (n,)
    if kind in ("dense", "output"):
        if len(shape) != 1:
            raise ConfigError(f"layer {i} ({kind}) needs a flat input; add flatten first")
        if layer.units < 1:
            raise ConfigError(f"layer {i}: units must be positive")
        if kind == "dense" and layer.activation not in ("relu", None):
            raise ConfigError(f"layer {i}: hidden activation must be relu")
        if kind == "output" and layer.activation != "sigmoid":
            raise ConfigError("output layer uses a sigmoid")
        return (layer.units,)
    raise ConfigError(f"unknown layer kind {kind!r}")


DEFAULT_FILTERS = (128, 64, 32, 16)
DEFAULT_KERNELS = (3, 7, 7, 7)


def default_config(input_size: int = 300, num_classes: int = 5,
                   filters=DEFAULT_FILTERS, kernels=DEFAULT_KERNELS,
                   dense_units: int = 64) -> NetworkConfig:
    """Four valid convolutions, one 2×2 max-pool, a 64-unit dense layer, sigmoid output."""
    if len(filters) != len(kernels):
        raise ConfigError("filters and kernels differ in length")
    layers = [conv(f, k) for f, k in zip(filters, kernels)]
    layers += [maxpool(2, 2), flatten(), dense(dense_units), output(num_classes)]
    return NetworkConfig(input_size=input_size, layers=tuple(layers), num_classes=num_classes)
