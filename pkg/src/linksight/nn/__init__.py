from .accounting import count_flops, count_params, layer_flops, layer_params, tec
from .config import (
    ConfigError,
    LayerSpec,
    NetworkConfig,
    conv,
    default_config,
    dense,
    flatten,
    maxpool,
    output,
)
from .network import (
    NetworkState,
    ShapeError,
    TrainingError,
    decide,
    default_class_weights,
    forward,
    gradients,
    init_state,
    loss,
    predict,
    predict_scores,
    train,
    zero_state,
)
