"""
网络模块
带轨迹记录的全连接网络引擎（Dense / BatchNorm / 激活 / 残差块）
"""

from .activations import ActivationKind
from .specs import (
    ActivationSpec,
    BatchNormSpec,
    DenseSpec,
    LayerSpec,
    ResidualSpec,
    build_stack,
    chain_dims,
    spec_from_dict,
    spec_to_dict,
    specs_from_list,
)
from .layers import BNMode
from .engine import (
    BN_EPS,
    BN_MOMENTUM,
    BackwardTrace,
    ForwardTrace,
    InitScheme,
    NetworkState,
    backward,
    forward,
    init_network,
    inject_output_gradient,
    make_correlated_batch,
)

__all__ = [
    'ActivationKind',
    'ActivationSpec',
    'BatchNormSpec',
    'DenseSpec',
    'LayerSpec',
    'ResidualSpec',
    'build_stack',
    'chain_dims',
    'spec_from_dict',
    'spec_to_dict',
    'specs_from_list',
    'BNMode',
    'BN_EPS',
    'BN_MOMENTUM',
    'BackwardTrace',
    'ForwardTrace',
    'InitScheme',
    'NetworkState',
    'backward',
    'forward',
    'init_network',
    'inject_output_gradient',
    'make_correlated_batch',
]
