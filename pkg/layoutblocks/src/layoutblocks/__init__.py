"""Toy-scale reference of layout-token attention blocks with dynamic activations."""

__version__ = "0.1.0"

from .blocks import (
    BlockConfig,
    DynamicCoefficients,
    LayoutBlock,
    LayoutBlockStack,
    MapToTokens,
    TokenMixer,
    TokensToMap,
    axis_max_pool,
    build_stack,
    dynamic_relu,
    init_tokens,
)
from .counting import candidates_for_budget, count_block, param_count, token_parameters
from .gradients import check_gradients

__all__ = [
    "__version__",
    "BlockConfig",
    "DynamicCoefficients",
    "LayoutBlock",
    "LayoutBlockStack",
    "MapToTokens",
    "TokenMixer",
    "TokensToMap",
    "axis_max_pool",
    "build_stack",
    "dynamic_relu",
    "init_tokens",
    "candidates_for_budget",
    "count_block",
    "param_count",
    "token_parameters",
    "check_gradients",
]
