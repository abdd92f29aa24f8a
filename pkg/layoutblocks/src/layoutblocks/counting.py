"""Closed-form parameter counting for the block stack."""

from __future__ import annotations

from dataclasses import replace

from .blocks import BlockConfig


def _linear(n_in: int, n_out: int, bias: bool = True) -> int:
    return n_in * n_out + (n_out if bias else 0)


def count_map_to_tokens(cfg: BlockConfig) -> int:
    c, d, e = cfg.channels, cfg.token_dim, cfg.ffn_expansion
    total = _linear(d, c)            # query projection
    total += _linear(c, d)           # output projection
    total += 2 * d                   # attention layer norm
    total += _linear(d, e * d) + _linear(e * d, d)
    total += 2 * d                   # ffn layer norm
    return total


def count_token_mixer(cfg: BlockConfig) -> int:
    d, e = cfg.token_dim, cfg.ffn_expansion
    total = _linear(d, 3 * d) + _linear(d, d)
    total += 2 * d
    total += _linear(d, e * d) + _linear(e * d, d)
    total += 2 * d
    return total


def count_local_path(cfg: BlockConfig) -> int:
    c, c_b, d = cfg.channels, cfg.bottleneck, cfg.token_dim
    hidden = cfg.coeff_hidden
    total = _linear(c, c_b)                                  # 1x1 reduce
    total += c_b * cfg.group_width * 49 + c_b                # 7x7 grouped conv
    total += d * c_b                                         # key projection, no bias
    total += _linear(d, hidden) + _linear(hidden, 4 * c_b)   # coefficient head
    return total


def count_tokens_to_map(cfg: BlockConfig) -> int:
    c, c_b, d, e = cfg.channels, cfg.bottleneck, cfg.token_dim, cfg.ffn_expansion
    total = _linear(d, c_b)                                  # value projection
    total += _linear(c_b, e * c_b) + _linear(e * c_b, c_b)   # pixel ffn
    total += _linear(c_b, c)                                 # 1x1 restore
    return total


def count_block(cfg: BlockConfig) -> int:
    return (
        count_map_to_tokens(cfg)
        + count_token_mixer(cfg)
        + count_local_path(cfg)
        + count_tokens_to_map(cfg)
    )


def param_count(cfg: BlockConfig) -> int:
    """Parameters of the block stack (tokens are an input, counted separately)."""
    return cfg.depth * count_block(cfg)


def token_parameters(cfg: BlockConfig) -> int:
    return cfg.tokens * cfg.token_dim


def candidates_for_budget(
    target: int = 950_000, depth: int = 3, tokens: int = 8, rel_tol: float = 0.02
) -> list[tuple[BlockConfig, int]]:
    """Configurations whose stack-plus-token count lands near a budget.

    The production-scale channel/token dimensions behind the published size
    are not stated anywhere, so this reports plausible combinations instead
    of asserting one.
    """
    out = []
    base = BlockConfig()
    for channels in (64, 96, 128, 160, 192, 256):
        for bottleneck in {channels // 4, channels // 2}:
            if bottleneck % 4 or bottleneck < 4:
                continue
            for token_dim in (64, 96, 128, 160, 192, 256):
                heads = 8 if channels % 8 == 0 and token_dim % 8 == 0 else 4
                if channels % heads or token_dim % heads:
                    continue
                cfg = replace(
                    base,
                    channels=channels,
                    bottleneck=bottleneck,
                    token_dim=token_dim,
                    heads=heads,
                    tokens=tokens,
                    depth=depth,
                )
                total = param_count(cfg) + token_parameters(cfg)
                if abs(total - target) <= rel_tol * target:
                    out.append((cfg, total))
    out.sort(key=lambda item: abs(item[1] - target))
    return out
