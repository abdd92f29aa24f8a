"""Layout-token attention blocks over a feature map, at desk scale.

Each block exchanges information between a feature map F (C x H x W) and a
small set of layout tokens z (M x d) through four pillars:

1. map -> tokens: cross-attention where the tokens query a concatenation of
   row-wise and column-wise max pooling of F (layout tends to be rectangular,
   so axis pooling is a cheap global summary), followed by a feed-forward.
   Only the queries get a learned projection; keys and values are raw pooled
   slices, which keeps the pillar light.
2. token mixer: a standard transformer encoder layer on the tokens.
3. local path: a bottleneck (1x1 reduce, 7x7 grouped conv with group width 4)
   whose activations are dynamic: per-pixel piecewise-linear coefficients are
   attention-weighted combinations of token-derived parameters. The same
   coefficient tensor drives both activation sites, and the attention map is
   kept for pillar 4.
4. tokens -> map: the stored attention map pulls token values back onto the
   pixels, a position-wise feed-forward mixes them, and a 1x1 convolution
   restores the channel count.

Everything runs in float64 for reproducible numerics and exact gradient
checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import Tensor, nn

#: Scales applied to raw token-derived activation coefficients. The first
#: affine piece starts near identity (slope 1), the second near zero.
SLOPE_SCALE = 0.5
INTERCEPT_SCALE = 0.25


@dataclass(frozen=True)
class BlockConfig:
    channels: int = 16       # C, feature-map channels
    bottleneck: int = 8      # C_b, local-path channels (multiple of group width)
    token_dim: int = 16      # d
    tokens: int = 8          # M
    heads: int = 2
    ffn_expansion: int = 4
    head_hidden: int | None = None  # hidden width of the coefficient head f(.)
    group_width: int = 4
    depth: int = 3

    def __post_init__(self) -> None:
        if self.bottleneck % self.group_width != 0:
            raise ValueError(
                f"bottleneck channels {self.bottleneck} must be divisible by "
                f"group width {self.group_width}"
            )
        if self.channels % self.heads != 0:
            raise ValueError(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.token_dim % self.heads != 0:
            raise ValueError(f"token_dim {self.token_dim} not divisible by heads {self.heads}")
        if min(self.channels, self.bottleneck, self.token_dim, self.tokens, self.heads,
               self.ffn_expansion, self.depth) < 1:
            raise ValueError("all size fields must be positive")

    @property
    def coeff_hidden(self) -> int:
        return self.head_hidden if self.head_hidden is not None else self.token_dim


def axis_max_pool(feature_map: Tensor) -> Tensor:
    """Concatenate row-wise and column-wise max pooling: (H+W) x C."""
    if feature_map.dim() != 3:
        raise ValueError(f"expected a C x H x W feature map, got shape {tuple(feature_map.shape)}")
    rows = feature_map.max(dim=2).values.transpose(0, 1)  # H x C
    cols = feature_map.max(dim=1).values.transpose(0, 1)  # W x C
    return torch.cat([rows, cols], dim=0)


def _split_heads(x: Tensor, heads: int) -> Tensor:
    n, dim = x.shape
    return x.reshape(n, heads, dim // heads).transpose(0, 1)  # heads x n x dim/heads


class MapToTokens(nn.Module):
    """Tokens attend to axis-pooled map features; queries only are projected."""

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        self.cfg = cfg
        c, d = cfg.channels, cfg.token_dim
        self.query = nn.Linear(d, c)
        self.out = nn.Linear(c, d)
        self.norm_attn = nn.LayerNorm(d)
        self.ffn = nn.Sequential(
            nn.Linear(d, cfg.ffn_expansion * d),
            nn.GELU(),
            nn.Linear(cfg.ffn_expansion * d, d),
        )
        self.norm_ffn = nn.LayerNorm(d)
        self.last_attention: Tensor | None = None

    def forward(self, feature_map: Tensor, tokens: Tensor) -> Tensor:
        cfg = self.cfg
        pooled = axis_max_pool(feature_map)  # (H+W) x C
        q = _split_heads(self.query(tokens), cfg.heads)          # h x M x C/h
        k = v = _split_heads(pooled, cfg.heads)                   # h x (H+W) x C/h
        scores = q @ k.transpose(1, 2) / math.sqrt(cfg.channels // cfg.heads)
        weights = torch.softmax(scores, dim=-1)                   # h x M x (H+W)
        self.last_attention = weights
        mixed = (weights @ v).transpose(0, 1).reshape(tokens.shape[0], cfg.channels)
        tokens = self.norm_attn(tokens + self.out(mixed))
        return self.norm_ffn(tokens + self.ffn(tokens))


class TokenMixer(nn.Module):
    """Transformer encoder layer on the tokens (no positional encoding)."""

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.token_dim
        self.qkv = nn.Linear(d, 3 * d)
        self.out = nn.Linear(d, d)
        self.norm_attn = nn.LayerNorm(d)
        self.ffn = nn.Sequential(
            nn.Linear(d, cfg.ffn_expansion * d),
            nn.GELU(),
            nn.Linear(cfg.ffn_expansion * d, d),
        )
        self.norm_ffn = nn.LayerNorm(d)
        self.last_attention: Tensor | None = None

    def forward(self, tokens: Tensor) -> Tensor:
        cfg = self.cfg
        q, k, v = self.qkv(tokens).chunk(3, dim=-1)
        q, k, v = (_split_heads(t, cfg.heads) for t in (q, k, v))
        scores = q @ k.transpose(1, 2) / math.sqrt(cfg.token_dim // cfg.heads)
        weights = torch.softmax(scores, dim=-1)
        self.last_attention = weights
        mixed = (weights @ v).transpose(0, 1).reshape(tokens.shape)
        tokens = self.norm_attn(tokens + self.out(mixed))
        return self.norm_ffn(tokens + self.ffn(tokens))


class DynamicCoefficients(nn.Module):
    """Per-pixel activation coefficients as convex combinations over tokens.

    The attention weights alpha compare each bottleneck pixel with projected
    tokens (scaled dot product against tokens @ key_proj); the coefficient
    head maps each token to the four per-channel values of two affine pieces.
    One (theta, alpha) pair per block forward is produced and shared.
    """

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        self.cfg = cfg
        self.key_proj = nn.Parameter(
            torch.empty(cfg.token_dim, cfg.bottleneck).normal_(std=cfg.token_dim ** -0.5)
        )
        hidden = cfg.coeff_hidden
        self.head = nn.Sequential(
            nn.Linear(cfg.token_dim, hidden),
            nn.GELU(),
            nn.Linear(hidden, 4 * cfg.bottleneck),
        )

    def forward(self, bottleneck_map: Tensor, tokens: Tensor) -> tuple[Tensor, Tensor]:
        cfg = self.cfg
        c_b, h, w = bottleneck_map.shape
        pixels = bottleneck_map.reshape(c_b, h * w).transpose(0, 1)  # HW x C_b
        keys = tokens @ self.key_proj                                 # M x C_b
        scores = pixels @ keys.transpose(0, 1) / math.sqrt(c_b)      # HW x M
        alpha = torch.softmax(scores, dim=-1)
        theta = alpha @ self.head(tokens)                             # HW x 4*C_b
        return theta, alpha


def dynamic_relu(pixels: Tensor, theta: Tensor, bottleneck: int) -> Tensor:
    """max of two affine pieces per channel; pixels and theta are HW x C_b."""
    raw = theta.reshape(-1, 4, bottleneck)
    slope_a = 1.0 + SLOPE_SCALE * raw[:, 0]
    slope_b = SLOPE_SCALE * raw[:, 1]
    bias_a = INTERCEPT_SCALE * raw[:, 2]
    bias_b = INTERCEPT_SCALE * raw[:, 3]
    return torch.maximum(slope_a * pixels + bias_a, slope_b * pixels + bias_b)


class TokensToMap(nn.Module):
    """Pull token values onto pixels through the stored attention map."""

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        c_b = cfg.bottleneck
        self.value = nn.Linear(cfg.token_dim, c_b)
        self.ffn = nn.Sequential(
            nn.Linear(c_b, cfg.ffn_expansion * c_b),
            nn.GELU(),
            nn.Linear(cfg.ffn_expansion * c_b, c_b),
        )
        self.restore = nn.Conv2d(c_b, cfg.channels, kernel_size=1)

    def forward(self, bottleneck_map: Tensor, tokens: Tensor, alpha: Tensor) -> Tensor:
        c_b, h, w = bottleneck_map.shape
        pixels = bottleneck_map.reshape(c_b, h * w).transpose(0, 1)
        pixels = pixels + alpha @ self.value(tokens)
        pixels = pixels + self.ffn(pixels)
        restored = pixels.transpose(0, 1).reshape(1, c_b, h, w)
        return self.restore(restored)[0]


class LayoutBlock(nn.Module):
    """One exchange round between the feature map and the layout tokens."""

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        self.cfg = cfg
        self.map_to_tokens = MapToTokens(cfg)
        self.token_mixer = TokenMixer(cfg)
        self.reduce = nn.Conv2d(cfg.channels, cfg.bottleneck, kernel_size=1)
        self.grouped = nn.Conv2d(
            cfg.bottleneck,
            cfg.bottleneck,
            kernel_size=7,
            padding=3,
            groups=cfg.bottleneck // cfg.group_width,
        )
        self.coefficients = DynamicCoefficients(cfg)
        self.tokens_to_map = TokensToMap(cfg)
        self.last_theta: Tensor | None = None
        self.last_alpha: Tensor | None = None
        self.theta_consumers = 0

    def forward(self, feature_map: Tensor, tokens: Tensor) -> tuple[Tensor, Tensor]:
        cfg = self.cfg
        if feature_map.dim() != 3 or feature_map.shape[0] != cfg.channels:
            raise ValueError(
                f"feature map must be {cfg.channels} x H x W, got {tuple(feature_map.shape)}"
            )
        if tokens.shape != (cfg.tokens, cfg.token_dim):
            raise ValueError(
                f"tokens must be {cfg.tokens} x {cfg.token_dim}, got {tuple(tokens.shape)}"
            )
        tokens = self.map_to_tokens(feature_map, tokens)
        tokens = self.token_mixer(tokens)

        c_b = cfg.bottleneck
        h, w = feature_map.shape[1:]
        reduced = self.reduce(feature_map.unsqueeze(0))[0]           # C_b x H x W
        theta, alpha = self.coefficients(reduced, tokens)
        self.last_theta, self.last_alpha = theta, alpha
        self.theta_consumers = 0

        def activate(m: Tensor) -> Tensor:
            self.theta_consumers += 1
            flat = m.reshape(c_b, h * w).transpose(0, 1)
            out = dynamic_relu(flat, theta, c_b)
            return out.transpose(0, 1).reshape(c_b, h, w)

        local = activate(reduced)
        local = self.grouped(local.unsqueeze(0))[0]
        local = activate(local)

        delta = self.tokens_to_map(local, tokens, alpha)
        return feature_map + delta, tokens


class LayoutBlockStack(nn.Module):
    """A stack of blocks; tokens are an input, not a stack parameter."""

    def __init__(self, cfg: BlockConfig):
        super().__init__()
        self.cfg = cfg
        self.blocks = nn.ModuleList(LayoutBlock(cfg) for _ in range(cfg.depth))

    def forward(self, feature_map: Tensor, tokens: Tensor) -> tuple[Tensor, Tensor]:
        for block in self.blocks:
            feature_map, tokens = block(feature_map, tokens)
        return feature_map, tokens


def init_tokens(cfg: BlockConfig, seed: int = 0) -> Tensor:
    generator = torch.Generator().manual_seed(seed)
    return torch.randn(cfg.tokens, cfg.token_dim, generator=generator, dtype=torch.float64)


def build_stack(cfg: BlockConfig, seed: int = 0) -> LayoutBlockStack:
    torch.manual_seed(seed)
    stack = LayoutBlockStack(cfg)
    return stack.double()
