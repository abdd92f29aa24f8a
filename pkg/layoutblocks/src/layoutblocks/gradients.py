"""Central-difference gradient verification against autograd.

The analytic side comes from autograd at float64; the oracle perturbs every
parameter entry by +-1e-5 and compares the difference quotient. The forward
pass contains kinks (max pooling and the piecewise-linear activation), so an
entry whose perturbation window straddles a kink shows a spurious mismatch;
such entries are re-examined at shrinking steps, under which a kink artifact
vanishes while a genuine gradient error persists.
"""

from __future__ import annotations

import torch

from .blocks import BlockConfig, build_stack, init_tokens

FD_STEP = 1e-5
RECHECK_STEPS = (1e-6, 3e-7)


def check_gradients(
    cfg: BlockConfig, seed: int = 0, feature_hw: tuple[int, int] = (4, 5), rtol: float = 1e-4
) -> tuple[float, int]:
    """Returns (worst relative error, number of entries checked)."""
    torch.manual_seed(seed)
    stack = build_stack(cfg, seed=seed)
    h, w = feature_hw
    feature_map = torch.randn(cfg.channels, h, w, dtype=torch.float64)
    tokens = init_tokens(cfg, seed=seed)
    weight_map = torch.randn(cfg.channels, h, w, dtype=torch.float64)
    weight_tokens = torch.randn(cfg.tokens, cfg.token_dim, dtype=torch.float64)

    def loss() -> torch.Tensor:
        out_map, out_tokens = stack(feature_map, tokens)
        return (out_map * weight_map).sum() + (out_tokens * weight_tokens).sum()

    stack.zero_grad()
    loss().backward()

    def quotient(flat: torch.Tensor, idx: int, step: float) -> float:
        original = flat[idx].item()
        flat[idx] = original + step
        up = loss().item()
        flat[idx] = original - step
        down = loss().item()
        flat[idx] = original
        return (up - down) / (2.0 * step)

    worst = 0.0
    checked = 0
    for param in stack.parameters():
        grad = param.grad
        assert grad is not None
        flat = param.data.reshape(-1)
        flat_grad = grad.reshape(-1)
        for idx in range(flat.numel()):
            analytic = flat_grad[idx].item()
            numeric = quotient(flat, idx, FD_STEP)
            rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-6)
            if rel > rtol:
                # shrink the window: kink crossings fade, real errors stay
                rel = min(
                    abs(quotient(flat, idx, step) - analytic)
                    / max(abs(analytic), 1e-3)
                    for step in RECHECK_STEPS
                )
            worst = max(worst, rel)
            checked += 1
    return worst, checked
