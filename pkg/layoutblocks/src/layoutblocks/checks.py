"""Check runner: shape, normalization, sharing, counting, and gradient suites.

Run as ``python -m layoutblocks.checks``; prints one PASS/FAIL row per check
and exits 0 only when everything passes.
"""

from __future__ import annotations

import sys
import time

import torch

from .blocks import BlockConfig, build_stack, init_tokens
from .counting import candidates_for_budget, param_count
from .gradients import check_gradients

TOY = BlockConfig()  # C=16, C_b=8, d=16, M=8, heads=2, depth=3
TINY = BlockConfig(channels=8, bottleneck=4, token_dim=8, tokens=3, heads=2, depth=1)


def check_shapes() -> str:
    torch.manual_seed(0)
    stack = build_stack(TOY, seed=0)
    feature_map = torch.randn(TOY.channels, 8, 8, dtype=torch.float64)
    tokens = init_tokens(TOY)
    out_map, out_tokens = stack(feature_map, tokens)
    assert out_map.shape == feature_map.shape, f"map shape changed: {tuple(out_map.shape)}"
    assert out_tokens.shape == tokens.shape, f"token shape changed: {tuple(out_tokens.shape)}"
    return f"map {tuple(out_map.shape)}, tokens {tuple(out_tokens.shape)} through depth {TOY.depth}"


def check_attention_normalization() -> str:
    stack = build_stack(TOY, seed=1)
    feature_map = torch.randn(TOY.channels, 6, 9, dtype=torch.float64)
    tokens = init_tokens(TOY, seed=1)
    stack(feature_map, tokens)
    worst = 0.0
    for block in stack.blocks:
        for weights in (block.map_to_tokens.last_attention,
                        block.token_mixer.last_attention,
                        block.last_alpha):
            sums = weights.detach().sum(dim=-1)
            worst = max(worst, float((sums - 1.0).abs().max()))
    assert worst <= 1e-6, f"softmax rows deviate from 1 by {worst:.2e}"
    return f"all attention rows sum to 1 within {worst:.1e}"


def check_theta_sharing() -> str:
    stack = build_stack(TOY, seed=2)
    feature_map = torch.randn(TOY.channels, 5, 7, dtype=torch.float64)
    stack(feature_map, init_tokens(TOY, seed=2))
    for block in stack.blocks:
        assert block.theta_consumers == 2, (
            f"theta consumed {block.theta_consumers} times, expected 2"
        )
        assert block.last_theta is not None and block.last_alpha is not None
    return "one coefficient tensor per block, consumed by both activations"


def check_single_token_degenerate() -> str:
    cfg = BlockConfig(tokens=1, heads=2, depth=1)
    stack = build_stack(cfg, seed=3)
    feature_map = torch.randn(cfg.channels, 4, 6, dtype=torch.float64)
    stack(feature_map, init_tokens(cfg, seed=3))
    alpha = stack.blocks[0].last_alpha
    assert torch.allclose(alpha, torch.ones_like(alpha)), "alpha must be all ones for M=1"
    return "single-token attention collapses to weight 1"


def check_param_count() -> str:
    for cfg in (TOY, TINY, BlockConfig(channels=32, bottleneck=16, token_dim=32, depth=2)):
        stack = build_stack(cfg)
        tally = sum(p.numel() for p in stack.parameters())
        predicted = param_count(cfg)
        assert tally == predicted, f"{cfg}: tally {tally} != closed form {predicted}"
    one = param_count(BlockConfig(depth=1))
    three = param_count(BlockConfig(depth=3))
    assert three == 3 * one, "depth-3 count must be three independent blocks"
    return f"closed form matches instantiated tally (toy stack: {param_count(TOY):,} params)"


def check_determinism() -> str:
    outs = []
    for _ in range(2):
        stack = build_stack(TOY, seed=7)
        torch.manual_seed(11)
        feature_map = torch.randn(TOY.channels, 6, 6, dtype=torch.float64)
        out_map, out_tokens = stack(feature_map, init_tokens(TOY, seed=7))
        outs.append((out_map, out_tokens))
    assert torch.equal(outs[0][0], outs[1][0]) and torch.equal(outs[0][1], outs[1][1])
    return "same seed gives bit-identical float64 outputs"


def check_gradients_suite() -> str:
    worst = 0.0
    total = 0
    for seed in (0, 1, 2):
        rel, n = check_gradients(TINY, seed=seed, feature_hw=(4, 5))
        worst = max(worst, rel)
        total += n
    assert worst <= 1e-4, f"worst relative gradient error {worst:.2e} exceeds 1e-4"
    return f"{total} parameter entries over 3 seeds, worst relative error {worst:.1e}"


def report_budget_candidates() -> str:
    candidates = candidates_for_budget()
    if not candidates:
        return "no candidate configs near the published budget (informational)"
    lines = ", ".join(
        f"C={cfg.channels},C_b={cfg.bottleneck},d={cfg.token_dim}:{total:,}"
        for cfg, total in candidates[:3]
    )
    return f"closest configs to 0.95M: {lines} (informational)"


CHECKS = [
    ("shape invariance through stacked blocks", check_shapes),
    ("attention row normalization", check_attention_normalization),
    ("coefficient sharing across activation sites", check_theta_sharing),
    ("single-token degenerate attention", check_single_token_degenerate),
    ("closed-form parameter count", check_param_count),
    ("bit-exact determinism", check_determinism),
    ("finite-difference gradient check", check_gradients_suite),
    ("parameter budget candidates", report_budget_candidates),
]


def main() -> int:
    torch.set_num_threads(1)
    failures = 0
    width = max(len(name) for name, _ in CHECKS)
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            detail = fn()
            status = "PASS"
        except AssertionError as exc:
            detail = str(exc)
            status = "FAIL"
            failures += 1
        elapsed = time.perf_counter() - t0
        print(f"[{status}] {name:<{width}}  {detail} ({elapsed:.2f}s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
