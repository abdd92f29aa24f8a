"""Secondary acceptance: the full check suite passes inside its time budget."""

import time

import torch

from layoutblocks.checks import CHECKS
from layoutblocks.gradients import check_gradients
from layoutblocks.blocks import BlockConfig


def test_check_runner_all_pass_under_budget():
    torch.set_num_threads(1)
    t0 = time.perf_counter()
    for name, fn in CHECKS:
        detail = fn()  # raises AssertionError on failure
        print(f"[PASS] {name}: {detail}")
    elapsed = time.perf_counter() - t0
    print(f"[PASS] full suite runtime: {elapsed:.1f}s (<60s)")
    assert elapsed < 60.0


def test_gradient_check_three_seeds():
    tiny = BlockConfig(channels=8, bottleneck=4, token_dim=8, tokens=3, heads=2, depth=1)
    for seed in (0, 1, 2):
        worst, checked = check_gradients(tiny, seed=seed, feature_hw=(4, 5))
        assert checked > 2000
        assert worst <= 1e-4, f"seed {seed}: worst relative error {worst:.2e}"
