"""Shared fixtures and the acceptance-battery result banner.

Acceptance tests append one line per criterion to the list created here;
the terminal-summary hook prints them after the run so every PASS/FAIL is
visible even with output capture on.
"""

import numpy as np
import pytest

from dstlab.data import NoisyDataset
from dstlab.network import NetworkParams, backward, cross_entropy, forward, softmax


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion(request):
    def _record(line: str) -> None:
        request.config._acceptance_lines.append(line)
        print(line)

    return _record


def make_noisy(features, true_labels, noisy_labels, n_classes) -> NoisyDataset:
    """Hand-built dataset with explicit noisy labels and no noise spec."""
    return NoisyDataset(
        features=np.asarray(features, dtype=np.float64),
        true_labels=np.asarray(true_labels, dtype=np.int64),
        n_classes=n_classes,
        noisy_labels=np.asarray(noisy_labels, dtype=np.int64),
        noise_spec=None,
    )


def ce_loss(params: NetworkParams, x: np.ndarray, target: np.ndarray) -> float:
    """Scalar cross-entropy of one sample, the quantity `backward` differentiates."""
    return cross_entropy(softmax(forward(params, x)), target)


def fd_gradients(params: NetworkParams, x: np.ndarray, target: np.ndarray, h: float = 1e-5):
    """Central finite differences of ce_loss w.r.t. every parameter."""
    grads = []
    for layer in params.layers:
        d_w = np.zeros_like(layer.weights)
        d_b = np.zeros_like(layer.bias)
        for arr, out in ((layer.weights, d_w), (layer.bias, d_b)):
            flat = arr.ravel()
            flat_out = out.ravel()
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + h
                hi = ce_loss(params, x, target)
                flat[i] = keep - h
                lo = ce_loss(params, x, target)
                flat[i] = keep
                flat_out[i] = (hi - lo) / (2.0 * h)
        grads.append((d_w, d_b))
    return grads


def max_rel_err(analytic, numeric) -> float:
    """Largest per-entry relative disagreement between two gradient lists."""
    worst = 0.0
    for (a_w, a_b), (n_w, n_b) in zip(analytic, numeric):
        for a, n in ((a_w, n_w), (a_b, n_b)):
            denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
            worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def gradient_check_draws(n_draws: int, seed: int = 11) -> float:
    """Max relative error of backprop vs finite differences over random draws."""
    from dstlab.network import init_network

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_draws):
        n_in = int(rng.integers(1, 5))
        n_hidden = int(rng.integers(1, 7))
        n_out = int(rng.integers(2, 5))
        sizes = [n_in, n_hidden, n_out] if rng.random() < 0.7 else [n_in, n_out]
        params = init_network(sizes, rng)
        x = rng.normal(size=n_in)
        target = rng.dirichlet(np.ones(n_out))
        analytic = backward(params, x, target)
        numeric = fd_gradients(params, x, target)
        worst = max(worst, max_rel_err(analytic, numeric))
    return worst
