"""Shared test helpers: synthetic topic matrices and permutation-matched TV."""

import itertools

import numpy as np
import pytest


def block_topic_matrix(k: int, v: int, own_mass: float = 0.85) -> np.ndarray:
    """K topics, each concentrating ``own_mass`` uniformly on its own block of
    V/K words with the rest spread over the whole vocabulary."""
    beta = np.full((k, v), (1.0 - own_mass) / v)
    width = v // k
    for i in range(k):
        beta[i, i * width:(i + 1) * width] += own_mass / width
    return beta


def best_permutation_tv(beta_true: np.ndarray, beta_fit: np.ndarray) -> list[float]:
    """Per-topic total-variation distances under the permutation minimizing the
    worst distance. Independent of any model internals."""
    k = beta_true.shape[0]
    best = None
    for perm in itertools.permutations(range(k)):
        tvs = [0.5 * float(np.abs(beta_fit[perm[i]] - beta_true[i]).sum())
               for i in range(k)]
        if best is None or max(tvs) < max(best):
            best = tvs
    return best


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory):
    """Bundled fixture written and run once per session (used by CLI tests)."""
    from excitenet.cli import main
    from excitenet.demo import write_demo_inputs

    root = tmp_path_factory.mktemp("demo")
    paths = write_demo_inputs(root, seed=7)
    rc = main(["run", "--config", str(paths["config"])])
    assert rc == 0
    return {"root": root, "out": root / "out", **paths}
