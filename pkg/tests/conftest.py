import numpy as np
import pytest

from mlzsim.model import MlzModel, build_bowtie, build_generic


def spaced_slopes(rng, n, gap=0.8, spread=1.2):
    """Random pairwise-distinct slopes with a guaranteed minimal gap."""
    increments = gap + spread * rng.random(n - 1)
    slopes = np.concatenate(([0.0], np.cumsum(increments)))
    slopes -= slopes.mean()
    return rng.permutation(slopes)


def random_bipartite_model(rng, n_max=6, g_max=0.5):
    """Random bipartite model with at least one coupling, moderate eta."""
    n = int(rng.integers(2, n_max + 1))
    beta = spaced_slopes(rng, n)
    m = int(rng.integers(1, n // 2 + 1))
    members = rng.permutation(n)
    group1 = set(members[:m].tolist())
    couplings = []
    for i in group1:
        for j in range(n):
            if j in group1 or rng.random() > 0.7:
                continue
            mag = g_max * rng.random()
            phase = np.exp(2j * np.pi * rng.random())
            couplings.append((i + 1, j + 1, mag * phase))
    if not couplings:
        i = next(iter(group1))
        j = next(k for k in range(n) if k not in group1)
        couplings.append((i + 1, j + 1, g_max * rng.random() + 0.05))
    return build_generic(beta, couplings)


def random_bowtie_model(rng, n_max=8, g_max=0.5):
    n = int(rng.integers(3, n_max + 1))
    slopes = spaced_slopes(rng, n)
    beta0 = slopes[0]
    others = [(s, g_max * (0.1 + 0.9 * rng.random())) for s in slopes[1:]]
    return build_bowtie(beta0, others)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
