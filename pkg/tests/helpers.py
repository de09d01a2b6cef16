"""Random instance generators shared by unit and acceptance tests."""

import numpy as np

from hck.matching import GroundTruthHuman, QueryBundle


def random_hierarchy(rng, max_humans=3, max_parts=4, n_points=12, with_probs=None):
    """Soft query masks plus binary gt humans with disjoint part masks."""
    n_q = int(rng.integers(1, max_humans + 1))
    n_g = int(rng.integers(1, max_humans + 1))
    k = int(rng.integers(1, max_parts + 1))
    if with_probs is None:
        with_probs = bool(rng.integers(0, 2))
    hm = rng.uniform(0, 1, (n_q, n_points))
    pm = rng.uniform(0, 1, (n_q, k, n_points))
    probs = rng.dirichlet(np.ones(15), (n_q, k)) if with_probs else None
    gts = []
    for _ in range(n_g):
        m = rng.uniform(size=n_points) < 0.5
        m[int(rng.integers(n_points))] = True
        n_parts = int(rng.integers(0, max_parts + 1))
        ids = np.sort(rng.choice(np.arange(1, 16), n_parts, replace=False)) if n_parts else np.zeros(0, int)
        lab = np.where(m, rng.integers(0, max(n_parts, 1), n_points), -1)
        parts = np.stack([(lab == t) for t in range(n_parts)]).astype(float) if n_parts else np.zeros((0, n_points))
        gts.append(GroundTruthHuman(m.astype(float), parts, ids.astype(np.int64)))
    return QueryBundle.from_arrays(hm, pm, probs), gts, (hm, pm, probs)
