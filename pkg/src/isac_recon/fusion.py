"""Data-level fusion of multi-node world-frame point clouds.

The fusion radius comes from probing the growth rate of neighborhood
counts around randomly chosen cloud points: the radius where the mean
growth rate first stays near zero for several consecutive steps separates
intra-cluster spread from inter-point structure.
"""

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, PlateauError
from .geometry import PointCloud4D, growth_rate


def growth_curves(cloud, probes=10, r_max=10.0, dr=0.1, seed=0):
    """Per-probe growth-rate curves h(r) over r = dr, 2*dr, ..., r_max."""
    n = len(cloud)
    if n == 0:
        raise ConfigError("cannot probe an empty cloud")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xF0]))
    idx = rng.choice(n, size=min(probes, n), replace=False)
    radii = np.arange(dr, r_max + 0.5 * dr, dr)
    dists = np.linalg.norm(
        cloud.positions[None, :, :] - cloud.positions[idx][:, None, :], axis=2
    )
    dists.sort(axis=1)
    h = np.empty((idx.size, radii.size))
    for k in range(idx.size):
        counts = np.searchsorted(dists[k], radii, side="right")
        prev = 1  # the probe point itself
        for j in range(radii.size):
            h[k, j] = growth_rate(prev, int(counts[j]))
            prev = max(int(counts[j]), 1)
    return radii, h


def select_fusion_radius(cloud, probes=10, r_max=10.0, dr=0.1, eps_h=0.05,
                         k_consecutive=3, seed=0):
    """Smallest radius where the mean growth rate stays below eps_h.

    Raises PlateauError (carrying the probed curve) when no plateau of
    k_consecutive steps exists within (0, r_max].
    """
    radii, h = growth_curves(cloud, probes=probes, r_max=r_max, dr=dr, seed=seed)
    h_mean = h.mean(axis=0)
    below = h_mean < eps_h
    run = 0
    for j in range(below.size):
        run = run + 1 if below[j] else 0
        if run >= k_consecutive:
            return float(radii[j - k_consecutive + 1])
    raise PlateauError(
        f"no growth-rate plateau below {eps_h} within r <= {r_max}",
        radii=radii,
        h_mean=h_mean,
    )


def fuse_data_level(clouds, radius):
    """Single-linkage merge of world-frame clouds at the given radius.

    Each cluster becomes its centroid with the mean member velocity; the
    contributing node ids are kept as per-point provenance.
    """
    union = PointCloud4D.concatenate(list(clouds))
    n = len(union)
    if n == 0:
        return PointCloud4D.empty()
    if radius <= 0:
        out = PointCloud4D(
            union.positions.copy(), union.velocities.copy(), union.node_ids.copy()
        )
        out.provenance = [(int(i),) for i in union.node_ids]
        return out

    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = cKDTree(union.positions)
    for a, b in sorted(tree.query_pairs(radius)):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    roots = np.array([find(i) for i in range(n)])
    order = np.unique(roots)
    positions, velocities, node_ids, provenance = [], [], [], []
    for root in order:
        members = np.nonzero(roots == root)[0]
        positions.append(union.positions[members].mean(axis=0))
        velocities.append(union.velocities[members].mean())
        ids = tuple(sorted(set(int(v) for v in union.node_ids[members])))
        provenance.append(ids)
        node_ids.append(ids[0] if len(ids) == 1 else -1)
    out = PointCloud4D(
        positions=np.asarray(positions),
        velocities=np.asarray(velocities),
        node_ids=np.asarray(node_ids, dtype=int),
    )
    out.provenance = provenance
    return out
