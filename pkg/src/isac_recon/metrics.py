"""Point-cloud similarity metrics: Chamfer distance and F-score.

Nearest-neighbor searches are exact brute force (chunked), so results are
reproducible and an independent reference implementation can match them
bit for bit.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class MetricReport:
    chamfer: float
    f_score: float
    precision: float
    recall: float
    threshold_m: float


def _positions(cloud):
    pts = getattr(cloud, "positions", cloud)
    return np.asarray(pts, dtype=float).reshape(-1, 3)


def _min_sq_dists(a, b, chunk=512):
    """Per-point squared distance from each row of a to its nearest row of b."""
    out = np.empty(a.shape[0])
    for lo in range(0, a.shape[0], chunk):
        hi = min(lo + chunk, a.shape[0])
        d2 = ((a[lo:hi, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        out[lo:hi] = d2.min(axis=1)
    return out


def chamfer_distance(cloud_t, cloud_r):
    """Symmetric mean squared nearest-neighbor distance."""
    t = _positions(cloud_t)
    r = _positions(cloud_r)
    if t.shape[0] == 0 or r.shape[0] == 0:
        raise ConfigError("chamfer distance is undefined for an empty cloud")
    return float(np.mean(_min_sq_dists(t, r)) + np.mean(_min_sq_dists(r, t)))


def f_score(cloud_t, cloud_r, threshold):
    """Harmonic precision/recall at a distance threshold (strict <)."""
    t = _positions(cloud_t)
    r = _positions(cloud_r)
    if t.shape[0] == 0 or r.shape[0] == 0:
        raise ConfigError("f-score is undefined for an empty cloud")
    if threshold <= 0:
        raise ConfigError("threshold must be positive")
    d2 = threshold * threshold
    precision = float(np.mean(_min_sq_dists(r, t) < d2))
    recall = float(np.mean(_min_sq_dists(t, r) < d2))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def fscore_threshold(cloud_gt, fraction=0.01):
    """Distance threshold as a fraction of the ground-truth bbox diagonal."""
    t = _positions(cloud_gt)
    if t.shape[0] == 0:
        raise ConfigError("cannot derive a threshold from an empty cloud")
    diag = float(np.linalg.norm(t.max(axis=0) - t.min(axis=0)))
    if diag == 0.0:
        raise ConfigError("degenerate ground-truth bounding box")
    return fraction * diag


def evaluate(cloud_pred, cloud_gt, threshold_fraction=0.01):
    """Full metric report of a reconstruction against ground truth."""
    d = fscore_threshold(cloud_gt, threshold_fraction)
    t = _positions(cloud_gt)
    r = _positions(cloud_pred)
    if t.shape[0] == 0 or r.shape[0] == 0:
        raise ConfigError("metrics are undefined for an empty cloud")
    d2 = d * d
    min_rt = _min_sq_dists(r, t)
    min_tr = _min_sq_dists(t, r)
    precision = float(np.mean(min_rt < d2))
    recall = float(np.mean(min_tr < d2))
    f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return MetricReport(
        chamfer=float(np.mean(min_tr) + np.mean(min_rt)),
        f_score=f,
        precision=precision,
        recall=recall,
        threshold_m=d,
    )
