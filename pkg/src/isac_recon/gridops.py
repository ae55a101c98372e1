"""Differentiable point-cloud/grid conversions and the grid-difference loss.

The vertex lattice of a resolution-N grid runs over integer coordinates
-N/2 .. N/2-1 per axis. A point p contributes trilinear weights
prod(1 - |gap|) to the 8 vertices of its enclosing cell, and each vertex
value is the weight sum divided by the number of points in the vertex's
unit neighborhood. Cells are indexed by their minimum-corner vertex, in
lexicographic order with z fastest.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

# The 8 cell-corner offsets in fixed lexicographic order (z fastest).
_CORNERS = np.array(
    [[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=int
)


@dataclass(frozen=True)
class Grid3D:
    resolution: int
    values: np.ndarray  # (N, N, N)

    def __post_init__(self):
        n = self.resolution
        if self.values.shape != (n, n, n):
            raise ConfigError(f"grid values shape {self.values.shape} != ({n},)*3")

    def vertex_coord(self, index):
        """Lattice coordinate of a vertex index along one axis."""
        return index - self.resolution // 2


@dataclass(frozen=True)
class NormalizedCloud:
    """Grid-frame points plus the world <-> grid similarity transform."""

    points: np.ndarray  # (n, 3) grid coordinates
    scale: float  # grid units per meter
    offset: np.ndarray  # world-frame centroid mapped to the lattice center

    def to_world(self, grid_points):
        center = -0.5
        return (np.asarray(grid_points) - center) / self.scale + self.offset

    def to_grid(self, world_points):
        center = -0.5
        return (np.asarray(world_points) - self.offset) * self.scale + center


def _check_resolution(n):
    if n < 2 or n % 2 != 0:
        raise ConfigError("grid resolution must be an even integer >= 2")


def normalize_cloud(points, resolution, margin=0.05):
    """Center and isotropically scale a world cloud into the grid frame.

    The cloud fits within [-N/2+1, N/2-2] with the given relative margin.
    """
    _check_resolution(resolution)
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        return NormalizedCloud(points=pts.copy(), scale=1.0, offset=np.zeros(3))
    centroid = pts.mean(axis=0)
    half_extent = float(np.max(np.abs(pts - centroid))) if pts.shape[0] else 0.0
    usable = ((resolution - 3) / 2.0) * (1.0 - margin)
    scale = 1.0 if half_extent == 0.0 else usable / half_extent
    grid_pts = (pts - centroid) * scale + (-0.5)
    return NormalizedCloud(points=grid_pts, scale=scale, offset=centroid)


def _cell_indices(points, resolution):
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    half = resolution // 2
    lo, hi = -half, half - 1
    bad = np.nonzero(~np.all((pts > lo) & (pts < hi), axis=1))[0]
    if bad.size:
        raise ConfigError(
            f"point index {int(bad[0])} at {pts[bad[0]]} outside grid interior "
            f"({lo}, {hi})"
        )
    cells = np.floor(pts).astype(int)
    # A point exactly on the upper lattice line belongs to the lower cell.
    cells = np.minimum(cells, hi - 1)
    return pts, cells


def _corner_weights(pts, cells):
    """Trilinear weights of each point to its 8 cell corners: (n, 8)."""
    local = pts - cells  # in [0, 1)
    w = np.ones((pts.shape[0], 8))
    for axis in range(3):
        gap = np.where(_CORNERS[:, axis][None, :] == 0, local[:, axis : axis + 1],
                       1.0 - local[:, axis : axis + 1])
        w *= 1.0 - gap
    return w


def gridding(points, resolution):
    """Convert a grid-frame cloud into a resolution^3 value grid."""
    _check_resolution(resolution)
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = resolution
    values = np.zeros((n, n, n))
    if pts.shape[0] == 0:
        return Grid3D(resolution=n, values=values)
    pts, cells = _cell_indices(pts, n)
    w = _corner_weights(pts, cells)
    half = n // 2
    counts = np.zeros((n, n, n), dtype=np.int64)
    vidx = cells[:, None, :] + _CORNERS[None, :, :] + half  # (n_pts, 8, 3)
    flat = np.ravel_multi_index(
        (vidx[..., 0].ravel(), vidx[..., 1].ravel(), vidx[..., 2].ravel()), (n, n, n)
    )
    np.add.at(values.ravel(), flat, w.ravel())
    # Neighborhood membership is the open unit cube, so zero-weight corner
    # touches (gap exactly 1) do not count.
    member = (w > 0.0).ravel()
    np.add.at(counts.ravel(), flat[member], 1)
    out = np.divide(values, counts, out=np.zeros_like(values), where=counts > 0)
    return Grid3D(resolution=n, values=out)


def gridding_gradient(points, resolution, upstream):
    """d(loss)/d(point) given d(loss)/d(grid values), by the product rule.

    Neighborhood counts are locally constant, so they pass through as
    divisors. Points must stay off cell boundaries for the derivative to
    exist.
    """
    _check_resolution(resolution)
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    grad_k = np.asarray(upstream, dtype=float)
    n = resolution
    if grad_k.shape != (n, n, n):
        raise ConfigError("upstream gradient shape mismatch")
    if pts.shape[0] == 0:
        return np.zeros((0, 3))
    pts, cells = _cell_indices(pts, n)
    half = n // 2
    local = pts - cells

    # Recompute counts to divide each corner contribution.
    w = _corner_weights(pts, cells)
    counts = np.zeros((n, n, n), dtype=np.int64)
    vidx = cells[:, None, :] + _CORNERS[None, :, :] + half
    flat = np.ravel_multi_index(
        (vidx[..., 0].ravel(), vidx[..., 1].ravel(), vidx[..., 2].ravel()), (n, n, n)
    )
    member = (w > 0.0).ravel()
    np.add.at(counts.ravel(), flat[member], 1)

    g_cell = grad_k.ravel()[flat].reshape(-1, 8)
    c_cell = counts.ravel()[flat].reshape(-1, 8)
    scale = np.divide(g_cell, c_cell, out=np.zeros_like(g_cell), where=c_cell > 0)

    # w = prod_axis (1 - gap_axis); d(1 - gap)/dx is -1 on the corner's own
    # side (corner offset 0) and +1 on the far side.
    one_minus_gap = np.ones((pts.shape[0], 8, 3))
    for axis in range(3):
        gap = np.where(
            _CORNERS[:, axis][None, :] == 0,
            local[:, axis : axis + 1],
            1.0 - local[:, axis : axis + 1],
        )
        one_minus_gap[:, :, axis] = 1.0 - gap
    sign = np.where(_CORNERS.T[None, :, :] == 0, -1.0, 1.0).transpose(0, 2, 1)
    grad = np.zeros((pts.shape[0], 3))
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        dw = sign[:, :, axis] * one_minus_gap[:, :, others[0]] * one_minus_gap[:, :, others[1]]
        grad[:, axis] = np.sum(scale * dw, axis=1)
    return grad


def gridding_reverse(grid):
    """Generate one point per cell with any nonzero corner weight.

    Each point is the corner-weighted mean of the 8 cell-corner lattice
    coordinates; zero-weight cells emit nothing. Output order is the
    lexicographic cell order.
    """
    n = grid.resolution
    v = grid.values
    half = n // 2
    # Corner values per cell, shape (n-1, n-1, n-1, 8).
    stack = np.stack(
        [v[dx : n - 1 + dx, dy : n - 1 + dy, dz : n - 1 + dz] for dx, dy, dz in _CORNERS],
        axis=-1,
    )
    wsum = stack.sum(axis=-1)
    ix, iy, iz = np.nonzero(wsum != 0.0)
    if ix.size == 0:
        return np.zeros((0, 3))
    corners = _CORNERS[None, :, :] + np.stack([ix, iy, iz], axis=1)[:, None, :] - half
    w = stack[ix, iy, iz]  # (m, 8)
    pts = (w[:, :, None] * corners).sum(axis=1) / wsum[ix, iy, iz][:, None]
    return pts


def cubic_feature_sampling(feature_grid, points):
    """Concatenate the 8 enclosing-cell corner features per query point.

    `feature_grid` is (t, t, t, c); points are in the grid frame of
    resolution t. Output is (n, 8*c) with corners in the fixed
    lexicographic order.
    """
    fg = np.asarray(feature_grid)
    if fg.ndim != 4 or fg.shape[0] != fg.shape[1] or fg.shape[1] != fg.shape[2]:
        raise ConfigError("feature grid must be (t, t, t, c)")
    t = fg.shape[0]
    _check_resolution(t)
    pts, cells = _cell_indices(points, t)
    half = t // 2
    vidx = cells[:, None, :] + _CORNERS[None, :, :] + half
    feats = fg[vidx[..., 0], vidx[..., 1], vidx[..., 2], :]  # (n, 8, c)
    return feats.reshape(pts.shape[0], -1)


def rescale_points(points, res_from, res_to):
    """Map grid-frame coordinates between lattice resolutions."""
    center = -0.5
    return (np.asarray(points, dtype=float) - center) * (res_to / res_from) + center


def multi_scale_cfs(feature_grids, points, resolution):
    """Cubic feature sampling across several feature-map resolutions."""
    outs = []
    for fg in feature_grids:
        t = np.asarray(fg).shape[0]
        outs.append(cubic_feature_sampling(fg, rescale_points(points, resolution, t)))
    return np.concatenate(outs, axis=1)


def gridding_loss(points_a, points_b, resolution):
    """Mean absolute difference of the two gridded value sets."""
    ga = gridding(points_a, resolution)
    gb = gridding(points_b, resolution)
    return float(np.abs(ga.values - gb.values).sum() / resolution**3)
