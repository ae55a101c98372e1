"""Rigid transforms, mirror-image inversion, and 4D point clouds."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GeometryError


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(g):
    c, s = np.cos(g), np.sin(g)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Pose:
    """Node pose: Z-Y-X Euler rotation followed by a translation.

    World point = R @ local point + offset, with
    R = Rz(gamma) @ Ry(beta) @ Rx(alpha).
    """

    offset: np.ndarray  # (3,) m
    euler_rad: np.ndarray  # (alpha, beta, gamma)

    @classmethod
    def from_node(cls, node):
        return cls(
            offset=np.asarray(node.position, dtype=float),
            euler_rad=np.asarray(node.euler_rad, dtype=float),
        )

    @classmethod
    def identity(cls):
        return cls(offset=np.zeros(3), euler_rad=np.zeros(3))

    def rotation(self):
        a, b, g = self.euler_rad
        return rot_z(g) @ rot_y(b) @ rot_x(a)

    def apply(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.rotation().T + self.offset

    def apply_inverse(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts - self.offset) @ self.rotation()


@dataclass(frozen=True)
class MirrorProblem:
    """BS, UE and apparent (mirror-image) source positions."""

    x_bs: np.ndarray
    x_ue: np.ndarray
    x_vue: np.ndarray


@dataclass
class PointCloud4D:
    """Point positions with per-point radial velocity and source node id.

    For fused clouds, node_id is -1 and `provenance` lists the contributing
    node ids per point.
    """

    positions: np.ndarray  # (n, 3) m
    velocities: np.ndarray  # (n,) m/s
    node_ids: np.ndarray  # (n,) int
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1)
        self.node_ids = np.asarray(self.node_ids, dtype=int).reshape(-1)
        n = self.positions.shape[0]
        if self.velocities.shape[0] != n or self.node_ids.shape[0] != n:
            raise ConfigError("point cloud field lengths disagree")
        if n and not np.all(np.isfinite(self.positions)):
            raise ConfigError("point cloud has non-finite coordinates")

    def __len__(self):
        return self.positions.shape[0]

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=int))

    @classmethod
    def concatenate(cls, clouds):
        clouds = [c for c in clouds if len(c)]
        if not clouds:
            return cls.empty()
        return cls(
            positions=np.concatenate([c.positions for c in clouds]),
            velocities=np.concatenate([c.velocities for c in clouds]),
            node_ids=np.concatenate([c.node_ids for c in clouds]),
        )


def to_world(cloud, pose):
    """Transform a node-frame cloud into the world frame."""
    if len(cloud) == 0:
        return PointCloud4D.empty()
    return PointCloud4D(
        positions=pose.apply(cloud.positions),
        velocities=cloud.velocities.copy(),
        node_ids=cloud.node_ids.copy(),
        provenance=list(cloud.provenance),
    )


def vue_position(detection, pose):
    """Apparent source position for an uplink detection, in world frame.

    The detection's monostatic-equivalent range corresponds to half the
    total path delay, so the apparent source sits at twice that range along
    the arrival ray.
    """
    total_range = 2.0 * detection.range_m
    if total_range <= 0:
        raise GeometryError("non-positive total path range")
    w_world = pose.rotation() @ np.asarray(detection.direction, dtype=float)
    return pose.offset + total_range * w_world


def resolve_mirror(problem):
    """Recover the reflecting point from BS, UE and apparent-source positions.

    The reflector lies on the perpendicular bisector plane of the segment
    (UE, apparent source) and on the line through BS and the apparent
    source. Degenerate configurations raise GeometryError.
    """
    x0 = np.asarray(problem.x_bs, dtype=float)
    x1 = np.asarray(problem.x_ue, dtype=float)
    xv = np.asarray(problem.x_vue, dtype=float)

    seg = xv - x1
    seg_len = np.linalg.norm(seg)
    if seg_len < 1e-12:
        raise GeometryError("apparent source coincides with the UE (direct path)")
    u_plane = seg / seg_len

    line = xv - x0
    line_len = np.linalg.norm(line)
    if line_len < 1e-12:
        raise GeometryError("apparent source coincides with the BS")
    u_line = line / line_len

    denom = float(np.dot(u_plane, u_line))
    if abs(denom) < 1e-12:
        raise GeometryError("sight line parallel to the bisector plane")

    midpoint = 0.5 * (x1 + xv)
    t = float(np.dot(u_plane, midpoint - x0)) / denom
    return x0 + t * u_line


def growth_rate(count_before, count_now):
    """Relative growth of a neighborhood count between two radii."""
    if count_before <= 0:
        raise ConfigError("growth rate undefined for a zero base count")
    return (count_now - count_before) / count_before
