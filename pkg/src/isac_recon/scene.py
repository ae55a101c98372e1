"""Randomized 3D scenes: boxes, sensing nodes, surface scatterers, visibility.

Geometry is axis-aligned boxes in a fixed world volume. Scatterers are
sampled on exposed box faces and are visible to a node only through the
outward hemisphere of their host face and when the connecting segments
clear every box.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PlacementError

# Face order: -x, +x, -y, +y, -z, +z. Bottom faces (-z) are never exposed.
_FACE_NORMALS = np.array(
    [
        [-1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0],
    ]
)
_EXPOSED_FACES = (0, 1, 2, 3, 5)


@dataclass(frozen=True)
class WorldBox:
    """Axis-aligned box: a stationary building or a moving vehicle."""

    min_corner: np.ndarray  # (3,) m
    size: np.ndarray  # (3,) m
    velocity: np.ndarray  # (3,) m/s, zero for buildings
    kind: str  # building | vehicle

    def __post_init__(self):
        if np.any(np.asarray(self.size) <= 0):
            raise ConfigError("box size components must be positive")

    @property
    def max_corner(self):
        return self.min_corner + self.size

    def contains(self, point, pad=0.0):
        p = np.asarray(point)
        return bool(
            np.all(p >= self.min_corner - pad) and np.all(p <= self.max_corner + pad)
        )


@dataclass(frozen=True)
class SensingNode:
    """A sensing endpoint (BS, UE or UAV) with a pose in the world frame."""

    id: int
    kind: str  # BS | UE | UAV
    position: np.ndarray  # (3,) m
    euler_rad: np.ndarray  # (alpha, beta, gamma), Z-Y-X composition


@dataclass(frozen=True)
class Scene:
    world_min: np.ndarray
    world_size: np.ndarray
    boxes: tuple
    nodes: tuple
    seed: int

    @property
    def world_max(self):
        return self.world_min + self.world_size

    def node_by_id(self, node_id):
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(f"no node with id {node_id}")


@dataclass(frozen=True)
class ScattererSet:
    """Surface scatterers: 4D ground truth for one scene."""

    positions: np.ndarray  # (n, 3) m
    velocities: np.ndarray  # (n, 3) m/s
    reflect_vars: np.ndarray  # (n,) variance of the complex reflecting factor
    face_normals: np.ndarray  # (n, 3) outward normal of the host face
    box_index: np.ndarray  # (n,) index into scene.boxes

    def __len__(self):
        return self.positions.shape[0]


@dataclass(frozen=True)
class VisibilityRecord:
    scatterer_index: int | None  # None for the direct tx-rx path
    node_pair: tuple  # (tx_id, rx_id)
    path_kind: str  # LoS | NLoS-single-bounce
    path_ranges: tuple  # (r1, r2); r2 is None for LoS records
    mirror_plane: tuple | None  # (point, unit normal) for NLoS records


@dataclass(frozen=True)
class SceneConfig:
    world_min: tuple = (0.0, 0.0, 0.0)
    world_size: tuple = (100.0, 100.0, 30.0)
    n_buildings: int = 6
    n_vehicles: int = 3
    building_size_min: tuple = (6.0, 6.0, 6.0)
    building_size_max: tuple = (18.0, 18.0, 18.0)
    vehicle_size_min: tuple = (3.8, 1.7, 1.4)
    vehicle_size_max: tuple = (5.2, 2.2, 2.0)
    vehicle_speed_range: tuple = (5.0, 15.0)
    n_bs: int = 1
    n_ue: int = 2
    n_uav: int = 0
    ue_height: float = 1.5
    uav_height_range: tuple = (10.0, 25.0)
    bs_clearance: float = 2.0  # BS sits this far above the tallest box
    reflect_var: float = 1.0
    max_retries: int = 1000


def _boxes_overlap(amin, amax, bmin, bmax):
    return bool(np.all(amin < bmax) and np.all(bmin < amax))


def _point_in_any_box(point, boxes, pad=0.5):
    return any(b.contains(point, pad=pad) for b in boxes)


def _bs_pose_towards(position, target):
    """Euler angles pointing boresight (+z) horizontally at target, cols down.

    The array's column axis (+y local) maps to world -z so that everything
    below the node falls on the observable side of the aperture.
    """
    d = np.asarray(target, dtype=float) - np.asarray(position, dtype=float)
    az = np.arctan2(d[1], d[0])
    # Columns of R are the local axes in world coordinates:
    #   x_local -> (sin az, -cos az, 0), y_local -> (0, 0, -1),
    #   z_local -> (cos az, sin az, 0); right-handed, det +1.
    rot = np.array(
        [
            [np.sin(az), 0.0, np.cos(az)],
            [-np.cos(az), 0.0, np.sin(az)],
            [0.0, -1.0, 0.0],
        ]
    )
    return rotation_to_euler_zyx(rot)


def rotation_to_euler_zyx(rot):
    """Recover (alpha, beta, gamma) with R = Rz(gamma) @ Ry(beta) @ Rx(alpha)."""
    beta = np.arcsin(np.clip(-rot[2, 0], -1.0, 1.0))
    if abs(abs(rot[2, 0]) - 1.0) < 1e-12:
        gamma = np.arctan2(-rot[0, 1], rot[1, 1])
        alpha = 0.0
    else:
        gamma = np.arctan2(rot[1, 0], rot[0, 0])
        alpha = np.arctan2(rot[2, 1], rot[2, 2])
    return np.array([alpha, beta, gamma])


def generate_scene(config, seed):
    """Generate a random scene, deterministic for a fixed (config, seed).

    Boxes are placed with rejection sampling against pairwise overlap;
    an infeasibly crowded config raises PlacementError rather than
    silently truncating.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5CE17E]))
    wmin = np.asarray(config.world_min, dtype=float)
    wsize = np.asarray(config.world_size, dtype=float)
    if np.any(wsize <= 0):
        raise ConfigError("world_size components must be positive")
    wmax = wmin + wsize

    boxes = []

    def place_box(size_min, size_max, kind, velocity):
        for _ in range(config.max_retries):
            size = rng.uniform(size_min, size_max)
            low = wmin[:2]
            high = wmax[:2] - size[:2]
            if np.any(high < low):
                continue
            xy = rng.uniform(low, high)
            mc = np.array([xy[0], xy[1], wmin[2]])
            if size[2] > wsize[2]:
                continue
            ok = all(
                not _boxes_overlap(mc, mc + size, b.min_corner, b.max_corner)
                for b in boxes
            )
            if ok:
                boxes.append(
                    WorldBox(min_corner=mc, size=size, velocity=velocity, kind=kind)
                )
                return
        raise PlacementError(
            f"could not place {kind} box after {config.max_retries} retries"
        )

    for _ in range(config.n_buildings):
        place_box(
            np.asarray(config.building_size_min),
            np.asarray(config.building_size_max),
            "building",
            np.zeros(3),
        )
    for _ in range(config.n_vehicles):
        speed = rng.uniform(*config.vehicle_speed_range)
        heading = rng.uniform(0.0, 2.0 * np.pi)
        vel = speed * np.array([np.cos(heading), np.sin(heading), 0.0])
        place_box(
            np.asarray(config.vehicle_size_min),
            np.asarray(config.vehicle_size_max),
            "vehicle",
            vel,
        )

    top = max((float(b.max_corner[2]) for b in boxes), default=wmin[2])
    center = wmin + 0.5 * wsize

    nodes = []
    node_id = 0

    def place_node(kind, z_low, z_high, towards_center):
        nonlocal node_id
        for _ in range(config.max_retries):
            # BS sits near the world edge so the whole scene stays in front.
            if kind == "BS":
                margin = 0.12 * wsize[:2]
                xy = rng.uniform(wmin[:2], wmax[:2])
                side = rng.integers(0, 4)
                if side == 0:
                    xy[0] = rng.uniform(wmin[0], wmin[0] + margin[0])
                elif side == 1:
                    xy[0] = rng.uniform(wmax[0] - margin[0], wmax[0])
                elif side == 2:
                    xy[1] = rng.uniform(wmin[1], wmin[1] + margin[1])
                else:
                    xy[1] = rng.uniform(wmax[1] - margin[1], wmax[1])
            else:
                xy = rng.uniform(wmin[:2], wmax[:2])
            z = rng.uniform(z_low, z_high) if z_high > z_low else z_low
            pos = np.array([xy[0], xy[1], z])
            if not (np.all(pos >= wmin) and np.all(pos <= wmax)):
                continue
            if _point_in_any_box(pos, boxes):
                continue
            if towards_center:
                euler = _bs_pose_towards(pos, center)
            else:
                euler = np.zeros(3)
            nodes.append(
                SensingNode(id=node_id, kind=kind, position=pos, euler_rad=euler)
            )
            node_id += 1
            return
        raise PlacementError(
            f"could not place {kind} node after {config.max_retries} retries"
        )

    bs_low = min(top + config.bs_clearance, wmax[2])
    for _ in range(config.n_bs):
        place_node("BS", bs_low, wmax[2], towards_center=True)
    for _ in range(config.n_ue):
        place_node("UE", config.ue_height, config.ue_height, towards_center=False)
    for _ in range(config.n_uav):
        lo, hi = config.uav_height_range
        place_node("UAV", lo, min(hi, wmax[2]), towards_center=False)

    return Scene(
        world_min=wmin,
        world_size=wsize,
        boxes=tuple(boxes),
        nodes=tuple(nodes),
        seed=int(seed),
    )


def _face_frame(box, face):
    """(origin, edge_u, edge_v) spanning the given face of the box."""
    mn, mx, sz = box.min_corner, box.max_corner, box.size
    if face == 0:
        return np.array([mn[0], mn[1], mn[2]]), np.array([0, sz[1], 0.0]), np.array([0, 0, sz[2]])
    if face == 1:
        return np.array([mx[0], mn[1], mn[2]]), np.array([0, sz[1], 0.0]), np.array([0, 0, sz[2]])
    if face == 2:
        return np.array([mn[0], mn[1], mn[2]]), np.array([sz[0], 0, 0.0]), np.array([0, 0, sz[2]])
    if face == 3:
        return np.array([mn[0], mx[1], mn[2]]), np.array([sz[0], 0, 0.0]), np.array([0, 0, sz[2]])
    if face == 5:
        return np.array([mn[0], mn[1], mx[2]]), np.array([sz[0], 0, 0.0]), np.array([0, sz[1], 0.0])
    raise ValueError(f"face {face} is not exposed")


def sample_scatterers(scene, surface_density, seed=None, reflect_var=1.0):
    """Sample scatterers on exposed box faces at the given density (pts/m^2).

    Counts are Poisson per face; positions are uniform on the face. Vehicle
    scatterers inherit the vehicle velocity, building scatterers are static.
    """
    if surface_density <= 0:
        raise ConfigError("surface_density must be positive")
    if reflect_var <= 0:
        raise ConfigError("reflect_var must be positive")
    if seed is None:
        seed = scene.seed
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5CA77E]))

    pos, vel, rvar, nrm, bidx = [], [], [], [], []
    for bi, box in enumerate(scene.boxes):
        for face in _EXPOSED_FACES:
            origin, eu, ev = _face_frame(box, face)
            area = np.linalg.norm(np.cross(eu, ev))
            count = rng.poisson(surface_density * area)
            if count == 0:
                continue
            uv = rng.uniform(0.0, 1.0, size=(count, 2))
            p = origin[None, :] + uv[:, :1] * eu[None, :] + uv[:, 1:2] * ev[None, :]
            pos.append(p)
            vel.append(np.tile(box.velocity, (count, 1)))
            rvar.append(np.full(count, float(reflect_var)))
            nrm.append(np.tile(_FACE_NORMALS[face], (count, 1)))
            bidx.append(np.full(count, bi, dtype=int))

    if not pos:
        z = np.zeros((0, 3))
        return ScattererSet(z, z.copy(), np.zeros(0), z.copy(), np.zeros(0, dtype=int))
    return ScattererSet(
        positions=np.concatenate(pos),
        velocities=np.concatenate(vel),
        reflect_vars=np.concatenate(rvar),
        face_normals=np.concatenate(nrm),
        box_index=np.concatenate(bidx),
    )


def segments_blocked(starts, ends, boxes, t_eps=1e-9):
    """Slab-method occlusion test for line segments against all boxes.

    Returns a boolean array; True where the open segment (t_eps, 1-t_eps)
    intersects any box. Endpoints on box surfaces do not count as blockers,
    which lets a segment terminate on its host face.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    ends = np.atleast_2d(np.asarray(ends, dtype=float))
    n = starts.shape[0]
    blocked = np.zeros(n, dtype=bool)
    if not boxes:
        return blocked
    d = ends - starts
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(d != 0.0, 1.0 / d, np.inf)
    for box in boxes:
        t1 = (box.min_corner[None, :] - starts) * inv
        t2 = (box.max_corner[None, :] - starts) * inv
        # Axis-parallel rays: inside the slab -> (-inf, inf), outside -> empty.
        par = d == 0.0
        if np.any(par):
            inside = (starts >= box.min_corner) & (starts <= box.max_corner)
            t1 = np.where(par, np.where(inside, -np.inf, np.inf), t1)
            t2 = np.where(par, np.where(inside, np.inf, -np.inf), t2)
        tmin = np.minimum(t1, t2).max(axis=1)
        tmax = np.maximum(t1, t2).min(axis=1)
        # Blocked when the hit interval overlaps the open segment interior.
        # A near-zero interval is a grazing surface touch, not an occlusion.
        overlap = np.maximum(tmin, t_eps) < np.minimum(tmax, 1.0 - t_eps)
        graze = (tmax - tmin) < t_eps
        blocked |= (tmin <= tmax) & overlap & ~graze
    return blocked


def visible_scatterers(scene, scatterers, tx, rx, period):
    """Visibility records for one (tx, rx, period) triple.

    DL expects tx == rx == a BS and returns direct echo paths. UL returns
    tx -> scatterer -> rx single-bounce paths plus a LoS record when the
    direct tx-rx segment is clear.
    """
    if period not in ("DL", "UL"):
        raise ConfigError(f"unknown period {period!r}")
    records = []
    n = len(scatterers)
    if period == "DL":
        if tx.id != rx.id:
            raise ConfigError("DL visibility is monostatic: tx and rx must match")
        if n:
            p0 = np.tile(tx.position, (n, 1))
            dirs = scatterers.positions - p0
            rng_m = np.linalg.norm(dirs, axis=1)
            facing = np.einsum("ij,ij->i", dirs, scatterers.face_normals) < 0.0
            blocked = segments_blocked(p0, scatterers.positions, scene.boxes)
            ok = facing & ~blocked & (rng_m > 1e-9)
            for i in np.nonzero(ok)[0]:
                records.append(
                    VisibilityRecord(
                        scatterer_index=int(i),
                        node_pair=(tx.id, rx.id),
                        path_kind="LoS",
                        path_ranges=(float(rng_m[i]), None),
                        mirror_plane=None,
                    )
                )
        return records

    # UL: tx (UE/UAV) -> scatterer -> rx (BS), both segments clear, the host
    # face lit from both sides; plus the direct LoS record when clear.
    if n:
        ptx = np.tile(tx.position, (n, 1))
        prx = np.tile(rx.position, (n, 1))
        d1 = scatterers.positions - ptx
        d2 = scatterers.positions - prx
        r1 = np.linalg.norm(d1, axis=1)
        r2 = np.linalg.norm(d2, axis=1)
        lit_tx = np.einsum("ij,ij->i", d1, scatterers.face_normals) < 0.0
        lit_rx = np.einsum("ij,ij->i", d2, scatterers.face_normals) < 0.0
        b1 = segments_blocked(ptx, scatterers.positions, scene.boxes)
        b2 = segments_blocked(prx, scatterers.positions, scene.boxes)
        ok = lit_tx & lit_rx & ~b1 & ~b2 & (r1 > 1e-9) & (r2 > 1e-9)
        for i in np.nonzero(ok)[0]:
            records.append(
                VisibilityRecord(
                    scatterer_index=int(i),
                    node_pair=(tx.id, rx.id),
                    path_kind="NLoS-single-bounce",
                    path_ranges=(float(r1[i]), float(r2[i])),
                    mirror_plane=(
                        scatterers.positions[i].copy(),
                        scatterers.face_normals[i].copy(),
                    ),
                )
            )
    los_clear = not segments_blocked(
        tx.position[None, :], rx.position[None, :], scene.boxes
    )[0]
    if los_clear:
        records.append(
            VisibilityRecord(
                scatterer_index=None,
                node_pair=(tx.id, rx.id),
                path_kind="LoS",
                path_ranges=(float(np.linalg.norm(rx.position - tx.position)), None),
                mirror_plane=None,
            )
        )
    return records
