"""Per-node sensing chains: synthesis, detection, DoA, geometry inversion.

The observable tensor is separable per path (range ramp x Doppler ramp x
rank-one aperture phase), so per-element range-Doppler maps factor into
small matrix products. Detection runs on the reference element's map;
manifolds and per-slot spatial snapshots are then gathered for the
detected cells only. Receiver noise is synthesized directly in the
transform domain with the variance the map transforms would produce
(ifft over subcarriers is 1/N-normalized, the symbol DFT is not), which
is distribution-exact for white complex-Gaussian input.
"""

from dataclasses import dataclass

import numpy as np

from .arrays import direction_to_angles, in_field_of_view
from .cfar import osca_cfar_2d
from .channel import draw_reflect_factors, make_paths, snr_to_noise_var
from .doa import AngleGrid, CellData, DoaConfig, estimate_4d
from .errors import ConfigError, GeometryError
from .geometry import MirrorProblem, PointCloud4D, Pose, resolve_mirror
from .rdm import cell_from_bins, range_bin_width
from .scene import visible_scatterers


@dataclass
class SenseDiagnostics:
    period: str
    n_paths: int
    n_cells: int
    n_detections: int
    rdm_power: np.ndarray | None = None
    threshold: np.ndarray | None = None


class EchoModel:
    """Separable per-path factors of the receive-side sensing tensor."""

    def __init__(self, paths, array, params, noise_var, seed, n_slots=16):
        self.paths = list(paths)
        self.array = array
        self.params = params
        self.noise_var = float(noise_var)
        self.seed = int(seed)
        self.n_slots = int(n_slots)
        lam = params.wavelength_m
        k = len(self.paths)
        n_c, n_sym = params.n_subcarriers, params.n_symbols
        self.gains = np.array([p.gain for p in self.paths], dtype=complex)
        if k:
            taus = np.array([p.delay_s for p in self.paths])
            fds = np.array([p.doppler_hz for p in self.paths])
            n = np.arange(n_c)[:, None]
            m = np.arange(n_sym)[:, None]
            k_r = np.exp(-2j * np.pi * n * params.scs_hz * taus[None, :])
            self.k_d = np.exp(2j * np.pi * m * params.total_symbol_s * fds[None, :])
            self.range_profiles = np.fft.ifft(k_r, axis=0)  # (N_c, K)
            self.doppler_profiles = np.fft.fft(self.k_d, axis=0)  # (N_sym, K)
            kscale = 2.0 * np.pi * array.spacing_m / lam
            from .arrays import scan_coefficients

            e_p, e_q = scan_coefficients(
                np.array([p.theta_deg for p in self.paths]),
                np.array([p.phi_deg for p in self.paths]),
            )
            self.row_phase = np.exp(
                -1j * kscale * np.arange(array.rows)[:, None] * e_p[None, :]
            )  # (P, K)
            self.col_phase = np.exp(
                -1j * kscale * np.arange(array.cols)[:, None] * e_q[None, :]
            )  # (Q, K)
        else:
            self.k_d = np.zeros((n_sym, 0), dtype=complex)
            self.range_profiles = np.zeros((n_c, 0), dtype=complex)
            self.doppler_profiles = np.zeros((n_sym, 0), dtype=complex)
            self.row_phase = np.zeros((array.rows, 0), dtype=complex)
            self.col_phase = np.zeros((array.cols, 0), dtype=complex)

    def _rng(self, tag):
        return np.random.default_rng(np.random.SeedSequence([self.seed, 0x5E25E, tag]))

    def _map_noise_std(self):
        # Transform-domain std per complex entry of a full-resolution map.
        return np.sqrt(
            self.noise_var * self.params.n_symbols / self.params.n_subcarriers
        )

    def reference_rdm(self):
        """Full-resolution map of the reference element, signal plus noise."""
        n_c, n_sym = self.params.n_subcarriers, self.params.n_symbols
        sig = self.range_profiles @ (self.gains[:, None] * self.doppler_profiles.T)
        if self.noise_var > 0:
            rng = self._rng(0)
            std = self._map_noise_std() / np.sqrt(2.0)
            sig = sig + std * (
                rng.standard_normal((n_c, n_sym))
                + 1j * rng.standard_normal((n_c, n_sym))
            )
        return sig

    def manifolds(self, cells, ref_map=None):
        """(n_cells, P, Q) per-element map values at the detected bins."""
        p_dim, q_dim = self.array.rows, self.array.cols
        n_cells = len(cells)
        out = np.zeros((n_cells, p_dim, q_dim), dtype=complex)
        if self.gains.size:
            for i, (alpha, beta) in enumerate(cells):
                w = (
                    self.gains
                    * self.range_profiles[alpha, :]
                    * self.doppler_profiles[beta, :]
                )
                out[i] = (self.row_phase * w[None, :]) @ self.col_phase.T
        if self.noise_var > 0:
            rng = self._rng(1)
            std = self._map_noise_std() / np.sqrt(2.0)
            noise = std * (
                rng.standard_normal((n_cells, p_dim, q_dim))
                + 1j * rng.standard_normal((n_cells, p_dim, q_dim))
            )
            out += noise
            if ref_map is not None:
                for i, (alpha, beta) in enumerate(cells):
                    out[i, 0, 0] = ref_map[alpha, beta]
        return out

    def line_snapshots(self, cells, n_slots):
        """Per-slot snapshots of the first column and first row lines.

        Returns (col_snaps, row_snaps) with shapes (n_cells, S, P) and
        (n_cells, S, Q). Each slot's map uses that slot's symbols only, so
        paths differing in Doppler decorrelate across slots.
        """
        params = self.params
        n_sym = params.n_symbols
        if n_sym % n_slots:
            raise ConfigError(f"{n_sym} symbols do not split into {n_slots} slots")
        sym_per_slot = n_sym // n_slots
        n_cells = len(cells)
        p_dim, q_dim = self.array.rows, self.array.cols
        col = np.zeros((n_cells, n_slots, p_dim), dtype=complex)
        row = np.zeros((n_cells, n_slots, q_dim), dtype=complex)
        if self.gains.size:
            k_d_slots = self.k_d.reshape(n_slots, sym_per_slot, -1)  # (S, m', K)
            betas_c = np.array(
                [round(b * sym_per_slot / n_sym) % sym_per_slot for _, b in cells]
            )
            m_loc = np.arange(sym_per_slot)
            dft = np.exp(
                -2j * np.pi * m_loc[None, :] * betas_c[:, None] / sym_per_slot
            )  # (n_cells, m')
            slot_vals = np.einsum("smk,cm->csk", k_d_slots, dft)  # (n_cells, S, K)
            for i, (alpha, beta) in enumerate(cells):
                w = self.gains * self.range_profiles[alpha, :]  # (K,)
                base = slot_vals[i] * w[None, :]  # (S, K)
                col[i] = base @ (self.row_phase * self.col_phase[0][None, :]).T
                row[i] = base @ (self.col_phase * self.row_phase[0][None, :]).T
        if self.noise_var > 0:
            rng = self._rng(2)
            std = np.sqrt(
                self.noise_var * (n_sym // n_slots) / params.n_subcarriers / 2.0
            )
            col += std * (
                rng.standard_normal(col.shape) + 1j * rng.standard_normal(col.shape)
            )
            row += std * (
                rng.standard_normal(row.shape) + 1j * rng.standard_normal(row.shape)
            )
        return col, row


def _receiver_for(scene, node, period):
    if period == "DL":
        if node.kind != "BS":
            raise ConfigError("only BS nodes sense in the DL period")
        return node
    if node.kind not in ("UE", "UAV"):
        raise ConfigError("UL sensing requires a UE or UAV transmitter")
    bs = [n for n in scene.nodes if n.kind == "BS"]
    if not bs:
        raise ConfigError("no BS receiver available for UL sensing")
    dists = [np.linalg.norm(b.position - node.position) for b in bs]
    return bs[int(np.argmin(dists))]


def detect_cells(model, cfg, max_cells):
    """Reference-element CFAR detection plus per-cell data gathering."""
    ref = model.reference_rdm()
    power = np.abs(ref) ** 2
    result = osca_cfar_2d(power, cfg.rdm_cfar)
    cells = list(result.cells)
    if len(cells) > max_cells:
        cells.sort(key=lambda c: -power[c[0], c[1]])
        cells = sorted(cells[:max_cells])
    manifolds = model.manifolds(cells, ref_map=ref)
    col_snaps, row_snaps = model.line_snapshots(cells, model.n_slots)
    data = []
    for i, (alpha, beta) in enumerate(cells):
        cell = cell_from_bins(alpha, beta, model.params, values=manifolds[i])
        data.append(
            CellData(
                cell=cell,
                manifold=manifolds[i],
                col_snapshots=col_snaps[i],
                row_snapshots=row_snaps[i],
            )
        )
    return data, power, result.threshold


def sense_node(scene, scatterers, node_id, period, cfg, seed,
               keep_maps=False):
    """Run the full sensing chain for one node and period.

    Returns (cloud, diagnostics); the cloud is in the named node's own
    frame with node_id set to that node.
    """
    period = period.upper()
    node = scene.node_by_id(node_id)
    receiver = _receiver_for(scene, node, period)
    params = cfg.params(period)
    array = cfg.rx_array(period)
    rx_pose = Pose.from_node(receiver)

    records = visible_scatterers(scene, scatterers, node, receiver, period)
    betas = draw_reflect_factors(scatterers, seed)
    paths = make_paths(
        records, scatterers, node, receiver, period, params, betas, rx_pose=rx_pose
    )
    noise_var = snr_to_noise_var([p.gain for p in paths], cfg.snr_db)

    model = EchoModel(paths, array, params, noise_var, seed, n_slots=cfg.n_slots)
    cell_data, power, threshold = detect_cells(model, cfg, cfg.max_cells)

    doa_cfg = DoaConfig(
        grid_step_deg=cfg.doa.grid_step_deg,
        subarray_len=cfg.subarray_len(period),
        spectrum_cfar=cfg.spectrum_cfar,
        min_manifold_corr=cfg.doa.min_manifold_corr,
        eigen_window=cfg.doa.eigen_window,
        eigen_guard=cfg.doa.eigen_guard,
        eigen_p_fa=cfg.doa.eigen_p_fa,
    )
    grid = AngleGrid.make(doa_cfg.grid_step_deg)
    detections = estimate_4d(cell_data, array, params, doa_cfg, grid=grid)

    if period == "DL":
        cloud = _dl_cloud(detections, node)
    else:
        cloud = _ul_cloud(detections, node, receiver, rx_pose, params)

    diag = SenseDiagnostics(
        period=period,
        n_paths=len(paths),
        n_cells=len(cell_data),
        n_detections=len(detections),
        rdm_power=power if keep_maps else None,
        threshold=threshold if keep_maps else None,
    )
    return cloud, diag


def _dl_cloud(detections, node):
    pts, vels = [], []
    for det in detections:
        if det.range_m <= 0:
            continue
        pts.append(det.range_m * det.direction)
        vels.append(det.velocity_mps)
    if not pts:
        return PointCloud4D.empty()
    return PointCloud4D(
        positions=np.asarray(pts),
        velocities=np.asarray(vels),
        node_ids=np.full(len(pts), node.id, dtype=int),
    )


def _ul_cloud(detections, tx_node, rx_node, rx_pose, params):
    """Mirror-resolve UL detections into the transmitter node's frame."""
    dr = range_bin_width(params)
    rot = rx_pose.rotation()
    bs = rx_pose.offset

    # Expected direct-path observation from the known transmitter position.
    d_world = np.asarray(tx_node.position) - bs
    los_range = float(np.linalg.norm(d_world))
    w_local = rot.T @ (d_world / los_range)
    los_visible = in_field_of_view(w_local)
    if los_visible:
        los_theta, los_phi = direction_to_angles(w_local)

    ue_est = np.asarray(tx_node.position, dtype=float)
    los_dets = []
    others = []
    for det in detections:
        total_range = 2.0 * det.range_m
        if total_range <= 0:
            continue
        is_los = False
        if los_visible:
            is_los = (
                abs(total_range - los_range) <= 2.0 * dr
                and abs(det.theta_deg - los_theta) <= 3.0
                and abs(det.phi_deg - los_phi) <= 3.0
            )
        (los_dets if is_los else others).append(det)
    if los_dets:
        best = max(los_dets, key=lambda d: d.weight)
        ue_est = bs + 2.0 * best.range_m * (rot @ best.direction)

    pts, vels = [], []
    for det in others:
        vue = bs + 2.0 * det.range_m * (rot @ det.direction)
        try:
            p = resolve_mirror(MirrorProblem(x_bs=bs, x_ue=ue_est, x_vue=vue))
        except GeometryError:
            continue
        pts.append(p)
        vels.append(det.velocity_mps)
    if not pts:
        return PointCloud4D.empty()
    world = PointCloud4D(
        positions=np.asarray(pts),
        velocities=np.asarray(vels),
        node_ids=np.full(len(pts), tx_node.id, dtype=int),
    )
    tx_pose = Pose.from_node(tx_node)
    return PointCloud4D(
        positions=tx_pose.apply_inverse(world.positions),
        velocities=world.velocities,
        node_ids=world.node_ids,
    )
