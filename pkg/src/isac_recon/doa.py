"""Two-dimensional direction finding on detected range-Doppler cells.

Per cell: forward-backward spatial smoothing of the line-array snapshots,
eigendecomposition with adaptive source counting, two 1D subspace scans
(one per array axis) over a shared (theta, phi) grid, Hadamard product of
the scans, adaptive peak extraction, and steering-consistency validation
against the full 2D manifold.

The sign convention makes theta and 180 - theta indistinguishable, so
detections are canonicalized to theta <= 90 and de-duplicated.
"""

from dataclasses import dataclass, field

import numpy as np

from .arrays import angles_to_direction, scan_coefficients, steering_line, steering_matrix
from .cfar import CfarConfig, ca_cfar_1d, ca_cfar_2d
from .errors import ConfigError


@dataclass(frozen=True)
class AngleGrid:
    """Rectangular scan grid over (theta, phi), degrees."""

    theta_deg: np.ndarray
    phi_deg: np.ndarray

    @classmethod
    def make(cls, step_deg=0.5, theta_range=(0.0, 180.0), phi_range=(0.0, 180.0)):
        th = np.arange(theta_range[0] + step_deg, theta_range[1], step_deg)
        ph = np.arange(phi_range[0] + step_deg, phi_range[1], step_deg)
        return cls(theta_deg=th, phi_deg=ph)

    @property
    def step_deg(self):
        return float(self.theta_deg[1] - self.theta_deg[0])

    def same_as(self, other):
        return (
            self.theta_deg.shape == other.theta_deg.shape
            and self.phi_deg.shape == other.phi_deg.shape
            and np.allclose(self.theta_deg, other.theta_deg)
            and np.allclose(self.phi_deg, other.phi_deg)
        )


@dataclass(frozen=True)
class PseudoSpectrum2D:
    grid: AngleGrid
    values: np.ndarray  # (n_theta, n_phi), positive


@dataclass(frozen=True)
class SmoothedCovariance:
    matrix: np.ndarray  # (L_sub, L_sub) Hermitian
    subarray_len: int
    n_snapshots: int


@dataclass(frozen=True)
class Eigenbasis:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # unitary columns
    noise_basis: np.ndarray  # first space_dim - source_count columns
    source_count: int
    space_dim: int


@dataclass(frozen=True)
class DoaConfig:
    grid_step_deg: float = 0.5
    subarray_len: int = 8
    spectrum_cfar: CfarConfig = field(
        default_factory=lambda: CfarConfig(
            window=(21, 21), guard=(2, 2), p_fa=1e-3, variant="CA-2D"
        )
    )
    min_manifold_corr: float = 0.7
    eigen_window: int = 5
    eigen_guard: int = 1
    eigen_p_fa: float = 1e-2
    max_sources: int | None = None


@dataclass(frozen=True)
class Detection4D:
    """One estimated reflector: monostatic-equivalent range, radial velocity
    (positive closing), arrival angles, and the unit direction in the
    receiving array frame."""

    range_m: float
    velocity_mps: float
    theta_deg: float
    phi_deg: float
    direction: np.ndarray
    alpha: int
    beta: int
    weight: float  # pseudo-spectrum value at the peak


def smooth_covariance(snapshots, subarray_len):
    """Forward-backward spatially smoothed covariance of line snapshots.

    Accepts a single length-N snapshot or an (S, N) stack. The forward
    part averages the covariances of all length-`subarray_len` windows;
    the backward part is the exchange-conjugated copy J R* J.
    """
    x = np.asarray(snapshots, dtype=complex)
    if x.ndim == 1:
        x = x[None, :]
    n_snap, n_elem = x.shape
    m = int(subarray_len)
    if m > n_elem:
        raise ConfigError(f"subarray length {m} exceeds {n_elem} elements")
    n_sub = n_elem - m + 1
    subs = np.stack([x[:, l : l + m] for l in range(n_sub)], axis=1)
    subs = subs.reshape(-1, m)
    # R[a, b] = mean over snapshots/subarrays of x[a] * conj(x[b]).
    r_f = subs.T @ subs.conj() / subs.shape[0]
    r_b = r_f[::-1, ::-1].conj()
    r_x = 0.5 * (r_f + r_b)
    r_x = 0.5 * (r_x + r_x.conj().T)
    return SmoothedCovariance(matrix=r_x, subarray_len=m, n_snapshots=n_snap)


def count_sources(eigenvalues, window=5, guard=1, p_fa=1e-2):
    """Number of eigenvalues exceeding a 1D cell-averaging threshold."""
    lam = np.asarray(eigenvalues, dtype=float)
    mask = ca_cfar_1d(lam, window=window, guard=guard, p_fa=p_fa)
    return int(mask.sum())


def eigenbasis(cov, cfg):
    """Eigendecomposition with adaptive source counting."""
    vals, vecs = np.linalg.eigh(cov.matrix)
    n_s = vals.size
    n_x = count_sources(
        vals, window=cfg.eigen_window, guard=cfg.eigen_guard, p_fa=cfg.eigen_p_fa
    )
    cap = n_s - 1 if cfg.max_sources is None else min(cfg.max_sources, n_s - 1)
    n_x = min(n_x, cap)
    return Eigenbasis(
        eigenvalues=vals,
        eigenvectors=vecs,
        noise_basis=vecs[:, : n_s - n_x],
        source_count=n_x,
        space_dim=n_s,
    )


def music_spectrum_1d(noise_basis, axis, spacing_m, wavelength_m, grid):
    """Subspace scan of one line array over the full (theta, phi) grid.

    `axis` selects which direction cosine the line observes: "col" for the
    elements running along array rows (first manifold column), "row" for
    the elements along array columns (first manifold row).
    """
    u_n = np.asarray(noise_basis)
    if u_n.ndim != 2 or u_n.shape[1] == 0:
        raise ConfigError("empty noise subspace: source count equals space size")
    if axis not in ("col", "row"):
        raise ConfigError(f"axis must be 'col' or 'row', got {axis!r}")
    m = u_n.shape[0]
    th, ph = np.meshgrid(grid.theta_deg, grid.phi_deg, indexing="ij")
    e_p, e_q = scan_coefficients(th.ravel(), ph.ravel())
    e_scan = e_p if axis == "col" else e_q
    a = steering_line(m, spacing_m, wavelength_m, e_scan)
    w = u_n.conj().T @ a
    denom = np.einsum("ij,ij->j", w, w.conj()).real
    denom = np.maximum(denom, 1e-300)
    values = (1.0 / denom).reshape(th.shape)
    return PseudoSpectrum2D(grid=grid, values=values)


def combine_spectra(s_row, s_col):
    """Hadamard product of the two 1D scans."""
    if not s_row.grid.same_as(s_col.grid):
        raise ConfigError("pseudo-spectra grids differ")
    return PseudoSpectrum2D(grid=s_row.grid, values=s_row.values * s_col.values)


def manifold_correlation(manifold, array, theta_deg, phi_deg, wavelength_m):
    """Normalized correlation of a cell manifold with one steering matrix."""
    a = steering_matrix(array, theta_deg, phi_deg, wavelength_m)
    num = abs(np.vdot(a, manifold))
    den = np.linalg.norm(a) * np.linalg.norm(manifold)
    if den == 0.0:
        return 0.0
    return float(num / den)


def _canonical_theta(theta_deg):
    return theta_deg if theta_deg <= 90.0 else 180.0 - theta_deg


@dataclass(frozen=True)
class CellData:
    """Inputs for one detected cell: full manifold plus line snapshots."""

    cell: object  # RdCell
    manifold: np.ndarray  # (rows, cols)
    col_snapshots: np.ndarray  # (S, rows)
    row_snapshots: np.ndarray  # (S, cols)


def angles_for_cell(data, array, wavelength_m, cfg, grid=None):
    """Estimated (theta, phi, weight) tuples for one detected cell."""
    if grid is None:
        grid = AngleGrid.make(cfg.grid_step_deg)
    r_col = smooth_covariance(data.col_snapshots, cfg.subarray_len)
    r_row = smooth_covariance(data.row_snapshots, cfg.subarray_len)
    eb_col = eigenbasis(r_col, cfg)
    eb_row = eigenbasis(r_row, cfg)
    # A detected cell carries at least one source even if the eigenvalue
    # test is inconclusive.
    nb_col = eb_col.noise_basis
    if eb_col.source_count == 0:
        nb_col = eb_col.eigenvectors[:, : eb_col.space_dim - 1]
    nb_row = eb_row.noise_basis
    if eb_row.source_count == 0:
        nb_row = eb_row.eigenvectors[:, : eb_row.space_dim - 1]

    s_col = music_spectrum_1d(nb_col, "col", array.spacing_m, wavelength_m, grid)
    s_row = music_spectrum_1d(nb_row, "row", array.spacing_m, wavelength_m, grid)
    spectrum = combine_spectra(s_row, s_col)

    result = ca_cfar_2d(spectrum.values, cfg.spectrum_cfar)
    step = grid.step_deg
    candidates = []
    for it, ip in result.cells:
        theta = float(grid.theta_deg[it])
        phi = float(grid.phi_deg[ip])
        corr = manifold_correlation(data.manifold, array, theta, phi, wavelength_m)
        if corr < cfg.min_manifold_corr:
            continue
        candidates.append((_canonical_theta(theta), phi, float(spectrum.values[it, ip])))

    # Mirror twins and grid-step neighbours collapse to the strongest one.
    candidates.sort(key=lambda c: -c[2])
    kept = []
    for theta, phi, weight in candidates:
        dup = any(
            abs(theta - t0) <= 1.5 * step and abs(phi - p0) <= 1.5 * step
            for t0, p0, _ in kept
        )
        if not dup:
            kept.append((theta, phi, weight))
    return kept


def estimate_4d(cell_data_list, array, params, cfg, grid=None):
    """Full per-cell angle estimation over all detected range-Doppler cells."""
    if grid is None:
        grid = AngleGrid.make(cfg.grid_step_deg)
    detections = []
    for data in cell_data_list:
        for theta, phi, weight in angles_for_cell(
            data, array, params.wavelength_m, cfg, grid=grid
        ):
            detections.append(
                Detection4D(
                    range_m=data.cell.range_m,
                    velocity_mps=data.cell.velocity_mps,
                    theta_deg=theta,
                    phi_deg=phi,
                    direction=angles_to_direction(theta, phi),
                    alpha=data.cell.alpha,
                    beta=data.cell.beta,
                    weight=weight,
                )
            )
    return detections
