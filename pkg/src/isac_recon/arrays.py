"""Planar array geometry: apertures, element phases, angle conventions.

Element (p, q) of a P x Q array sits at ((p-1)*d, (q-1)*d, 0) in the array
frame; boresight is +z. The inter-element phase for a far-field source at
angles (theta, phi), both in (0, 180) degrees, is

    exp(-j * 2*pi*d/lambda * [(p-1)*E_P + (q-1)*E_Q])

with the quadrant sign rule folded into the direction cosines:

    E_P = |cos(theta)| * cos(phi)
    E_Q = sin(theta) * |cos(phi)|

The sign rule makes theta observable only through |cos(theta)|, so theta
and 180 - theta produce identical phases. All geometry therefore uses the
canonical branch theta in (0, 90], and a node's usable field of view is the
quarter space {w_y > 0, w_z > 0} in its array frame.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GeometryError


@dataclass(frozen=True)
class ArraySpec:
    """Uniform planar array: rows x cols at a fixed element spacing."""

    rows: int
    cols: int
    spacing_m: float
    role: str = "rx"  # tx | rx | vrx

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("array dimensions must be >= 1")
        if self.spacing_m <= 0:
            raise ConfigError("element spacing must be positive")

    @property
    def size(self):
        return self.rows * self.cols


def virtual_aperture(tx, rx):
    """Synthesize the virtual receive aperture of a MIMO tx/rx pair.

    The co-design constraint is rx spacing == tx.cols * tx spacing, which
    makes the sum co-array a filled uniform grid of (tx.rows*rx.rows) x
    (tx.cols*rx.cols) elements at the tx spacing.
    """
    if not np.isclose(rx.spacing_m, tx.cols * tx.spacing_m, rtol=1e-9):
        raise ConfigError(
            f"incompatible spacings: rx spacing {rx.spacing_m} != "
            f"tx.cols * tx spacing {tx.cols * tx.spacing_m}"
        )
    return ArraySpec(
        rows=tx.rows * rx.rows,
        cols=tx.cols * rx.cols,
        spacing_m=tx.spacing_m,
        role="vrx",
    )


def scan_coefficients(theta_deg, phi_deg):
    """Direction cosines (E_P, E_Q) along the row/col element axes.

    Accepts scalars or arrays (broadcast together). Encodes the quadrant
    sign rule; exactly-90-degree inputs fall on the +1 sign branch, where
    the vanishing cosine makes the branches coincide anyway.
    """
    th = np.deg2rad(np.asarray(theta_deg, dtype=float))
    ph = np.deg2rad(np.asarray(phi_deg, dtype=float))
    e_p = np.abs(np.cos(th)) * np.cos(ph)
    e_q = np.sin(th) * np.abs(np.cos(ph))
    return e_p, e_q


def element_phase(array, p, q, theta_deg, phi_deg, wavelength_m):
    """Unit phasor of element (p, q) relative to reference element (1, 1)."""
    if not (1 <= p <= array.rows and 1 <= q <= array.cols):
        raise ConfigError(f"element ({p},{q}) outside {array.rows}x{array.cols} array")
    e_p, e_q = scan_coefficients(theta_deg, phi_deg)
    k = 2.0 * np.pi * array.spacing_m / wavelength_m
    return np.exp(-1j * k * ((p - 1) * e_p + (q - 1) * e_q))


def steering_matrix(array, theta_deg, phi_deg, wavelength_m):
    """P x Q matrix of element phases; separable (rank one) by construction."""
    e_p, e_q = scan_coefficients(theta_deg, phi_deg)
    k = 2.0 * np.pi * array.spacing_m / wavelength_m
    row_phase = np.exp(-1j * k * e_p * np.arange(array.rows))
    col_phase = np.exp(-1j * k * e_q * np.arange(array.cols))
    return np.outer(row_phase, col_phase)


def steering_line(n_elem, spacing_m, wavelength_m, e_scan):
    """Steering vectors of an n-element line for scan coefficients e_scan.

    Returns an (n_elem, len(e_scan)) complex matrix.
    """
    e = np.atleast_1d(np.asarray(e_scan, dtype=float))
    k = 2.0 * np.pi * spacing_m / wavelength_m
    return np.exp(-1j * k * np.arange(n_elem)[:, None] * e[None, :])


def direction_to_angles(w):
    """Canonical (theta, phi) in degrees for a unit direction in the array frame.

    Requires w_z > 0 (front half-space); w_y < 0 has no preimage under the
    sign rule and is rejected. Returns theta in (0, 90], phi in (0, 180).
    """
    w = np.asarray(w, dtype=float)
    wx, wy, wz = w
    if wz <= 0:
        raise GeometryError(f"direction has w_z = {wz} <= 0 (behind array plane)")
    if wy < -1e-12:
        raise GeometryError(f"direction {w} outside field of view (w_y < 0)")
    r = np.hypot(wx, wy)
    if r == 0.0:
        return 90.0, 90.0  # boresight: phases are flat, angles degenerate
    cos_phi = r if wx == 0.0 else np.copysign(r, wx)
    phi = np.degrees(np.arctan2(wz, cos_phi))
    theta = np.degrees(np.arctan2(max(wy, 0.0) / r, abs(wx) / r))
    return float(theta), float(phi)


def angles_to_direction(theta_deg, phi_deg):
    """Unit direction in the array frame for canonical (theta, phi) degrees."""
    e_p, e_q = scan_coefficients(theta_deg, phi_deg)
    wz = np.sin(np.deg2rad(phi_deg))
    return np.array([float(e_p), float(e_q), float(wz)])


def in_field_of_view(w, margin=1e-9):
    """True when a unit array-frame direction is observable by the array."""
    w = np.asarray(w, dtype=float)
    return bool(w[2] > margin and w[1] > margin)
