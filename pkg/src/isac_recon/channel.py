"""Echo-path parameters and 4D CSI tensor synthesis.

The sensing observable is the received/transmitted symbol quotient per
(subcarrier, symbol, array row, array col). Each path contributes

    g * exp(-j*2*pi*n*scs*tau) * exp(+j*2*pi*m*T_ofdm*f_d) * A(p, q)

where A is the element phase matrix of the receiving aperture. Positive
radial velocity means the reflector closes on the sensor (positive
Doppler).
"""

from dataclasses import dataclass

import numpy as np

from .arrays import direction_to_angles, in_field_of_view, steering_matrix
from .constants import C_LIGHT
from .errors import ConfigError
from .geometry import Pose


@dataclass(frozen=True)
class PathParams:
    """One propagation path as seen by the receiving array."""

    doppler_hz: float
    delay_s: float
    theta_deg: float
    phi_deg: float
    gain: complex
    kind: str  # LoS | NLoS
    scatterer_index: int | None = None


@dataclass(frozen=True)
class CsiTensor:
    """Complex 4D sensing tensor (subcarrier, symbol, row, col)."""

    values: np.ndarray
    params: object  # OfdmParams
    array: object  # ArraySpec

    def __post_init__(self):
        expect = (
            self.params.n_subcarriers,
            self.params.n_symbols,
            self.array.rows,
            self.array.cols,
        )
        if self.values.shape != expect:
            raise ConfigError(f"tensor shape {self.values.shape} != {expect}")


def radial_closing_speed(point, velocity, observer):
    """Closing speed of a moving point towards a static observer (m/s)."""
    d = np.asarray(point, dtype=float) - np.asarray(observer, dtype=float)
    r = np.linalg.norm(d)
    if r == 0.0:
        return 0.0
    return float(-np.dot(np.asarray(velocity, dtype=float), d / r))


def monostatic_gain(wavelength_m, range_m):
    """Two-way echo amplitude for unit reflecting factor."""
    return np.sqrt(wavelength_m**2 / ((4.0 * np.pi) ** 3 * range_m**4))


def bistatic_gain(wavelength_m, r1_m, r2_m):
    """Single-bounce amplitude for unit reflecting factor."""
    return np.sqrt(wavelength_m**2 / ((4.0 * np.pi) ** 3 * r1_m**2 * r2_m**2))


def los_gain(wavelength_m, range_m):
    """Free-space direct-path amplitude."""
    return np.sqrt(wavelength_m**2 / (4.0 * np.pi * range_m) ** 2)


def make_paths(records, scatterers, tx_node, rx_node, period, params, betas,
               rx_pose=None):
    """Turn visibility records into receive-side path parameters.

    `betas` holds one complex reflecting factor per scatterer. Paths whose
    arrival direction falls outside the receive aperture's field of view
    are dropped. `rx_pose` defaults to the rx node pose.
    """
    lam = params.wavelength_m
    pose = rx_pose if rx_pose is not None else Pose.from_node(rx_node)
    rot_t = pose.rotation().T
    paths = []
    for rec in records:
        if rec.scatterer_index is None:
            # Direct tx->rx path (UL only).
            d_world = np.asarray(tx_node.position) - np.asarray(rx_node.position)
            w = rot_t @ (d_world / np.linalg.norm(d_world))
            if not in_field_of_view(w):
                continue
            theta, phi = direction_to_angles(w)
            r01 = rec.path_ranges[0]
            paths.append(
                PathParams(
                    doppler_hz=0.0,
                    delay_s=r01 / C_LIGHT,
                    theta_deg=theta,
                    phi_deg=phi,
                    gain=complex(los_gain(lam, r01)),
                    kind="LoS",
                    scatterer_index=None,
                )
            )
            continue

        i = rec.scatterer_index
        spos = scatterers.positions[i]
        svel = scatterers.velocities[i]
        d_world = spos - np.asarray(rx_node.position)
        w = rot_t @ (d_world / np.linalg.norm(d_world))
        if not in_field_of_view(w):
            continue
        theta, phi = direction_to_angles(w)
        if period == "DL":
            r = rec.path_ranges[0]
            v_r = radial_closing_speed(spos, svel, rx_node.position)
            paths.append(
                PathParams(
                    doppler_hz=2.0 * v_r / lam,
                    delay_s=2.0 * r / C_LIGHT,
                    theta_deg=theta,
                    phi_deg=phi,
                    gain=complex(betas[i] * monostatic_gain(lam, r)),
                    kind="NLoS",
                    scatterer_index=int(i),
                )
            )
        else:
            r1, r2 = rec.path_ranges
            v1 = radial_closing_speed(spos, svel, tx_node.position)
            v2 = radial_closing_speed(spos, svel, rx_node.position)
            paths.append(
                PathParams(
                    doppler_hz=(v1 + v2) / lam,
                    delay_s=(r1 + r2) / C_LIGHT,
                    theta_deg=theta,
                    phi_deg=phi,
                    gain=complex(betas[i] * bistatic_gain(lam, r1, r2)),
                    kind="NLoS",
                    scatterer_index=int(i),
                )
            )
    return paths


def draw_reflect_factors(scatterers, seed):
    """Complex-normal reflecting factor per scatterer, fixed for a seed."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xBE7A]))
    n = len(scatterers)
    std = np.sqrt(scatterers.reflect_vars / 2.0)
    return std * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def phase_vectors(path, params):
    """(k_r, k_d): fast-time and slow-time phase ramps for one path."""
    n = np.arange(params.n_subcarriers)
    m = np.arange(params.n_symbols)
    k_r = np.exp(-2j * np.pi * n * params.scs_hz * path.delay_s)
    k_d = np.exp(2j * np.pi * m * params.total_symbol_s * path.doppler_hz)
    return k_r, k_d


def build_csi(paths, array, params, noise_var, seed):
    """Synthesize the 4D CSI tensor for the given paths plus receiver noise.

    An empty path list yields a pure-noise tensor. The result is the exact
    superposition of per-path rank-one contributions, so it is linear in
    the path set for a fixed noise draw.
    """
    shape = (params.n_subcarriers, params.n_symbols, array.rows, array.cols)
    values = np.zeros(shape, dtype=complex)
    lam = params.wavelength_m
    for path in paths:
        k_r, k_d = phase_vectors(path, params)
        a = steering_matrix(array, path.theta_deg, path.phi_deg, lam)
        values += path.gain * np.einsum("n,m,pq->nmpq", k_r, k_d, a)
    if noise_var > 0:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x4015E]))
        std = np.sqrt(noise_var / 2.0)
        values += std * (
            rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        )
    return CsiTensor(values=values, params=params, array=array)


def received_comm_signal(tx_grid, paths, rx_array, tx_array, w_tx, params,
                         noise_var, seed):
    """Received communication symbols per (subcarrier, symbol, rx element).

    y(n, m) = s_tx(n, m) * sum_l b_l * chi_l * k_r(n) * k_d(m) * a_rx + noise
    with chi_l = a_tx(l)^T w the transmit beamforming gain.
    """
    w = np.asarray(w_tx).reshape(-1)
    if w.size != tx_array.size:
        raise ConfigError(
            f"beamforming vector length {w.size} != tx array size {tx_array.size}"
        )
    lam = params.wavelength_m
    shape = (params.n_subcarriers, params.n_symbols, rx_array.size)
    y = np.zeros(shape, dtype=complex)
    for path in paths:
        k_r, k_d = phase_vectors(path, params)
        a_rx = steering_matrix(rx_array, path.theta_deg, path.phi_deg, lam).reshape(-1)
        a_tx = steering_matrix(tx_array, path.theta_deg, path.phi_deg, lam).reshape(-1)
        chi = a_tx @ w
        y += path.gain * chi * np.einsum("n,m,e->nme", k_r, k_d, a_rx)
    y *= tx_grid.symbols[:, :, None]
    if noise_var > 0:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC033]))
        std = np.sqrt(noise_var / 2.0)
        y += std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return y


def snr_to_noise_var(path_gains, snr_db):
    """Per-entry noise variance giving the requested mean per-element SNR."""
    g = np.asarray(path_gains)
    if g.size == 0:
        return 1.0
    mean_power = float(np.mean(np.abs(g) ** 2))
    return mean_power / (10.0 ** (snr_db / 10.0))
