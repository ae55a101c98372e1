"""Range-Doppler maps and detected-cell manifolds.

A map comes from one array element's (subcarrier x symbol) slice: inverse
DFT (1/N normalized) along subcarriers, unnormalized DFT along symbols.
A reflector at range R and closing speed v peaks near fractional bins

    alpha = 2 R scs N_c / c,   beta = 2 v f_c T_ofdm N_sym / c

so bin centers convert back with r = alpha * c / (2 scs N_c) and
v = beta_wrapped * c / (2 f_c T_ofdm N_sym).
"""

from dataclasses import dataclass

import numpy as np

from .cfar import osca_cfar_2d
from .constants import C_LIGHT
from .errors import ConfigError


@dataclass(frozen=True)
class RangeDopplerMap:
    complex: np.ndarray  # (N_c, N_sym)
    power: np.ndarray  # |complex|^2
    range_axis: np.ndarray  # m per range bin, increasing
    velocity_axis: np.ndarray  # m/s per raw Doppler bin, increasing
    params: object


@dataclass(frozen=True)
class RdCell:
    """One detected range-Doppler cell with its per-element values."""

    alpha: int
    beta: int
    range_m: float
    velocity_mps: float
    values: np.ndarray | None  # (rows, cols) complex across array elements


def range_bin_width(params):
    return C_LIGHT / (2.0 * params.scs_hz * params.n_subcarriers)


def velocity_bin_width(params):
    return C_LIGHT / (
        2.0 * params.carrier_hz * params.total_symbol_s * params.n_symbols
    )


def wrap_velocity_bin(beta, n_symbols):
    """Map a raw Doppler bin to its signed principal value."""
    half = n_symbols // 2
    return ((beta + half) % n_symbols) - half


def compute_rdm(csi_slice, params):
    """Transform one element slice into a range-Doppler map."""
    x = np.asarray(csi_slice)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ConfigError("element slice must be at least 2x2")
    if x.shape != (params.n_subcarriers, params.n_symbols):
        raise ConfigError(
            f"slice shape {x.shape} != ({params.n_subcarriers}, {params.n_symbols})"
        )
    cplx = np.fft.fft(np.fft.ifft(x, axis=0), axis=1)
    dr = range_bin_width(params)
    dv = velocity_bin_width(params)
    return RangeDopplerMap(
        complex=cplx,
        power=np.abs(cplx) ** 2,
        range_axis=dr * np.arange(params.n_subcarriers),
        velocity_axis=dv * np.arange(params.n_symbols),
        params=params,
    )


def cell_from_bins(alpha, beta, params, values=None):
    dv = velocity_bin_width(params)
    return RdCell(
        alpha=int(alpha),
        beta=int(beta),
        range_m=float(alpha * range_bin_width(params)),
        velocity_mps=float(wrap_velocity_bin(beta, params.n_symbols) * dv),
        values=values,
    )


def detect_rd_cells(rdmap, cfg, element_values=None):
    """CFAR-detect a map and return peak-grouped cells.

    `element_values` is an optional (rows, cols, N_c, N_sym) stack of
    per-element maps; its values at each detected bin populate the cell
    manifold.
    """
    result = osca_cfar_2d(rdmap.power, cfg)
    cells = []
    for alpha, beta in result.cells:
        values = None
        if element_values is not None:
            values = np.ascontiguousarray(element_values[:, :, alpha, beta])
        cells.append(cell_from_bins(alpha, beta, rdmap.params, values))
    return cells, result


def assemble_manifold(cell, element_rdms):
    """Per-element complex values of one detected cell as a rows x cols matrix.

    `element_rdms` has shape (rows, cols, N_c, N_sym); every element slice
    must share the map dimensions.
    """
    stack = np.asarray(element_rdms)
    if stack.ndim != 4:
        raise ConfigError("element stack must be (rows, cols, N_c, N_sym)")
    if not (0 <= cell.alpha < stack.shape[2] and 0 <= cell.beta < stack.shape[3]):
        raise ConfigError(f"cell bins ({cell.alpha}, {cell.beta}) outside map")
    return np.ascontiguousarray(stack[:, :, cell.alpha, cell.beta])
