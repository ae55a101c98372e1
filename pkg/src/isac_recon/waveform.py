"""OFDM signal parameterization and transmit-grid generation.

Sensing operates on the per-subcarrier/per-symbol modulation grid; no
time-domain sample synthesis or CP insertion happens here.
"""

from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT
from .errors import ConfigError

# 4-PSK alphabet. The axis-aligned rotation keeps |s| == 1 exact in floats,
# which makes the received/transmitted symbol quotient modulus-safe.
QPSK_ALPHABET = np.array([1.0 + 0.0j, 0.0 + 1.0j, -1.0 + 0.0j, 0.0 - 1.0j])


@dataclass(frozen=True)
class OfdmParams:
    """OFDM numerology for one sensing period (DL or UL)."""

    carrier_hz: float
    scs_hz: float
    n_subcarriers: int
    n_symbols: int
    cp_fraction: float = 1.0 / 16.0
    period: str = "DL"

    def __post_init__(self):
        if self.carrier_hz <= 0 or self.scs_hz <= 0:
            raise ConfigError("carrier_hz and scs_hz must be positive")
        if self.n_subcarriers < 2 or self.n_symbols < 2:
            raise ConfigError("need at least 2 subcarriers and 2 symbols")
        if self.cp_fraction < 0:
            raise ConfigError("cp_fraction must be >= 0")
        if self.period not in ("DL", "UL"):
            raise ConfigError(f"unknown period {self.period!r}")

    @property
    def symbol_s(self):
        return 1.0 / self.scs_hz

    @property
    def cp_s(self):
        return self.cp_fraction * self.symbol_s

    @property
    def total_symbol_s(self):
        return self.symbol_s + self.cp_s

    @property
    def bandwidth_hz(self):
        return self.n_subcarriers * self.scs_hz

    @property
    def wavelength_m(self):
        return C_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class TxGrid:
    """Unit-modulus modulation symbols, one per (subcarrier, symbol)."""

    symbols: np.ndarray  # complex (n_subcarriers, n_symbols)


def build_params(period_cfg, period):
    """Build OfdmParams from a config mapping for the given period.

    Recognized keys: carrier_hz, scs_hz, n_subcarriers, n_symbols,
    cp_fraction.
    """
    return OfdmParams(
        carrier_hz=float(period_cfg["carrier_hz"]),
        scs_hz=float(period_cfg["scs_hz"]),
        n_subcarriers=int(period_cfg["n_subcarriers"]),
        n_symbols=int(period_cfg["n_symbols"]),
        cp_fraction=float(period_cfg.get("cp_fraction", 1.0 / 16.0)),
        period=period,
    )


def generate_tx_grid(params, seed):
    """Draw a random QPSK grid, deterministic for a fixed seed."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    idx = rng.integers(0, 4, size=(params.n_subcarriers, params.n_symbols))
    return TxGrid(symbols=QPSK_ALPHABET[idx])


def resolution_report(params):
    """Range/velocity bin widths and unambiguous spans for these params."""
    b = params.bandwidth_hz
    t_ofdm = params.total_symbol_s
    return {
        "range_res_m": C_LIGHT / (2.0 * b),
        "unamb_range_m": C_LIGHT / (2.0 * params.scs_hz),
        "velocity_res_mps": C_LIGHT / (2.0 * params.carrier_hz * t_ofdm * params.n_symbols),
        "unamb_velocity_mps": C_LIGHT / (2.0 * params.carrier_hz * t_ofdm),
    }
