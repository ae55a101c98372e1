"""Run configuration: nested dataclasses with JSON round-tripping.

`RunConfig.defaults()` carries the reference system parameters (70 GHz
carrier, 240 kHz subcarrier spacing, 2048/1024 subcarriers DL/UL, 224
symbols, 16 slots, 8x8+2x2 MIMO with a 16x16 virtual aperture, smoothing
subarrays 8/4). `RunConfig.desk_scale()` shrinks the signal dimensions for
fast test runs while keeping the same processing chain.
"""

import json
from dataclasses import asdict, dataclass, field, replace

from .arrays import ArraySpec
from .cfar import CfarConfig
from .constants import C_LIGHT
from .errors import ConfigError
from .scene import SceneConfig
from .waveform import build_params

_CARRIER_HZ = 70e9
_HALF_WAVE = C_LIGHT / _CARRIER_HZ / 2.0


@dataclass(frozen=True)
class FusionConfig:
    radius: object = "auto"  # "auto" or a float (m)
    r_max: float = 10.0
    dr: float = 0.1
    eps_h: float = 0.05
    k_consecutive: int = 3
    probes: int = 10
    fallback_radius: float = 0.5


@dataclass(frozen=True)
class DoaSettings:
    grid_step_deg: float = 0.5
    subarray_dl: int = 8
    subarray_ul: int = 4
    min_manifold_corr: float = 0.7
    eigen_window: int = 5
    eigen_guard: int = 1
    eigen_p_fa: float = 1e-2


@dataclass(frozen=True)
class SplitConfig:
    train: int = 10000
    val: int = 100
    test: int = 100


@dataclass(frozen=True)
class RunConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    dl: dict = field(
        default_factory=lambda: dict(
            carrier_hz=_CARRIER_HZ,
            scs_hz=240e3,
            n_subcarriers=2048,
            n_symbols=224,
            cp_fraction=1.0 / 16.0,
        )
    )
    ul: dict = field(
        default_factory=lambda: dict(
            carrier_hz=_CARRIER_HZ,
            scs_hz=240e3,
            n_subcarriers=1024,
            n_symbols=224,
            cp_fraction=1.0 / 16.0,
        )
    )
    dl_tx: ArraySpec = field(default_factory=lambda: ArraySpec(8, 8, _HALF_WAVE, "tx"))
    dl_rx: ArraySpec = field(
        default_factory=lambda: ArraySpec(2, 2, 8.0 * _HALF_WAVE, "rx")
    )
    ul_rx: ArraySpec = field(default_factory=lambda: ArraySpec(8, 8, _HALF_WAVE, "rx"))
    snr_db: float = 10.0
    n_slots: int = 16
    surface_density: float = 1.0
    rdm_cfar: CfarConfig = field(
        default_factory=lambda: CfarConfig(
            window=(9, 9), guard=(1, 1), p_fa=1e-4, variant="OSCA-2D"
        )
    )
    spectrum_cfar: CfarConfig = field(
        default_factory=lambda: CfarConfig(
            window=(21, 21), guard=(2, 2), p_fa=1e-3, variant="CA-2D"
        )
    )
    doa: DoaSettings = field(default_factory=DoaSettings)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    splits: SplitConfig = field(default_factory=SplitConfig)
    max_cells: int = 256

    @classmethod
    def defaults(cls):
        return cls()

    @classmethod
    def desk_scale(cls):
        """Reduced dimensions for fast end-to-end runs."""
        base = cls()
        return replace(
            base,
            dl=dict(base.dl, n_subcarriers=512, n_symbols=112),
            ul=dict(base.ul, n_subcarriers=512, n_symbols=112),
            dl_tx=ArraySpec(4, 4, _HALF_WAVE, "tx"),
            dl_rx=ArraySpec(2, 2, 4.0 * _HALF_WAVE, "rx"),
            ul_rx=ArraySpec(8, 8, _HALF_WAVE, "rx"),
            scene=SceneConfig(
                world_size=(60.0, 60.0, 24.0),
                n_buildings=3,
                n_vehicles=1,
                building_size_max=(14.0, 14.0, 12.0),
            ),
            splits=SplitConfig(train=3, val=1, test=1),
        )

    def params(self, period):
        return build_params(self.dl if period == "DL" else self.ul, period)

    def rx_array(self, period):
        from .arrays import virtual_aperture

        if period == "DL":
            return virtual_aperture(self.dl_tx, self.dl_rx)
        return self.ul_rx

    def subarray_len(self, period):
        return self.doa.subarray_dl if period == "DL" else self.doa.subarray_ul


def _spec_to_dict(obj):
    if isinstance(obj, (SceneConfig, CfarConfig, DoaSettings, FusionConfig,
                        SplitConfig, ArraySpec)):
        return asdict(obj)
    return obj


def config_to_dict(cfg):
    d = asdict(cfg)
    return d


def config_from_dict(d):
    d = dict(d)
    kwargs = {}
    if "scene" in d:
        kwargs["scene"] = SceneConfig(**_tupled(d.pop("scene")))
    for key in ("dl", "ul"):
        if key in d:
            kwargs[key] = dict(d.pop(key))
    for key in ("dl_tx", "dl_rx", "ul_rx"):
        if key in d:
            kwargs[key] = ArraySpec(**_tupled(d.pop(key)))
    for key in ("rdm_cfar", "spectrum_cfar"):
        if key in d:
            kwargs[key] = CfarConfig(**_tupled(d.pop(key)))
    if "doa" in d:
        kwargs["doa"] = DoaSettings(**d.pop("doa"))
    if "fusion" in d:
        kwargs["fusion"] = FusionConfig(**d.pop("fusion"))
    if "splits" in d:
        kwargs["splits"] = SplitConfig(**d.pop("splits"))
    for key in ("snr_db", "n_slots", "surface_density", "max_cells"):
        if key in d:
            kwargs[key] = d.pop(key)
    if d:
        raise ConfigError(f"unknown config keys: {sorted(d)}")
    return RunConfig(**kwargs)


def _tupled(d):
    """JSON turns tuples into lists; turn list values back into tuples."""
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
