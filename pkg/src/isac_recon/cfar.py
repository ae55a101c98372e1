"""Constant false-alarm rate detectors over power maps.

Two 2D variants plus a 1D cell-averaging detector:

* osca_cfar_2d: per window column, an order statistic (rank
  floor(f * N_col)) estimates the column noise level; the column
  statistics are averaged and scaled into the threshold.
* ca_cfar_2d: plain mean over the reference ring around a guard block.

Threshold scaling is calibrated so that on independent exponential noise
cells (squared magnitude of complex Gaussian) the per-cell false-alarm
probability equals p_fa exactly:

* cell averaging: P(X > a * sum_N) = (1 + a)^(-N), so the factor
  p_fa^(-1/N) - 1 multiplies the reference SUM.
* ordered statistic: the rank-k statistic of N exponentials decomposes as
  a sum of independent exponentials with rates N, N-1, ..., N-k+1, giving
  the closed form P(X > (lam/C) * sum_c Y_c) =
  prod_c prod_{i=N_c-k_c+1}^{N_c} i / (i + lam/C). The factor lam is
  inverted from that product by bisection and cached per window geometry.

Windows shrink at map borders and the factor is recomputed for the
clamped geometry, so calibration holds at the edges too.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import ConfigError


@dataclass(frozen=True)
class CfarConfig:
    """Sliding-window CFAR parameters."""

    window: tuple = (9, 9)  # (rows, cols), odd
    guard: tuple = (1, 1)  # (rows, cols)
    p_fa: float = 1e-4
    os_rank_fraction: float = 0.75
    variant: str = "OSCA-2D"  # OSCA-2D | CA-2D | CA-1D

    def __post_init__(self):
        wr, wc = self.window
        gr, gc = self.guard
        if wr % 2 == 0 or wc % 2 == 0:
            raise ConfigError("window dimensions must be odd")
        if not (0 < self.p_fa < 1):
            raise ConfigError("p_fa must be in (0, 1)")
        if gr < 0 or gc < 0 or wr <= 2 * gr or wc <= 2 * gc:
            raise ConfigError("window must extend beyond the guard region")
        if not (0 < self.os_rank_fraction <= 1):
            raise ConfigError("os_rank_fraction must be in (0, 1]")
        if self.variant not in ("OSCA-2D", "CA-2D", "CA-1D"):
            raise ConfigError(f"unknown CFAR variant {self.variant!r}")


@dataclass(frozen=True)
class CfarResult:
    mask: np.ndarray  # raw per-cell detection mask
    threshold: np.ndarray  # per-cell adaptive threshold
    cells: tuple  # peak-grouped detections, one (row, col) per target


def threshold_factor(p_fa, n):
    """Scale factor p_fa^(-1/N) - 1 for a reference sum of N cells."""
    if not (0 < p_fa < 1):
        raise ConfigError("p_fa must be in (0, 1)")
    if n < 1:
        raise ConfigError("need at least one reference cell")
    return p_fa ** (-1.0 / n) - 1.0


@lru_cache(maxsize=4096)
def os_threshold_multiplier(columns, p_fa):
    """Calibrated multiplier for the mean of per-column order statistics.

    `columns` is a tuple of (n_cells, rank) pairs, one per reference
    column. Solves prod_c prod_i i/(i + lam/C) = p_fa for lam.
    """
    n_cols = len(columns)
    if n_cols == 0:
        raise ConfigError("no reference columns in window")

    def log_pfa(lam):
        s = lam / n_cols
        total = 0.0
        for n_cells, rank in columns:
            i = np.arange(n_cells - rank + 1, n_cells + 1, dtype=float)
            total += float(np.sum(np.log(i) - np.log(i + s)))
        return total

    target = np.log(p_fa)
    lo, hi = 0.0, 4.0
    while log_pfa(hi) > target:
        hi *= 2.0
        if hi > 1e9:
            raise ConfigError("failed to bracket the OS threshold multiplier")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if log_pfa(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _os_rank(n_cells, fraction):
    return min(n_cells, max(1, int(np.floor(fraction * n_cells))))


def _column_stat_full(power, row_lo, row_hi, rank):
    """Order statistic of power[i+row_lo : i+row_hi+1, j] for every (i, j).

    Valid for rows i with i+row_lo >= 0 and i+row_hi < H; returns the
    (H - span + 1, W) valid block.
    """
    span = row_hi - row_lo + 1
    sw = sliding_window_view(power, span, axis=0)
    return np.partition(sw, rank - 1, axis=-1)[..., rank - 1]


def _column_stat_holed(power, offsets, rank, row_range):
    """Order statistic over explicit row offsets (guard hole) for interior rows."""
    i0, i1 = row_range  # rows [i0, i1)
    stacked = np.stack([power[i0 + o : i1 + o, :] for o in offsets], axis=-1)
    return np.partition(stacked, rank - 1, axis=-1)[..., rank - 1]


def osca_cfar_2d(power, cfg):
    """Ordered-statistic / cell-averaging hybrid CFAR over a 2D power map."""
    power = np.asarray(power, dtype=float)
    h, w = power.shape
    wr, wc = cfg.window
    gr, gc = cfg.guard
    hr, hc = wr // 2, wc // 2
    if wr > h or wc > w:
        raise ConfigError(f"window {cfg.window} larger than map {power.shape}")
    frac = cfg.os_rank_fraction

    # Column statistics S_full[i, j]: order stat of the clamped vertical
    # window centered at row i in column j. S_hole excludes the guard rows.
    s_full = np.empty_like(power)
    s_hole = np.empty_like(power)
    full_geom = np.empty(h, dtype=object)  # (n_cells, rank) by row
    hole_geom = np.empty(h, dtype=object)

    interior = (hr, h - hr)  # rows with an unclamped vertical window
    if interior[1] > interior[0]:
        rank = _os_rank(wr, frac)
        s_full[interior[0] : interior[1]] = _column_stat_full(power, -hr, hr, rank)
        offs = [o for o in range(-hr, hr + 1) if abs(o) > gr]
        rank_h = _os_rank(len(offs), frac)
        s_hole[interior[0] : interior[1]] = _column_stat_holed(
            power, offs, rank_h, interior
        )
        for i in range(interior[0], interior[1]):
            full_geom[i] = (wr, rank)
            hole_geom[i] = (len(offs), rank_h)

    border_rows = [i for i in range(h) if i < hr or i >= h - hr]
    for i in border_rows:
        lo, hi = max(0, i - hr), min(h - 1, i + hr)
        n_cells = hi - lo + 1
        rank = _os_rank(n_cells, frac)
        s_full[i] = np.partition(power[lo : hi + 1, :], rank - 1, axis=0)[rank - 1]
        full_geom[i] = (n_cells, rank)
        offs = [o for o in range(lo - i, hi - i + 1) if abs(o) > gr]
        if offs:
            rank_h = _os_rank(len(offs), frac)
            block = np.stack([power[i + o, :] for o in offs], axis=0)
            s_hole[i] = np.partition(block, rank_h - 1, axis=0)[rank_h - 1]
            hole_geom[i] = (len(offs), rank_h)
        else:
            s_hole[i] = 0.0
            hole_geom[i] = None

    # Accumulate the mean of column statistics over the horizontal window,
    # skipping the CUT column; columns inside the guard span use the holed
    # statistic.
    acc = np.zeros_like(power)
    cnt_full = np.zeros((h, w), dtype=np.int32)
    cnt_hole = np.zeros((h, w), dtype=np.int32)
    for dc in range(-hc, hc + 1):
        if dc == 0:
            continue
        holed = abs(dc) <= gc
        src = s_hole if holed else s_full
        cnt = cnt_hole if holed else cnt_full
        if dc > 0:
            acc[:, : w - dc] += src[:, dc:]
            cnt[:, : w - dc] += 1
        else:
            acc[:, -dc:] += src[:, : w + dc]
            cnt[:, -dc:] += 1

    # Rows whose holed column has no cells contribute nothing there.
    for i in range(h):
        if hole_geom[i] is None:
            cnt_hole[i] = 0

    n_cols = cnt_full + cnt_hole
    mu = acc / np.maximum(n_cols, 1)

    # Per-cell calibrated multiplier, filled by (row-geometry, column-count)
    # regions; all cells in a region share the reference layout.
    lam = np.empty_like(power)
    row_classes = {}
    for i in range(h):
        key = (full_geom[i], hole_geom[i])
        row_classes.setdefault(key, []).append(i)
    col_layout = {}
    for j in range(w):
        lo, hi = max(0, j - hc), min(w - 1, j + hc)
        nf = sum(1 for dc in range(lo - j, hi - j + 1) if dc != 0 and abs(dc) > gc)
        nh = sum(1 for dc in range(lo - j, hi - j + 1) if dc != 0 and abs(dc) <= gc)
        col_layout.setdefault((nf, nh), []).append(j)
    for (fg, hg), rows in row_classes.items():
        ridx = np.asarray(rows)
        for (nf, nh), cols in col_layout.items():
            cidx = np.asarray(cols)
            cols_spec = []
            if fg is not None:
                cols_spec += [fg] * nf
            if hg is not None:
                cols_spec += [hg] * nh
            value = os_threshold_multiplier(tuple(sorted(cols_spec)), cfg.p_fa)
            lam[np.ix_(ridx, cidx)] = value

    threshold = lam * mu
    mask = power > threshold
    cells = group_peaks(mask, power)
    return CfarResult(mask=mask, threshold=threshold, cells=cells)


def _box_sum(power, half_r, half_c):
    """Clamped box sums and counts via an integral image."""
    h, w = power.shape
    ii = np.zeros((h + 1, w + 1))
    ii[1:, 1:] = power.cumsum(axis=0).cumsum(axis=1)
    r = np.arange(h)
    c = np.arange(w)
    r0 = np.maximum(r - half_r, 0)
    r1 = np.minimum(r + half_r, h - 1) + 1
    c0 = np.maximum(c - half_c, 0)
    c1 = np.minimum(c + half_c, w - 1) + 1
    s = (
        ii[np.ix_(r1, c1)]
        - ii[np.ix_(r0, c1)]
        - ii[np.ix_(r1, c0)]
        + ii[np.ix_(r0, c0)]
    )
    n = np.outer(r1 - r0, c1 - c0)
    return s, n


def ca_cfar_2d(power, cfg):
    """Cell-averaging CFAR: mean of the reference ring outside the guard."""
    power = np.asarray(power, dtype=float)
    h, w = power.shape
    wr, wc = cfg.window
    gr, gc = cfg.guard
    if wr > h or wc > w:
        raise ConfigError(f"window {cfg.window} larger than map {power.shape}")
    win_sum, win_cnt = _box_sum(power, wr // 2, wc // 2)
    grd_sum, grd_cnt = _box_sum(power, gr, gc)
    ref_sum = win_sum - grd_sum
    ref_cnt = (win_cnt - grd_cnt).astype(float)
    if np.any(ref_cnt < 1):
        raise ConfigError("guard region leaves no reference cells somewhere")
    # Factor applied to the reference sum: exact p_fa on exponential noise.
    threshold = (cfg.p_fa ** (-1.0 / ref_cnt) - 1.0) * ref_sum
    mask = power > threshold
    cells = group_peaks(mask, power)
    return CfarResult(mask=mask, threshold=threshold, cells=cells)


def ca_cfar_1d(values, window=5, guard=1, p_fa=1e-2):
    """1D cell-averaging CFAR along a sequence; returns the detection mask."""
    x = np.asarray(values, dtype=float)
    n = x.size
    half = window // 2
    mask = np.zeros(n, dtype=bool)
    for i in range(n):
        lo, hi = max(0, i - half), min(n - 1, i + half)
        refs = [x[k] for k in range(lo, hi + 1) if abs(k - i) > guard]
        if not refs:
            continue
        t = threshold_factor(p_fa, len(refs)) * float(np.sum(refs))
        mask[i] = x[i] > t
    return mask


def group_peaks(mask, power):
    """Merge 8-connected detection blobs, keeping each blob's power maximum."""
    if not mask.any():
        return ()
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    cells = []
    for idx in ndimage.maximum_position(power, labels, np.arange(1, count + 1)):
        cells.append((int(idx[0]), int(idx[1])))
    cells.sort()
    return tuple(cells)
