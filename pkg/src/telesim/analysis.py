"""Coincidence analysis: threefold histograms, calibration, g_si, visibility fits.

Delay conventions: for a signal record on Dj (j in {3, 4}) the two delays
are delta_j1 = t_j - t_D1 and delta_j2 = t_j - t_D2. Histogram bins are
centred on zero delay: bin k covers [(k - 1/2) w, (k + 1/2) w).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .exceptions import (
    AnalysisError,
    CalibrationError,
    FitError,
    InsufficientStatisticsError,
)
from .engine import EventLog


@dataclass
class CoincidenceWindow:
    centre: float  # ns
    width: float  # ns

    def __post_init__(self):
        if self.width <= 0:
            raise AnalysisError("coincidence window width must be > 0")

    @property
    def lo(self) -> float:
        return self.centre - self.width / 2.0

    @property
    def hi(self) -> float:
        return self.centre + self.width / 2.0


@dataclass
class Histogram2D:
    detector: str
    bin_ns: float = 0.486
    range_ns: float = 15.0
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bin_ns <= 0 or self.range_ns <= 0:
            raise AnalysisError("bin width and range must be > 0")
        k = int(self.range_ns / self.bin_ns)
        self.half_bins = k
        n = 2 * k + 1
        if self.counts is None:
            self.counts = np.zeros((n, n), dtype=np.int64)
        elif self.counts.shape != (n, n) or np.any(self.counts < 0):
            raise AnalysisError("counts inconsistent with bin/range parameters")

    @property
    def centres(self) -> np.ndarray:
        return np.arange(-self.half_bins, self.half_bins + 1) * self.bin_ns

    def bin_index(self, delay: float):
        k = int(np.floor(delay / self.bin_ns + 0.5))
        if abs(k) > self.half_bins:
            return None
        return k + self.half_bins


def _detector_times(log: EventLog, det: str, offset: float) -> np.ndarray:
    times, _ = log.detector_records(det)
    return np.sort(times - offset)


def build_threefold_histograms(
    log: EventLog,
    offsets: dict | None = None,
    bin_ns: float = 0.486,
    range_ns: float = 15.0,
):
    """2D threefold histograms for D3 and D4.

    Every (D1, D2, Dj) triple with both delays inside the range increments
    exactly one bin of the Dj histogram. `offsets` holds per-detector time
    corrections (subtracted from the raw tags).
    """
    offsets = offsets or {}
    t1 = _detector_times(log, "D1", offsets.get("D1", 0.0))
    t2 = _detector_times(log, "D2", offsets.get("D2", 0.0))
    hists = {}
    for det in ("D3", "D4"):
        hist = Histogram2D(detector=det, bin_ns=bin_ns, range_ns=range_ns)
        edge = hist.half_bins * bin_ns + bin_ns / 2.0
        tj = _detector_times(log, det, offsets.get(det, 0.0))
        for t in tj:
            lo1, hi1 = np.searchsorted(t1, [t - edge, t + edge])
            lo2, hi2 = np.searchsorted(t2, [t - edge, t + edge])
            for ta in t1[lo1:hi1]:
                i = hist.bin_index(t - ta)
                if i is None:
                    continue
                for tb in t2[lo2:hi2]:
                    j = hist.bin_index(t - tb)
                    if j is not None:
                        hist.counts[i, j] += 1
        hists[det] = hist
    return hists["D3"], hists["D4"]


def slice_histogram(hist: Histogram2D, which: str, centre: float = 0.0):
    """1D cut: `which`="row" fixes delta_j1 = centre, "col" fixes delta_j2.

    Returns (delay centres, counts).
    """
    idx = hist.bin_index(centre)
    if idx is None:
        raise AnalysisError(f"slice centre {centre} ns outside histogram range")
    if which == "row":
        return hist.centres, hist.counts[idx, :].copy()
    if which == "col":
        return hist.centres, hist.counts[:, idx].copy()
    raise AnalysisError(f"unknown slice selector {which!r}")


# `slice` is the name used by callers; keep the builtin shadow local to this module
slice = slice_histogram


def diamond_counts(hist: Histogram2D, halfwidth: int = 1) -> int:
    """Counts in the centre diamond |i| + |j| <= halfwidth (bin units).

    This is the post-selection region used for fidelity estimation; the
    halfwidth is exposed because the selection rule is a convention.
    """
    if halfwidth < 0:
        raise AnalysisError("diamond halfwidth must be >= 0")
    k = hist.half_bins
    ii, jj = np.meshgrid(
        np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij"
    )
    return int(hist.counts[np.abs(ii) + np.abs(jj) <= halfwidth].sum())


def histogram_to_csv(hist: Histogram2D) -> str:
    lines = [
        f"# detector={hist.detector} bin_ns={hist.bin_ns} range_ns={hist.range_ns}",
        "row,col,count",
    ]
    n = hist.counts.shape[0]
    for i in range(n):
        for j in range(n):
            lines.append(f"{i},{j},{hist.counts[i, j]}")
    return "\n".join(lines) + "\n"


def slice_to_csv(centres: np.ndarray, counts: np.ndarray) -> str:
    lines = ["delay_ns,count"]
    for d, c in zip(centres, counts):
        lines.append(f"{d:.6f},{c}")
    return "\n".join(lines) + "\n"


def _twofold_delays(ta: np.ndarray, tb: np.ndarray, span: float) -> np.ndarray:
    """All delays tb - ta with |delay| <= span (ta, tb sorted)."""
    out = []
    lo = np.searchsorted(tb, ta - span)
    hi = np.searchsorted(tb, ta + span)
    for t, l, h in zip(ta, lo, hi):
        if h > l:
            out.append(tb[l:h] - t)
    if not out:
        return np.empty(0)
    return np.concatenate(out)


def calibrate_offsets(
    log: EventLog,
    storage_ns: float = 50.0,
    period_ns: float = 100.0,
    search_halfwidth_ns: float = 12.0,
    bin_ns: float = 0.486,
) -> dict:
    """Per-detector time offsets from the stored-photon twofold peaks.

    Fits a Gaussian to each (Dj, Dk) twofold delay peak found near
    +storage_ns (j in {D3, D4}, k in {D1, D2}) and solves for per-detector
    offsets, with D1 as the time reference, such that the corrected
    stored-photon coincidence sits at zero delay. Raises a calibration
    error when a peak is below five sigma of the accidental background
    (measured in the same window displaced by one pump period).
    """
    times = {d: _detector_times(log, d, 0.0) for d in ("D1", "D2", "D3", "D4")}
    shifts = {}
    span = storage_ns + period_ns + 2 * search_halfwidth_ns
    for j in ("D3", "D4"):
        for k in ("D1", "D2"):
            delays = _twofold_delays(times[k], times[j], span)
            sel = delays[np.abs(delays - storage_ns) <= search_halfwidth_ns]
            edges = np.arange(
                storage_ns - search_halfwidth_ns, storage_ns + search_halfwidth_ns, bin_ns
            )
            counts, edges = np.histogram(sel, bins=edges)
            centres = 0.5 * (edges[:-1] + edges[1:])
            # accidental level from the same window one period away
            bg_sel = delays[np.abs(delays - storage_ns - period_ns) <= search_halfwidth_ns]
            bg = len(bg_sel) / max(len(counts), 1)
            peak = counts.max() if len(counts) else 0
            if peak - bg < 5.0 * np.sqrt(max(bg, 1.0)):
                raise CalibrationError(
                    f"stored-photon peak for ({j},{k}) below 5 sigma of background"
                )
            p0 = [peak, centres[np.argmax(counts)], 1.0, bg]

            def gauss(x, a, m, s, b):
                return a * np.exp(-0.5 * ((x - m) / s) ** 2) + b

            try:
                popt, _ = curve_fit(gauss, centres, counts, p0=p0, maxfev=20000)
            except RuntimeError as exc:
                raise CalibrationError(f"gaussian fit failed for ({j},{k}): {exc}")
            shifts[(j, k)] = popt[1]
    # shifts[(j,k)] = o_j - o_k; o_D1 := 0; D2 from the two redundant fits
    offsets = {"D1": 0.0}
    offsets["D3"] = shifts[("D3", "D1")]
    offsets["D4"] = shifts[("D4", "D1")]
    offsets["D2"] = 0.5 * (
        offsets["D3"] - shifts[("D3", "D2")] + offsets["D4"] - shifts[("D4", "D2")]
    )
    return offsets


def estimate_gsi(
    log: EventLog,
    window: CoincidenceWindow,
    peak: str = "transmitted",
    storage_ns: float = 50.0,
    period_ns: float = 100.0,
) -> float:
    """Signal-idler cross-correlation from displaced-window normalization.

    Counts idler-signal twofolds (D1 or D2 against D3 or D4) whose delay
    falls in the peak window, divided by the counts in the same-width
    window displaced by one pump period.
    """
    if window.width > period_ns:
        raise AnalysisError("coincidence window wider than the pump period")
    if peak not in ("transmitted", "stored"):
        raise AnalysisError(f"unknown peak selector {peak!r}")
    centre = window.centre + (storage_ns if peak == "stored" else 0.0)
    t_idler = np.sort(
        np.concatenate([log.detector_records("D1")[0], log.detector_records("D2")[0]])
    )
    t_sig = np.sort(
        np.concatenate([log.detector_records("D3")[0], log.detector_records("D4")[0]])
    )
    span = abs(centre) + period_ns + window.width
    delays = _twofold_delays(t_idler, t_sig, span)
    n_peak = int(np.sum((delays >= centre - window.width / 2) & (delays < centre + window.width / 2)))
    ref_centre = centre + period_ns
    n_ref = int(
        np.sum((delays >= ref_centre - window.width / 2) & (delays < ref_centre + window.width / 2))
    )
    if n_ref == 0:
        raise InsufficientStatisticsError("no coincidences in the displaced reference window")
    return n_peak / n_ref


def fit_visibility_curves(per_angle_counts: dict):
    """Least-squares sinusoid fits of the four twofold curves.

    `per_angle_counts` maps angle -> {"D1-D3": n, ...}. Each curve is fit
    to A + B cos(4 theta - phi0); returns ({pair: visibility B/A}, common
    phase phi). The D1-D3 and D2-D4 curves are anti-phased and folded in
    with a pi shift.
    """
    angles = np.array(sorted(per_angle_counts))
    if len(angles) < 8:
        raise AnalysisError("need at least 8 angles spanning a full period")
    # evenly spaced open-ended sampling of one period passes this check
    if angles.max() - angles.min() < (np.pi / 2) * (1.0 - 1.0 / len(angles)) - 1e-9:
        raise AnalysisError("angles must span a full pi/2 period")
    design = np.column_stack(
        [np.ones_like(angles), np.cos(4 * angles), np.sin(4 * angles)]
    )
    visibilities = {}
    phases = []
    for pair in ("D1-D3", "D1-D4", "D2-D3", "D2-D4"):
        y = np.array([per_angle_counts[a][pair] for a in angles], dtype=float)
        coef, residuals, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        a0, c, s = coef
        if rank < 3 or a0 <= 0:
            raise FitError(f"degenerate sinusoid fit for {pair}: coefficients {coef}")
        b = float(np.hypot(c, s))
        if b / a0 < 1e-6:
            raise FitError(f"no modulation detected for {pair} (B/A={b / a0:.2e})")
        visibilities[pair] = b / a0
        phi0 = float(np.arctan2(s, c))
        if pair in ("D1-D3", "D2-D4"):
            phi0 += np.pi
        phases.append(phi0)
    phi = float(np.angle(np.mean(np.exp(1j * np.array(phases)))))
    return visibilities, phi
