"""Per-event models of the physical components: emission, memory, fibre, detectors.

These are the reference (one-event-at-a-time) implementations; the Monte
Carlo engine vectorizes the same laws.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .exceptions import DomainError
from .qubit import PureQubit, named_state

GAUSS_FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))

# two-pair emission branches: both pairs H, both V, or one of each
TWO_PAIR_BRANCHES = ("HH2", "VV2", "HVHV")


@dataclass
class PhotonEvent:
    time: float  # ns
    mode: str  # "signal" | "idler" | "wcs"
    pol: object  # PureQubit for product states; ("entangled", phase) for pairs
    origin: str  # "pair0" | "pair1" | "wcs"
    pair_id: int | None = None


@dataclass
class DetectionRecord:
    detector: str
    time: float  # ns
    truth: str  # "photon" | "dark" (diagnostics only; analysis must not read)
    window_index: int = 0


def _pulse_time(cfg: ExperimentConfig, window_index: int, rng) -> float:
    centre = window_index * cfg.pump_period_ns
    sigma = cfg.pump_pulse_fwhm_ns * GAUSS_FWHM_TO_SIGMA
    return centre + rng.normal(0.0, sigma)


def _pair_events(cfg, window_index, pair_id, pol, rng) -> list[PhotonEvent]:
    t = _pulse_time(cfg, window_index, rng)
    origin = f"pair{pair_id}"
    return [
        PhotonEvent(t, "signal", pol, origin, pair_id),
        PhotonEvent(t, "idler", pol, origin, pair_id),
    ]


def sample_emissions(cfg: ExperimentConfig, window_index: int, rng) -> list[PhotonEvent]:
    """Draw one pump window of pair and WCS emissions.

    Pair-number law: P(1 pair) = p, P(2 pairs) = 3p^2/4, with the two-pair
    branches (both-H, both-V, one-of-each) equally likely. A single pair
    carries the entangled payload ("entangled", phase); two-pair branches
    are product states. WCS photon number is Poisson(mu).
    """
    p, mu = cfg.p, cfg.mu
    if p + 0.75 * p * p > 1.0:
        raise DomainError(f"pair law invalid at p={p}")
    events: list[PhotonEvent] = []
    u = rng.random()
    phase = cfg.phi + cfg.phi_drift_rad_per_window * window_index
    if rng.random() > (1.0 + cfg.v_src) / 2.0:
        phase += np.pi  # dephased fraction of the source visibility model
    if u < p:
        events += _pair_events(cfg, window_index, 0, ("entangled", phase), rng)
    elif u < p + 0.75 * p * p:
        branch = TWO_PAIR_BRANCHES[rng.integers(3)]
        pols = {
            "HH2": ("H", "H"),
            "VV2": ("V", "V"),
            "HVHV": ("H", "V"),
        }[branch]
        for k, name in enumerate(pols):
            events += _pair_events(cfg, window_index, k, named_state(name), rng)
    n_wcs = rng.poisson(mu)
    wcs_pol = cfg.wcs_state()
    for _ in range(n_wcs):
        events.append(
            PhotonEvent(_pulse_time(cfg, window_index, rng), "wcs", wcs_pol, "wcs")
        )
    return events


def memory_branch(event: PhotonEvent, cfg: ExperimentConfig, rng) -> tuple[str, PhotonEvent | None]:
    """Route a signal photon through the storage device.

    Returns (outcome, event) with outcome in {"transmitted", "stored",
    "lost"}; a stored photon re-emerges exactly mem_storage_ns later with
    its polarization untouched.
    """
    if event.mode != "signal":
        raise DomainError("memory_branch expects a signal-mode event")
    u = rng.random()
    if u < cfg.mem_efficiency:
        return "stored", replace(event, time=event.time + cfg.mem_storage_ns)
    if u < cfg.mem_efficiency + cfg.mem_transmission:
        return "transmitted", event
    return "lost", None


def channel_attenuate(events, arm: str, cfg: ExperimentConfig, rng) -> list[PhotonEvent]:
    """Independent survival through the fibre on the given BSM arm."""
    eta = cfg.fibre_transmission(arm)
    return [ev for ev in events if rng.random() < eta]


def detect(click_events, cfg: ExperimentConfig, rng, span_ns=None, window_index: int = 0):
    """Turn candidate clicks into detection records.

    `click_events` holds (detector, time, weight) triples; each is kept
    with probability weight x detector efficiency and smeared by Gaussian
    jitter. If `span_ns = (t0, t1)` is given, dark counts are added per
    detector as a homogeneous Poisson process over that span.
    """
    records: list[DetectionRecord] = []
    for det_id, t, weight in click_events:
        det = cfg.detectors[det_id]
        if not 0.0 <= weight <= 1.0 + 1e-12:
            raise DomainError(f"click weight {weight} outside [0, 1]")
        if rng.random() < weight * det.efficiency:
            t_rec = t + (rng.normal(0.0, det.jitter_sigma_ns) if det.jitter_sigma_ns else 0.0)
            records.append(DetectionRecord(det_id, t_rec, "photon", window_index))
    if span_ns is not None:
        t0, t1 = span_ns
        if t1 <= t0:
            raise DomainError("span_ns must be increasing")
        live_s = (t1 - t0) * 1e-9
        for det_id, det in cfg.detectors.items():
            for _ in range(rng.poisson(det.dark_rate_hz * live_s)):
                records.append(
                    DetectionRecord(det_id, rng.uniform(t0, t1), "dark", window_index)
                )
    records.sort(key=lambda r: (r.detector, r.time))
    return records
