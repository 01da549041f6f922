"""Monte Carlo orchestration: windows -> emissions -> BSM -> detections -> log.

Per pump window the engine samples the classical photon configuration
(emission numbers, times, losses) and then draws the beam-splitter
outcome from the exact few-photon conditional distributions. The
one-idler/one-WCS case, where teleportation interference lives, uses
closed-form outcome weights derived from the amplitude engine (the unit
tests check them against it); configurations with three or more photons
at the splitter are routed classically, which is exact for orthogonal
polarizations and drops only O(p mu^2) interference corrections.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .components import GAUSS_FWHM_TO_SIGMA, detect
from .config import DETECTOR_IDS, ExperimentConfig, config_hash
from .exceptions import ConfigError, DomainError
from .fock import bsm_correction_unitary
from .qubit import PureQubit, basis_states, named_state

_CHUNK = 1 << 18
_DET_INDEX = {d: i for i, d in enumerate(DETECTOR_IDS)}

# beam-splitter sub-outcome labels, doubling as threefold truth categories
CAT_TELEPORT = "teleport"  # interfered D1&D2 herald
CAT_ARM = "arm"  # classical idler+WCS herald
CAT_TWO_WCS = "two_wcs"
CAT_TWO_IDLER = "two_idler"
CAT_DARK = "dark"
CATEGORIES = (CAT_TELEPORT, CAT_ARM, CAT_TWO_WCS, CAT_TWO_IDLER, CAT_DARK)


@dataclass
class EventLog:
    """Time-tagged detection records plus the run header."""

    detectors: np.ndarray  # uint8 index into DETECTOR_IDS
    times: np.ndarray  # ns
    windows: np.ndarray  # pump window index
    darks: np.ndarray  # bool, diagnostics only
    header: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def detector_records(self, detector: str):
        """(times, windows) of one detector, time-sorted."""
        mask = self.detectors == _DET_INDEX[detector]
        return self.times[mask], self.windows[mask]

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for key in sorted(self.header):
                fh.write(f"# {key}={self.header[key]}\n")
            for d, t, w in zip(self.detectors, self.times, self.windows):
                fh.write(f"{DETECTOR_IDS[d]},{float(t)!r},{int(w)}\n")

    @classmethod
    def load(cls, path) -> "EventLog":
        header: dict = {}
        dets, times, windows = [], [], []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    header[key] = val
                    continue
                d, t, w = line.split(",")
                dets.append(_DET_INDEX[d])
                times.append(float(t))
                windows.append(int(w))
        return cls(
            np.array(dets, dtype=np.uint8),
            np.array(times, dtype=float),
            np.array(windows, dtype=np.int64),
            np.zeros(len(dets), dtype=bool),
            header,
        )

    def merged(self, other: "EventLog", period_ns: float) -> "EventLog":
        """Concatenate a second run recorded after this one."""
        shift = int(self.header.get("n_windows", self.windows.max() + 1 if len(self) else 0))
        header = dict(self.header)
        header["n_windows"] = shift + int(other.header.get("n_windows", 0))
        return EventLog(
            np.concatenate([self.detectors, other.detectors]),
            np.concatenate([self.times, other.times + shift * period_ns]),
            np.concatenate([self.windows, other.windows + shift]),
            np.concatenate([self.darks, other.darks]),
            header,
        )


def _window_rng(seed: int, chunk: int):
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, chunk)))


def _analyzer_probs(rho: np.ndarray, u_corr: np.ndarray, b3: PureQubit) -> float:
    """P(D3 | signal survives), with the herald correction applied."""
    rho_c = u_corr @ rho @ u_corr.conj().T
    return float(np.vdot(b3.amps, rho_c @ b3.amps).real)


def _pure(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


_RHO_H = _pure([1, 0])
_RHO_V = _pure([0, 1])
_RHO_MIX = 0.5 * np.eye(2, dtype=complex)


def one_one_outcomes(alpha: complex, beta: complex, xi: float, phase: float):
    """Exclusive BSM outcomes for one entangled idler + one WCS photon.

    Returns a list of (probability, d1_source, d2_source, signal_rho,
    category) where the sources are "i", "w", "b" (both photons on that
    detector) or None. Closed forms derived from the amplitude engine:
    P(D1&D2) = 1/8 split as xi^2/8 interfered plus (1-xi^2)(|beta|^2 +
    |alpha|^2)/8 classical; singles and no-click absorb the rest.
    """
    aa, bb = abs(alpha) ** 2, abs(beta) ** 2
    lam2 = 1.0 - xi * xi
    psi = _pure([-beta, np.exp(1j * phase) * alpha])
    out = [
        (xi * xi / 8.0, "s", "s", psi, CAT_TELEPORT),  # "s": shuffled times
        (lam2 * bb / 8.0, "i", "w", _RHO_H, CAT_ARM),
        (lam2 * aa / 8.0, "w", "i", _RHO_V, CAT_ARM),
        (aa * (1.0 + xi * xi) / 8.0, "b", None, _RHO_H, None),
        (aa * lam2 / 4.0, "e", None, _RHO_H, None),  # "e": either, equal odds
        (bb / 8.0, "i", None, _RHO_H, None),
        (aa / 8.0, "w", None, _RHO_V, None),
        (bb * (1.0 + xi * xi) / 8.0, None, "b", _RHO_V, None),
        (bb * lam2 / 4.0, None, "e", _RHO_V, None),
        (aa / 8.0, None, "i", _RHO_V, None),
        (bb / 8.0, None, "w", _RHO_H, None),
        ((2.0 + xi * xi) / 8.0, None, None, _RHO_MIX, None),
    ]
    return out


def _collapse_pol(pol, rng) -> str:
    """Collapse a photon polarization to H/V at the splitter polarizers."""
    if pol == "ent":  # reduced idler state of the pair is I/2
        return "H" if rng.random() < 0.5 else "V"
    if isinstance(pol, str):
        return pol
    if isinstance(pol, PureQubit):
        return "H" if rng.random() < abs(pol.a_h) ** 2 else "V"
    raise DomainError(f"cannot collapse polarization {pol!r}")


class _Runner:
    """One run's immutable precomputed context."""

    def __init__(self, cfg: ExperimentConfig, seed: int):
        cfg.validate()
        self.cfg = cfg
        self.seed = seed
        self.u_corr = bsm_correction_unitary(cfg.phi)
        # D3 projects the "minus" eigenstate of the analysis basis, D4 the
        # "plus" one (so the |-> input demo peaks on D3)
        plus, minus = basis_states(cfg.analyzer_basis)
        self.b3, self.b4 = minus, plus
        self.alpha, self.beta = cfg.wcs_state().amps
        self.eta_idler = cfg.eta_i * cfg.fibre_transmission("idler")
        self.eta_wcs = cfg.fibre_transmission("wcs")
        self.sigma_pump = cfg.pump_pulse_fwhm_ns * GAUSS_FWHM_TO_SIGMA
        self.dephase_prob = (1.0 - cfg.v_src) / 2.0
        self.binned = cfg.temporal_mode == "binned"
        # pooled-thermal pair number: P(n) = (n+1) x^n (1-x)^2 with the
        # mean pair number <n> = p, truncated at 4 pairs. To second order
        # P(1) = p and P(2) = 3p^2/4, matching the amplitude engine.
        x = cfg.p / (2.0 + cfg.p)
        norm = (1.0 - x) ** 2
        self.pair_cum = np.cumsum([(n + 1) * x**n * norm for n in range(1, 5)])
        self.p_pair = float(self.pair_cum[-1])
        self.p1 = float(self.pair_cum[0])
        self.p2 = float(self.pair_cum[1] - self.pair_cum[0])

    def sample_pairs(self, w: int, u_pair: float, rng):
        """(pair list, dephase flag) given the window's pre-drawn uniform.

        Each pair entry is (signal_pol_spec, time).
        """
        cfg = self.cfg
        t0 = w * cfg.pump_period_ns
        dephased = rng.random() < self.dephase_prob

        def ptime():
            if self.binned:
                hp = cfg.pair_bin_halfwidth
                if hp == 0:
                    return t0
                return t0 + int(rng.integers(-hp, hp + 1)) * cfg.wcs_bin_ns
            return t0 + rng.normal(0.0, self.sigma_pump)

        if u_pair >= self.p_pair:
            return [], dephased
        n = int(np.searchsorted(self.pair_cum, u_pair, side="right")) + 1
        if n == 1:
            return [("ent", ptime())], dephased
        # multi-pair emission is a product state; the H-pair multiplicity
        # is uniform over 0..n for the polarization-pooled thermal source
        k = int(rng.integers(n + 1))
        pols = ["H"] * k + ["V"] * (n - k)
        return [(pol, ptime()) for pol in pols], dephased

    def sample_wcs_times(self, w: int, n_wcs: int, rng):
        cfg = self.cfg
        n = min(int(n_wcs), 2)
        t0 = w * cfg.pump_period_ns
        if self.binned:
            h = cfg.wcs_bin_halfwidth
            return [
                t0 + int(rng.integers(-h, h + 1)) * cfg.wcs_bin_ns for _ in range(n)
            ]
        return [t0 + rng.normal(0.0, self.sigma_pump) for _ in range(n)]

    def xi(self, t_idler: float, t_wcs: float) -> float:
        if self.binned:
            return self.cfg.xi_max if t_idler == t_wcs else 0.0
        return self.cfg.xi_max * math.exp(-abs(t_idler - t_wcs) / self.cfg.tau_i)

    def route_classical(self, photons, rng):
        """Independent routing through BS + polarizers.

        `photons` is a list of (kind, pol_spec, time, pair_index). Returns
        (d1 clicks, d2 clicks, collapsed pols per pair index) where clicks
        are (time, kind) pairs.
        """
        d1, d2, collapsed = [], [], {}
        for kind, pol, t, pair_idx in photons:
            pol_hv = _collapse_pol(pol, rng)
            if pair_idx is not None and pol == "ent":
                collapsed[pair_idx] = pol_hv
            if kind == "i":
                target = d1 if pol_hv == "H" else d2
                if rng.random() < 0.5:
                    target.append((t, kind))
            else:  # wcs enters the other port, same polarizer geometry
                target = d1 if pol_hv == "H" else d2
                if rng.random() < 0.5:
                    target.append((t, kind))
        return d1, d2, collapsed

    def simulate_window(self, w: int, u_pair: float, n_wcs: int, rng):
        """Returns (click candidates [(det, time)], category or None).

        Candidates already include every photon that reached a detector;
        efficiency/jitter/darks are applied by the caller.
        """
        cfg = self.cfg
        pairs, dephased = self.sample_pairs(w, u_pair, rng)
        phase = cfg.phi + cfg.phi_drift_rad_per_window * w + (math.pi if dephased else 0.0)
        wcs_times = [
            t for t in self.sample_wcs_times(w, n_wcs, rng) if rng.random() < self.eta_wcs
        ]
        idlers = [
            (pol, t, k)
            for k, (pol, t) in enumerate(pairs)
            if rng.random() < self.eta_idler
        ]
        if not pairs and not wcs_times:
            return [], None

        # signal polarization per pair, updated by the BSM outcome below
        signal_rho = {
            k: (_RHO_MIX if pol == "ent" else (_RHO_H if pol == "H" else _RHO_V))
            for k, (pol, _) in enumerate(pairs)
        }

        # distinct temporal bins are orthogonal modes, so the two-photon
        # interference involves only the WCS photon sharing the idler's bin;
        # any other photon at the splitter is routed independently
        quantum = None  # (t_wcs, bystander wcs times)
        if len(idlers) == 1 and idlers[0][0] == "ent" and wcs_times:
            if self.binned:
                matched = [t for t in wcs_times if t == idlers[0][1]]
                if len(matched) == 1:
                    quantum = (
                        matched[0],
                        [t for t in wcs_times if t != idlers[0][1]],
                    )
            elif len(wcs_times) == 1:
                quantum = (wcs_times[0], [])

        d1: list = []
        d2: list = []
        if quantum is not None:
            pol, t_i, pair_idx = idlers[0]
            t_w, bystanders = quantum
            outcomes = one_one_outcomes(self.alpha, self.beta, self.xi(t_i, t_w), phase)
            probs = np.array([o[0] for o in outcomes])
            pick = outcomes[rng.choice(len(outcomes), p=probs / probs.sum())]
            _, src1, src2, rho, _ = pick
            signal_rho[pair_idx] = rho
            times = {"i": t_i, "w": t_w}
            if src1 == "s" and src2 == "s":
                ta, tb = (t_i, t_w) if rng.random() < 0.5 else (t_w, t_i)
                d1.append((ta, "i"))
                d2.append((tb, "w"))
            else:
                for src, target in ((src1, d1), (src2, d2)):
                    if src == "b":
                        target.append((t_i, "i"))
                        target.append((t_w, "w"))
                    elif src == "e":
                        k = "i" if rng.random() < 0.5 else "w"
                        target.append((times[k], k))
                    elif src is not None:
                        target.append((times[src], src))
            if bystanders:
                extra1, extra2, _ = self.route_classical(
                    [("w", cfg.wcs_state(), t, None) for t in bystanders], rng
                )
                d1 += extra1
                d2 += extra2
        else:
            photons = [("i", pol, t, k) for pol, t, k in idlers]
            photons += [("w", cfg.wcs_state(), t, None) for t in wcs_times]
            d1, d2, collapsed = self.route_classical(photons, rng)
            for k, pol_hv in collapsed.items():
                signal_rho[k] = _RHO_H if pol_hv == "H" else _RHO_V

        clicks = [("D1", t) for t, _ in d1] + [("D2", t) for t, _ in d2]

        # propagate each signal photon: memory branch, path loss, analyzer
        signal_clicked = False
        for k, (pol, t_pair) in enumerate(pairs):
            u = rng.random()
            if u < cfg.mem_efficiency:
                t_sig = t_pair + cfg.mem_storage_ns
            elif u < cfg.mem_efficiency + cfg.mem_transmission:
                t_sig = t_pair
            else:
                continue
            if rng.random() >= cfg.eta_s:
                continue
            if not self.binned:
                t_sig += rng.laplace(0.0, cfg.tau_i)
            p3 = _analyzer_probs(signal_rho[k], self.u_corr, self.b3)
            clicks.append(("D3" if rng.random() < p3 else "D4", t_sig))
            signal_clicked = True

        category = None
        if d1 and d2 and signal_clicked:
            if quantum is not None and pick[1] and pick[2] and pick[4]:
                category = pick[4]
            else:
                kinds = {k for _, k in d1} | {k for _, k in d2}
                if kinds == {"w"}:
                    category = CAT_TWO_WCS
                elif kinds == {"i"}:
                    category = CAT_TWO_IDLER
                else:
                    category = CAT_ARM
        return clicks, category


def run(cfg: ExperimentConfig, n_windows: int, seed: int) -> EventLog:
    """Simulate n_windows pump windows and return the detection log."""
    if n_windows < 1:
        raise ConfigError("n_windows must be >= 1")
    runner = _Runner(cfg, seed)
    period = cfg.pump_period_ns

    # record segments are kept as numpy arrays (logs can reach 1e8 records)
    seg_dets, seg_times, seg_windows, seg_darks = [], [], [], []
    category_counts = {c: 0 for c in CATEGORIES}

    aa = abs(runner.alpha) ** 2
    eff_d1 = cfg.detectors["D1"].efficiency
    eff_d2 = cfg.detectors["D2"].efficiency
    jit_d1 = cfg.detectors["D1"].jitter_sigma_ns
    jit_d2 = cfg.detectors["D2"].jitter_sigma_ns

    for chunk_start in range(0, n_windows, _CHUNK):
        n = min(_CHUNK, n_windows - chunk_start)
        rng = _window_rng(seed, chunk_start // _CHUNK)
        u_pair = rng.random(n)
        n_wcs = rng.poisson(cfg.mu, n) if cfg.mu > 0 else np.zeros(n, dtype=int)
        pair_win = u_pair < runner.p_pair
        dets, times, windows, darks = [], [], [], []

        # pair-free WCS windows only produce independent splitter clicks;
        # they are processed in bulk (identical physics, vectorized draws)
        rows = np.repeat(
            np.flatnonzero(~pair_win & (n_wcs > 0)),
            np.minimum(n_wcs[~pair_win & (n_wcs > 0)], 2),
        )
        m = len(rows)
        if m:
            surv = rng.random(m) < runner.eta_wcs
            is_h = rng.random(m) < aa
            routed = rng.random(m) < 0.5
            u_eff = rng.random(m)
            t0 = (chunk_start + rows) * period
            if runner.binned:
                h = cfg.wcs_bin_halfwidth
                t = t0 + rng.integers(-h, h + 1, size=m) * cfg.wcs_bin_ns
            else:
                t = t0 + rng.normal(0.0, runner.sigma_pump, m)
            jitter = rng.normal(0.0, 1.0, m)
            eff = np.where(is_h, eff_d1, eff_d2)
            keep = surv & routed & (u_eff < eff)
            t = t + jitter * np.where(is_h, jit_d1, jit_d2)
            seg_dets.append(np.where(is_h[keep], 0, 1).astype(np.uint8))
            seg_times.append(t[keep])
            seg_windows.append((chunk_start + rows[keep]).astype(np.int64))
            seg_darks.append(np.zeros(int(keep.sum()), dtype=bool))

        for idx in np.flatnonzero(pair_win):
            w = chunk_start + int(idx)
            clicks, category = runner.simulate_window(
                w, float(u_pair[idx]), int(n_wcs[idx]), rng
            )
            if not clicks:
                continue
            recs = detect(
                [(d, t, 1.0) for d, t in clicks], cfg, rng, window_index=w
            )
            if category is not None:
                present = {r.detector for r in recs}
                if {"D1", "D2"} <= present and ({"D3", "D4"} & present):
                    category_counts[category] += 1
                else:
                    category = None
            for r in recs:
                dets.append(_DET_INDEX[r.detector])
                times.append(r.time)
                windows.append(w)
                darks.append(False)
        # dark counts, pooled over the chunk
        span = n * period
        for det_id, det in cfg.detectors.items():
            k = rng.poisson(det.dark_rate_hz * span * 1e-9)
            if k:
                ts = rng.uniform(chunk_start * period, chunk_start * period + span, size=k)
                for t in ts:
                    dets.append(_DET_INDEX[det_id])
                    times.append(float(t))
                    windows.append(chunk_start + int((t - chunk_start * period) // period))
                    darks.append(True)
        if dets:
            seg_dets.append(np.array(dets, dtype=np.uint8))
            seg_times.append(np.array(times, dtype=float))
            seg_windows.append(np.array(windows, dtype=np.int64))
            seg_darks.append(np.array(darks, dtype=bool))

    dets = np.concatenate(seg_dets) if seg_dets else np.empty(0, dtype=np.uint8)
    seg_dets.clear()
    times = np.concatenate(seg_times) if seg_times else np.empty(0, dtype=float)
    seg_times.clear()
    windows = np.concatenate(seg_windows) if seg_windows else np.empty(0, dtype=np.int64)
    seg_windows.clear()
    darks = np.concatenate(seg_darks) if seg_darks else np.empty(0, dtype=bool)
    seg_darks.clear()
    order = np.argsort(times, kind="stable")
    dets, times = dets[order], times[order]
    windows, darks = windows[order], darks[order]
    del order
    log = EventLog(dets, times, windows, darks)

    # dark-assisted threefolds complete the truth bookkeeping
    category_counts[CAT_DARK] = _count_dark_threefolds(log, category_counts)
    counts = {d: int(np.sum(dets == i)) for i, d in enumerate(DETECTOR_IDS)}
    log.header = {
        "config_hash": config_hash(cfg),
        "seed": seed,
        "n_windows": n_windows,
        **{f"counts_{d}": c for d, c in counts.items()},
        **{f"threefolds_{c}": category_counts[c] for c in CATEGORIES},
    }
    return log


def _count_dark_threefolds(log: EventLog, photon_counts: dict) -> int:
    """Windows whose D1&D2&(D3|D4) presence relies on at least one dark."""
    total = count_threefold_windows(log)
    return total - sum(photon_counts.values())


def count_threefold_windows(log: EventLog) -> int:
    """Number of windows where D1, D2 and at least one of D3/D4 clicked."""
    if len(log) == 0:
        return 0
    masks = []
    for det in ("D1", "D2"):
        masks.append(np.unique(log.windows[log.detectors == _DET_INDEX[det]]))
    sig = np.unique(
        log.windows[
            (log.detectors == _DET_INDEX["D3"]) | (log.detectors == _DET_INDEX["D4"])
        ]
    )
    both = np.intersect1d(masks[0], masks[1], assume_unique=True)
    return len(np.intersect1d(both, sig, assume_unique=True))


def run_visibility_scan(cfg: ExperimentConfig, hwp_angles, n_windows: int, seed: int):
    """Source-visibility calibration: WCS off, idler analyzed in the +/-
    basis, signal analyzer phase swept by the wave-plate angle.

    Returns {angle: {"D1-D3": n, "D1-D4": n, "D2-D3": n, "D2-D4": n}}.
    The counts follow A (1 +/- V cos(4 theta - phi)).
    """
    if cfg.mu != 0:
        raise ConfigError("visibility scan requires the WCS switched off")
    runner = _Runner(cfg, seed)
    eta1 = cfg.detectors["D1"].efficiency
    eta2 = cfg.detectors["D2"].efficiency
    eta3 = cfg.detectors["D3"].efficiency
    eta4 = cfg.detectors["D4"].efficiency
    s_sig = (cfg.mem_efficiency + cfg.mem_transmission) * cfg.eta_s
    rng = _window_rng(seed, 0)
    results = {}
    for j, theta in enumerate(hwp_angles):
        # idler projected on |+/-> (1/2 each, surviving the path), signal
        # projected on the equatorial state at phase 4 theta
        n_pairs = rng.binomial(n_windows, cfg.p)
        dephased = rng.binomial(n_pairs, runner.dephase_prob)
        counts = {"D1-D3": 0, "D1-D4": 0, "D2-D3": 0, "D2-D4": 0}
        for n_sub, flip in ((n_pairs - dephased, 0.0), (dephased, math.pi)):
            if n_sub == 0:
                continue
            c = math.cos(4.0 * theta - cfg.phi - flip)
            p_joint = []
            # D3 carries the minus projector, D4 the plus one
            for eta_i_det, sign_i in ((eta1, +1.0), (eta2, -1.0)):
                for eta_s_det, sign_s in ((eta3, -1.0), (eta4, +1.0)):
                    p_joint.append(
                        runner.eta_idler
                        * 0.5
                        * eta_i_det
                        * s_sig
                        * eta_s_det
                        * 0.5
                        * (1.0 + sign_i * sign_s * c)
                    )
            p_joint.append(1.0 - sum(p_joint))
            draw = rng.multinomial(n_sub, p_joint)
            for key, extra in zip(("D1-D3", "D1-D4", "D2-D3", "D2-D4"), draw[:4]):
                counts[key] += int(extra)
        results[float(theta)] = counts
    return results


def run_hom_scan(cfg: ExperimentConfig, delta_ts, n_windows: int, seed: int):
    """Simulated heralded two-photon interference scan.

    Single-polarization pair source (both photons H) with an H-polarized
    WCS delayed by delta t; the splitter outputs are detected without
    polarizers and coincidences are conditioned on a detected signal.
    Returns (rates per delay, visibility from the zero-delay point against
    the far-delay average).
    """
    if len(delta_ts) == 0:
        raise DomainError("need at least one delay")
    rng = _window_rng(seed, 1)
    p, mu = cfg.p, cfg.mu
    eta_i = cfg.eta_i * cfg.fibre_transmission("idler")
    eta_w = cfg.fibre_transmission("wcs")
    s_sig = (cfg.mem_efficiency + cfg.mem_transmission) * cfg.eta_s * cfg.detectors["D3"].efficiency
    eta12 = cfg.detectors["D1"].efficiency * cfg.detectors["D2"].efficiency
    p_w = [math.exp(-mu) * mu**k / math.factorial(k) for k in range(3)]
    rates = []
    for dt in delta_ts:
        xi = cfg.xi_max * math.exp(-abs(dt) / cfg.tau_i)
        prob = 0.0
        # one pair + one WCS photon: HOM-suppressed splitting
        prob += p * p_w[1] * eta_i * eta_w * 0.5 * (1.0 - xi * xi) * s_sig
        # one pair + two WCS photons (classical 3-photon routing)
        prob += p * p_w[2] * eta_i * eta_w**2 * 0.75 * s_sig
        prob += p * p_w[2] * eta_i * eta_w * (1.0 - eta_w) * 2 * 0.5 * (1.0 - xi * xi) * s_sig
        # two pairs, no WCS photon needed: idlers split classically
        s2 = 1.0 - (1.0 - s_sig) ** 2
        prob += (p * p / 4.0) * p_w[0] * eta_i**2 * 0.5 * s2
        prob += (p * p / 4.0) * p_w[1] * eta_i**2 * eta_w * 0.75 * s2
        # two pairs, one idler lost, one WCS photon
        prob += (p * p / 4.0) * p_w[1] * 2 * eta_i * (1.0 - eta_i) * eta_w * 0.5 * (1.0 - xi * xi) * s2
        # one pair, idler lost, two WCS photons
        prob += p * p_w[2] * (1.0 - eta_i) * eta_w**2 * 0.5 * s_sig
        prob *= eta12
        rates.append(rng.binomial(n_windows, prob) / n_windows)
    delta_ts = list(delta_ts)
    far = [r for dt, r in zip(delta_ts, rates) if abs(dt) >= 5.0 * cfg.tau_i]
    if not far:
        raise DomainError("scan needs delays beyond 5 tau_i for the baseline")
    baseline = float(np.mean(far))
    izero = int(np.argmin(np.abs(delta_ts)))
    visibility = (baseline - rates[izero]) / baseline if baseline > 0 else 0.0
    return rates, visibility


def run_expected_tomography(cfg: ExperimentConfig, n_windows: int, seed: int, bases=("X", "Y", "Z")):
    """Expected threefold counts per analysis basis from sampled emissions.

    Samples the emission process (pair windows, two-pair windows) exactly
    like `run`, but averages analytically over losses, WCS photon number,
    dephasing and branch choice, accumulating the expected threefold
    weight on each analyzer detector. This removes the sampling noise of
    the very rare noise heralds while keeping the emission statistics
    Monte Carlo. Timing is integrated out (all-delays budget, overlap =
    xi_max). Returns {basis: (n_D3, n_D4)} as floats, i.e. (minus, plus)
    ports of the analyzer.
    """
    runner = _Runner(cfg, seed)
    alpha, beta = runner.alpha, runner.beta
    aa, bb = abs(alpha) ** 2, abs(beta) ** 2
    basis_pairs = {b: basis_states(b) for b in bases}
    s3 = cfg.eta_s * (cfg.mem_efficiency + cfg.mem_transmission) * cfg.detectors["D3"].efficiency
    s4 = cfg.eta_s * (cfg.mem_efficiency + cfg.mem_transmission) * cfg.detectors["D4"].efficiency
    eta12 = cfg.detectors["D1"].efficiency * cfg.detectors["D2"].efficiency
    eta_i, eta_w = runner.eta_idler, runner.eta_wcs
    xi = cfg.xi_max
    lam2 = 1.0 - xi * xi
    # WCS photon number at the splitter: Poisson capped at 2, then thinned
    p_emit = [math.exp(-cfg.mu) * cfg.mu**k / math.factorial(k) for k in (0, 1)]
    p_emit.append(1.0 - p_emit[0] - p_emit[1])
    pw1 = p_emit[1] * eta_w + p_emit[2] * 2 * eta_w * (1.0 - eta_w)
    pw2 = p_emit[2] * eta_w**2
    totals = {b: np.zeros(2) for b in bases}

    def contributions(phase: float):
        """[(herald_prob, rho)] for a single entangled-pair window."""
        psi = _pure([-beta, np.exp(1j * phase) * alpha])
        out = [
            (eta_i * pw1 * eta12 * xi * xi / 8.0, psi),
            (eta_i * pw1 * eta12 * lam2 * bb / 8.0, _RHO_H),
            (eta_i * pw1 * eta12 * lam2 * aa / 8.0, _RHO_V),
            ((1.0 - eta_i) * pw2 * eta12 * aa * bb / 2.0, _RHO_MIX),
        ]
        # idler + two WCS photons, routed classically
        p_w_d2 = 1.0 - (1.0 - bb / 2.0) ** 2
        p_w_d1 = 1.0 - (1.0 - aa / 2.0) ** 2
        out.append((eta_i * pw2 * eta12 * 0.25 * p_w_d2, _RHO_H))
        out.append((eta_i * pw2 * eta12 * 0.25 * p_w_d1, _RHO_V))
        out.append((eta_i * pw2 * eta12 * 0.5 * 2 * (aa / 2.0) * (bb / 2.0), _RHO_MIX))
        return out

    def window_weights(phase: float):
        """{basis: [w3, w4]} expected for one single-pair window,
        averaged over the source dephasing."""
        weights = {b: np.zeros(2) for b in bases}
        for frac, extra in ((1.0 - runner.dephase_prob, 0.0), (runner.dephase_prob, math.pi)):
            if frac == 0.0:
                continue
            for herald, rho in contributions(phase + extra):
                for b, (bp, _) in basis_pairs.items():
                    p_plus = _analyzer_probs(rho, runner.u_corr, bp)
                    weights[b][0] += frac * herald * (1.0 - p_plus) * s3
                    weights[b][1] += frac * herald * p_plus * s4
        return weights

    # two-pair windows: only the orthogonal branch (1/3 of them) heralds
    # via two idlers; both product signals contribute
    two_pair = {b: np.zeros(2) for b in bases}
    for rho in (_RHO_H, _RHO_V):
        herald = (1.0 / 3.0) * eta_i**2 * (1.0 - pw1 - pw2) * eta12 * 0.25
        for b, (bp, _) in basis_pairs.items():
            p_plus = _analyzer_probs(rho, runner.u_corr, bp)
            two_pair[b][0] += herald * (1.0 - p_plus) * s3
            two_pair[b][1] += herald * p_plus * s4

    cache: dict = {}
    for chunk_start in range(0, n_windows, _CHUNK):
        n = min(_CHUNK, n_windows - chunk_start)
        rng = _window_rng(seed, chunk_start // _CHUNK)
        u_pair = rng.random(n)
        # windows with 3+ pairs are O(p^3) and ignored here
        singles = np.flatnonzero(u_pair < runner.p1)
        n_two = int(np.sum((u_pair >= runner.p1) & (u_pair < runner.p1 + runner.p2)))
        if cfg.phi_drift_rad_per_window == 0.0:
            if "static" not in cache:
                cache["static"] = window_weights(cfg.phi)
            ws = cache["static"]
            for b in bases:
                totals[b] += len(singles) * ws[b]
        else:
            for idx in singles:
                w = chunk_start + int(idx)
                ws = window_weights(cfg.phi + cfg.phi_drift_rad_per_window * w)
                for b in bases:
                    totals[b] += ws[b]
        for b in bases:
            totals[b] += n_two * two_pair[b]
    return {b: (float(v[0]), float(v[1])) for b, v in totals.items()}
