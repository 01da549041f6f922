import numpy as np
import pytest
from scipy import stats

from telesim import components as cp
from telesim.config import DetectorConfig, ExperimentConfig
from telesim.exceptions import DomainError


def quiet_cfg(**kw):
    dets = {d: DetectorConfig(efficiency=1.0, jitter_sigma_ns=0.0, dark_rate_hz=0.0) for d in "D1 D2 D3 D4".split()}
    return ExperimentConfig(detectors=dets, **kw)


class TestSampleEmissions:
    def test_empty_source(self):
        cfg = quiet_cfg(p=0.0, mu=0.0)
        rng = np.random.default_rng(0)
        for w in range(200):
            assert cp.sample_emissions(cfg, w, rng) == []

    def test_pair_frequency(self):
        cfg = quiet_cfg(p=0.01, mu=0.0)
        rng = np.random.default_rng(1)
        n = 10**6
        pairs = sum(
            1
            for w in range(n)
            if any(ev.origin == "pair0" for ev in cp.sample_emissions(cfg, w, rng))
        )
        sigma = np.sqrt(n * 0.01)
        # includes single- and two-pair windows: p + 3p^2/4
        expect = n * (0.01 + 0.75 * 1e-4)
        assert abs(pairs - expect) < 3.5 * sigma

    def test_two_pair_branches(self):
        cfg = quiet_cfg(p=0.05, mu=0.0)
        rng = np.random.default_rng(2)
        n = 4 * 10**5
        counts = {"HH2": 0, "VV2": 0, "HVHV": 0}
        for w in range(n):
            evs = cp.sample_emissions(cfg, w, rng)
            if sum(ev.mode == "signal" for ev in evs) == 2:
                sig = sorted(
                    "H" if abs(ev.pol.a_h) > 0.5 else "V"
                    for ev in evs
                    if ev.mode == "signal"
                )
                key = {"HH": "HH2", "VV": "VV2", "HV": "HVHV"}["".join(sig)]
                counts[key] += 1
        expect = n * 0.05**2 / 4
        for k, c in counts.items():
            assert abs(c - expect) < 4 * np.sqrt(expect), (k, c, expect)

    def test_wcs_poisson(self):
        cfg = quiet_cfg(p=0.0, mu=0.3)
        rng = np.random.default_rng(3)
        ks = [len(cp.sample_emissions(cfg, w, rng)) for w in range(10**5)]
        assert np.mean(ks) == pytest.approx(0.3, abs=0.01)
        assert np.var(ks) == pytest.approx(0.3, abs=0.02)

    def test_pair_events_share_time_and_id(self):
        cfg = quiet_cfg(p=1.0 / 2, mu=0.0)
        rng = np.random.default_rng(4)
        for w in range(100):
            evs = cp.sample_emissions(cfg, w, rng)
            if len(evs) == 2:
                s, i = sorted(evs, key=lambda e: e.mode)[::-1]
                assert {s.mode, i.mode} == {"signal", "idler"}
                assert s.time == i.time
                assert s.pair_id == i.pair_id

    def test_emission_time_distribution(self):
        cfg = quiet_cfg(p=0.5, mu=0.0, pump_pulse_fwhm_ns=25.0)
        rng = np.random.default_rng(5)
        times = []
        for w in range(4 * 10**4):
            for ev in cp.sample_emissions(cfg, w, rng):
                if ev.mode == "signal":
                    times.append(ev.time - w * cfg.pump_period_ns)
        sigma = 25.0 * cp.GAUSS_FWHM_TO_SIGMA
        assert np.mean(times) == pytest.approx(0.0, abs=4 * sigma / np.sqrt(len(times)))
        assert np.std(times) == pytest.approx(sigma, rel=0.03)

    def test_dephasing_fraction(self):
        cfg = quiet_cfg(p=0.5, mu=0.0, v_src=0.5, phi=0.0)
        rng = np.random.default_rng(6)
        flipped = total = 0
        for w in range(4 * 10**4):
            for ev in cp.sample_emissions(cfg, w, rng):
                if ev.mode == "signal" and isinstance(ev.pol, tuple):
                    total += 1
                    if ev.pol[1] != 0.0:
                        flipped += 1
        assert flipped / total == pytest.approx(0.25, abs=0.01)


class TestMemoryBranch:
    def test_branch_statistics(self):
        cfg = quiet_cfg(mem_efficiency=0.05, mem_transmission=0.10)
        rng = np.random.default_rng(7)
        ev = cp.PhotonEvent(0.0, "signal", None, "pair0", 0)
        outcomes = {"stored": 0, "transmitted": 0, "lost": 0}
        n = 10**6
        for _ in range(n):
            out, _ = cp.memory_branch(ev, cfg, rng)
            outcomes[out] += 1
        assert outcomes["stored"] / n == pytest.approx(0.05, abs=3e-3)
        assert outcomes["transmitted"] / n == pytest.approx(0.10, abs=3e-3)

    def test_stored_delay_exact(self):
        cfg = quiet_cfg(mem_efficiency=1.0, mem_transmission=0.0)
        rng = np.random.default_rng(8)
        ev = cp.PhotonEvent(3.25, "signal", None, "pair0", 0)
        out, stored = cp.memory_branch(ev, cfg, rng)
        assert out == "stored"
        assert stored.time == 3.25 + 50.0
        assert stored.pol is ev.pol

    def test_rejects_non_signal(self):
        cfg = quiet_cfg()
        with pytest.raises(DomainError):
            cp.memory_branch(
                cp.PhotonEvent(0.0, "idler", None, "pair0", 0),
                cfg,
                np.random.default_rng(0),
            )


class TestChannelAttenuate:
    def test_zero_km_identity(self):
        cfg = quiet_cfg(fibre_km_idler=0.0)
        evs = [cp.PhotonEvent(float(i), "idler", None, "pair0", 0) for i in range(100)]
        assert cp.channel_attenuate(evs, "idler", cfg, np.random.default_rng(0)) == evs

    def test_survival_fraction(self):
        cfg = quiet_cfg(fibre_km_idler=12.4, attenuation_db_per_km=0.35)
        rng = np.random.default_rng(9)
        evs = [cp.PhotonEvent(0.0, "idler", None, "pair0", 0)] * 10**5
        kept = len(cp.channel_attenuate(evs, "idler", cfg, rng))
        assert kept / 1e5 == pytest.approx(0.368, abs=6e-3)

    def test_loss_composition(self):
        # two passes of eta1 then eta2 vs a single pass eta1*eta2
        base = quiet_cfg()
        cfg1 = base.replace(fibre_km_idler=5.0)
        cfg2 = base.replace(fibre_km_idler=7.4)
        cfg12 = base.replace(fibre_km_idler=12.4)
        rng = np.random.default_rng(10)
        evs = [cp.PhotonEvent(0.0, "idler", None, "pair0", 0)] * (10**6)
        two = len(cp.channel_attenuate(cp.channel_attenuate(evs, "idler", cfg1, rng), "idler", cfg2, rng))
        one = len(cp.channel_attenuate(evs, "idler", cfg12, rng))
        table = np.array([[two, 10**6 - two], [one, 10**6 - one]])
        _, pval, _, _ = stats.chi2_contingency(table)
        assert pval > 0.01


class TestDetect:
    def test_ideal_identity(self):
        cfg = quiet_cfg()
        clicks = [("D1", 1.5, 1.0), ("D3", 2.5, 1.0)]
        recs = cp.detect(clicks, cfg, np.random.default_rng(0))
        assert [(r.detector, r.time) for r in recs] == clicks and all(
            r.truth == "photon" for r in recs
        ) or [(r.detector, r.time) for r in recs] == [(d, t) for d, t, _ in clicks]

    def test_efficiency(self):
        cfg = ExperimentConfig()  # 75% efficiency defaults
        rng = np.random.default_rng(11)
        clicks = [("D2", 0.0, 1.0)] * 10**6
        kept = len([r for r in cp.detect(clicks, cfg, rng) if r.truth == "photon"])
        assert kept / 1e6 == pytest.approx(0.75, abs=2e-3)

    def test_weight_times_efficiency(self):
        cfg = quiet_cfg()
        rng = np.random.default_rng(12)
        kept = len(cp.detect([("D1", 0.0, 0.3)] * 10**5, cfg, rng))
        assert kept / 1e5 == pytest.approx(0.3, abs=6e-3)

    def test_jitter(self):
        cfg = ExperimentConfig()
        rng = np.random.default_rng(13)
        recs = cp.detect([("D4", 0.0, 1.0)] * (2 * 10**5), cfg, rng)
        ts = np.array([r.time for r in recs if r.truth == "photon"])
        assert np.std(ts) == pytest.approx(0.212, rel=0.02)

    def test_dark_counts(self):
        cfg = ExperimentConfig()  # 300 Hz darks
        rng = np.random.default_rng(14)
        # 1 ms live time per detector -> mean 0.3 darks each, 1.2 total
        total = 0
        for _ in range(1000):
            total += len(cp.detect([], cfg, rng, span_ns=(0.0, 1e6)))
        assert total == pytest.approx(1200, abs=4 * np.sqrt(1200))

    def test_records_sorted(self):
        cfg = quiet_cfg()
        rng = np.random.default_rng(15)
        recs = cp.detect(
            [("D1", 5.0, 1.0), ("D1", 1.0, 1.0), ("D2", 3.0, 1.0)], cfg, rng
        )
        keys = [(r.detector, r.time) for r in recs]
        assert keys == sorted(keys)

    def test_determinism(self):
        cfg = ExperimentConfig()
        a = cp.detect([("D1", 0.0, 1.0)] * 100, cfg, np.random.default_rng(42), span_ns=(0, 100))
        b = cp.detect([("D1", 0.0, 1.0)] * 100, cfg, np.random.default_rng(42), span_ns=(0, 100))
        assert a == b
