#!/usr/bin/env python3
"""Hong-Ou-Mandel dip of the WCS against the heralded idler.

Compares the few-photon amplitude engine (exact, multiphoton-limited)
with the Monte Carlo scan and writes both curves to CSV.
"""
import argparse

import numpy as np

from telesim import fock
from telesim.config import DetectorConfig, ExperimentConfig
from telesim.engine import run_hom_scan


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=float, default=0.0025)
    ap.add_argument("--mu", type=float, default=0.0035)
    ap.add_argument("--trials", type=int, default=10**9)
    ap.add_argument("--seed", type=int, default=51)
    ap.add_argument("--out", default="hom_dip.csv")
    args = ap.parse_args()

    dts = np.linspace(-10.0, 10.0, 41)
    probs, v_fock = fock.hom_scan(dts, 1.4, args.p, args.mu)

    dets = {d: DetectorConfig(efficiency=1.0, jitter_sigma_ns=0.0, dark_rate_hz=0.0)
            for d in ("D1", "D2", "D3", "D4")}
    cfg = ExperimentConfig(p=args.p, mu=args.mu, eta_i=1.0, eta_s=1.0,
                           mem_efficiency=0.0, mem_transmission=1.0, detectors=dets)
    rates, v_sim = run_hom_scan(cfg, dts, args.trials, args.seed)

    with open(args.out, "w") as fh:
        fh.write("delta_t_ns,engine_probability,simulated_rate\n")
        for dt, pe, rs in zip(dts, probs, rates):
            fh.write(f"{dt:.3f},{pe!r},{rs!r}\n")
    print(f"engine visibility  = {v_fock:.4f}")
    print(f"simulated visibility = {v_sim:.4f}")
    print(f"curves written to {args.out}")


if __name__ == "__main__":
    main()
