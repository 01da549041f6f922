#!/usr/bin/env python3
"""Analytic noise-budget report and (p, mu) sweep.

Prints the multiphoton noise probabilities, the predicted fidelity and
purity at the reference parameters, and writes a CSV sweep over pair
and WCS emission probabilities.
"""
import argparse

import numpy as np

from telesim.oracle import budget_report, noise_probabilities, sweep_budgets


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eta-i", type=float, default=0.13)
    ap.add_argument("--eta-s", type=float, default=6.3e-3)
    ap.add_argument("--out", default="noise_sweep.csv")
    args = ap.parse_args()

    budget = noise_probabilities(0.01, 0.011, args.eta_i, args.eta_s)
    report = budget_report(budget)
    print(f"P11 = {budget.p11:.3e}  P20 = {budget.p20:.3e}  P02 = {budget.p02:.3e}")
    print(f"F = {report['fidelity']:.4f}  P = {report['purity']:.4f}  "
          f"F_max = {report['f_max']:.4f}  SNR ok: {report['snr_holds']}")

    ps = np.geomspace(1e-3, 0.1, 25)
    mus = np.geomspace(1e-3, 0.1, 25)
    with open(args.out, "w") as fh:
        fh.write("p,mu,eta_i,eta_s,P11,P20,P02,F,P\n")
        for row in sweep_budgets(ps, mus, args.eta_i, args.eta_s):
            fh.write(",".join(repr(float(row[k])) for k in
                              ("p", "mu", "eta_i", "eta_s", "P11", "P20", "P02", "F", "P")) + "\n")
    print(f"sweep written to {args.out}")


if __name__ == "__main__":
    main()
