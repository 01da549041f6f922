"""Closed-form noise budget and fidelity/purity predictions.

All three event classes are expressed as threefold registration
probabilities on the matched analyzer detector, per pump window:

    P11 = p mu eta_i eta_s / 8        teleportation events
    P20 = p mu^2 (1 - eta_i) eta_s / 32   two WCS photons, idler lost
    P02 = p^2 eta_i^2 eta_s / 16      two idler photons

The common signal-path transmission eta_s multiplies every term (it
cancels in the fidelity ratio); detector efficiencies cancel the same way
and are left out.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .exceptions import DomainError
from .qubit import f_max_from_purity, purity_from_fidelity_model


@dataclass(frozen=True)
class NoiseBudget:
    p: float
    mu: float
    eta_i: float
    eta_s: float
    p11: float
    p20: float
    p02: float

    def to_dict(self) -> dict:
        return asdict(self)


def _check_unit(name: str, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"{name}={x} outside [0, 1]")
    return x


def noise_probabilities(
    p: float, mu: float, eta_i: float, eta_s: float, exact_p02: bool = False
) -> NoiseBudget:
    """Evaluate the three-event noise ledger.

    `exact_p02` keeps the (1 - mu - mu^2/2) no-WCS prefactor that the
    leading-order expression drops.
    """
    for name, x in (("p", p), ("mu", mu), ("eta_i", eta_i), ("eta_s", eta_s)):
        _check_unit(name, x)
    p11 = p * mu * eta_i * eta_s / 8.0
    p20 = p * mu * mu * (1.0 - eta_i) * eta_s / 32.0
    p02 = p * p * eta_i * eta_i * eta_s / 16.0
    if exact_p02:
        p02 *= 1.0 - mu - mu * mu / 2.0
    return NoiseBudget(p=p, mu=mu, eta_i=eta_i, eta_s=eta_s, p11=p11, p20=p20, p02=p02)


def predicted_fidelity(budget: NoiseBudget) -> float:
    """F = (P11 + P20 + P02) / (P11 + 2 (P20 + P02)).

    The noise events land half on each analyzer detector, hence the
    factor 2 in the denominator.
    """
    noise = budget.p20 + budget.p02
    denom = budget.p11 + 2.0 * noise
    if denom <= 0.0:
        raise DomainError("zero total threefold probability; fidelity undefined")
    return (budget.p11 + noise) / denom


def predicted_purity(budget: NoiseBudget) -> float:
    return purity_from_fidelity_model(predicted_fidelity(budget))


def predicted_f_max(budget: NoiseBudget) -> float:
    return f_max_from_purity(predicted_purity(budget))


def snr_condition(
    p: float, mu: float, eta_i: float, threshold: float = 10.0
) -> tuple[bool, tuple[float, float]]:
    """Check eta_i >> mu/4 >> p eta_i / 8 with a configurable '>>' factor."""
    for name, x in (("p", p), ("mu", mu), ("eta_i", eta_i)):
        _check_unit(name, x)
    first = eta_i / (mu / 4.0) if mu > 0 else math.inf
    second = (mu / 4.0) / (p * eta_i / 8.0) if p * eta_i > 0 else math.inf
    return (first >= threshold and second >= threshold), (first, second)


def gsi_ideal(p: float) -> float:
    """Signal-idler cross-correlation 1 + 1/p of the ideal pulsed source."""
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p={p} outside (0, 1]")
    return 1.0 + 1.0 / p


def fibre_invariance_check(
    budget: NoiseBudget, eta_fibre: float, arms: str = "both"
) -> tuple[float, float, float]:
    """Fidelity with and without fibre loss, and their difference.

    Equal loss on both beam-splitter arms multiplies each event class by
    eta^2 (every class involves exactly two detections behind the BS), so
    the fidelity ratio is exactly unchanged. The (1 - eta_i) complement in
    P20 refers to the source-side coupling and is held fixed; the residual
    correction from idler photons lost in the fibre itself is O(p mu^2 eta)
    and neglected, as in the printed claim. Loss on the idler arm alone
    scales P11 by eta and P02 by eta^2 and does shift the fidelity.
    """
    if not 0.0 < eta_fibre <= 1.0:
        raise DomainError(f"eta_fibre={eta_fibre} outside (0, 1]")
    f_without = predicted_fidelity(budget)
    if arms == "both":
        scaled = NoiseBudget(
            p=budget.p,
            mu=budget.mu * eta_fibre,
            eta_i=budget.eta_i * eta_fibre,
            eta_s=budget.eta_s,
            p11=budget.p11 * eta_fibre**2,
            p20=budget.p20 * eta_fibre**2,
            p02=budget.p02 * eta_fibre**2,
        )
    elif arms == "idler":
        scaled = NoiseBudget(
            p=budget.p,
            mu=budget.mu,
            eta_i=budget.eta_i * eta_fibre,
            eta_s=budget.eta_s,
            p11=budget.p11 * eta_fibre,
            p20=budget.p20,
            p02=budget.p02 * eta_fibre**2,
        )
    else:
        raise DomainError(f"unknown arms selector {arms!r}")
    f_with = predicted_fidelity(scaled)
    return f_with, f_without, f_with - f_without


def budget_report(budget: NoiseBudget, snr_threshold: float = 10.0) -> dict:
    """JSON-ready summary of the budget and derived predictions."""
    holds, margins = snr_condition(budget.p, budget.mu, budget.eta_i, snr_threshold)
    return {
        **budget.to_dict(),
        "fidelity": predicted_fidelity(budget),
        "purity": predicted_purity(budget),
        "f_max": predicted_f_max(budget),
        "snr_holds": holds,
        "snr_margins": list(margins),
        "gsi_ideal": gsi_ideal(budget.p) if budget.p > 0 else None,
    }


def sweep_budgets(p_values, mu_values, eta_i: float, eta_s: float):
    """Grid of budgets for design-space exploration (CSV rows)."""
    for p in p_values:
        for mu in mu_values:
            budget = noise_probabilities(p, mu, eta_i, eta_s)
            yield {
                "p": p,
                "mu": mu,
                "eta_i": eta_i,
                "eta_s": eta_s,
                "P11": budget.p11,
                "P20": budget.p20,
                "P02": budget.p02,
                "F": predicted_fidelity(budget),
                "P": predicted_purity(budget),
            }
