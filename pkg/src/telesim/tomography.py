"""Three-basis linear-inversion tomography of the retrieved qubit.

Counts are threefold totals per analysis basis, split into the plus and
minus analyzer ports (D4 and D3 respectively). The Bloch components are
r_k = (N_+ - N_-)/(N_+ + N_-) for k in X, Y, Z.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    AnalysisError,
    InsufficientStatisticsError,
    MethodInapplicableError,
)
from .qubit import (
    PureQubit,
    bloch_from_density,
    density_from_bloch,
    f_max_from_purity,
    fidelity,
    purity,
)

BASES = ("X", "Y", "Z")


@dataclass
class TomographyResult:
    bloch: np.ndarray
    rho: np.ndarray
    fidelity: float
    purity: float
    f_max: float
    counts: dict
    clipped: bool
    sigmas: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "bloch": [float(x) for x in self.bloch],
            "rho_re": self.rho.real.tolist(),
            "rho_im": self.rho.imag.tolist(),
            "fidelity": self.fidelity,
            "purity": self.purity,
            "f_max": self.f_max,
            "sigmas": self.sigmas,
            "counts": {b: [float(c) for c in self.counts[b]] for b in BASES},
            "clipped": self.clipped,
        }
        return json.dumps(doc, indent=2)


class NormalizedCounts(dict):
    """Counts dict with the efficiency correction already applied."""


def _offdiagonal_totals(log, tau_i: float, span_ns: float, offsets: dict | None):
    """(n_D3, n_D4) threefolds with both delays in +-span and away from
    the diagonal band |delta_j1 - delta_j2| <= 3 tau_i."""
    offsets = offsets or {}
    t1 = np.sort(log.detector_records("D1")[0] - offsets.get("D1", 0.0))
    t2 = np.sort(log.detector_records("D2")[0] - offsets.get("D2", 0.0))
    guard = 3.0 * tau_i
    totals = {}
    for det in ("D3", "D4"):
        tj = log.detector_records(det)[0] - offsets.get(det, 0.0)
        n = 0
        for t in tj:
            lo1, hi1 = np.searchsorted(t1, [t - span_ns, t + span_ns])
            lo2, hi2 = np.searchsorted(t2, [t - span_ns, t + span_ns])
            if hi1 == lo1 or hi2 == lo2:
                continue
            d1 = t - t1[lo1:hi1]
            d2 = t - t2[lo2:hi2]
            n += int(np.sum(np.abs(d1[:, None] - d2[None, :]) > guard))
        totals[det] = n
    return totals["D3"], totals["D4"]


def normalization_factor(
    logs: dict,
    wcs_pol: PureQubit,
    tau_i: float,
    source_hh_weight: float = 0.5,
    span_ns: float = 100.0,
    offsets: dict | None = None,
    balance_tol: float = 0.05,
) -> float:
    """Detection-efficiency ratio eta_D4/eta_D3 from off-diagonal threefolds.

    Off-diagonal (non-interfering) threefolds herald a completely mixed
    signal state, so their D4/D3 count ratio measures the efficiency
    mismatch of the two analyzer detectors. Requires a balanced source
    and an input state with support on both polarizations; for |H>-like
    inputs the off-diagonal heralds are no longer unpolarized and the
    visibility-curve maxima must be used instead.
    """
    aa = abs(wcs_pol.a_h) ** 2
    if min(aa, 1.0 - aa) < 0.05:
        raise MethodInapplicableError(
            "mixed-state normalization needs an input with both polarizations"
        )
    if abs(source_hh_weight - 0.5) > balance_tol:
        raise MethodInapplicableError(
            f"source HH weight {source_hh_weight} too unbalanced for the "
            "mixed-state normalization"
        )
    n3 = n4 = 0
    for log in logs.values():
        a, b = _offdiagonal_totals(log, tau_i, span_ns, offsets)
        n3 += a
        n4 += b
    if n3 == 0 or n4 == 0:
        raise InsufficientStatisticsError("no off-diagonal threefolds to normalize with")
    return n4 / n3


def apply_normalization(counts: dict, factor: float) -> NormalizedCounts:
    """Scale the plus-port (D4) counts by 1/factor. Refuses to run twice."""
    if isinstance(counts, NormalizedCounts):
        raise AnalysisError("counts are already efficiency-normalized")
    if factor <= 0:
        raise AnalysisError(f"normalization factor {factor} must be > 0")
    return NormalizedCounts(
        {b: (n_plus / factor, n_minus) for b, (n_plus, n_minus) in counts.items()}
    )


def reconstruct(counts: dict, input_state: PureQubit) -> TomographyResult:
    """Linear-inversion reconstruction from per-basis (N_plus, N_minus).

    The Bloch vector is clipped to unit length when statistical noise
    pushes it outside the Bloch sphere; the clip is recorded because it
    biases the purity downward.
    """
    r = np.zeros(3)
    for k, basis in enumerate(BASES):
        if basis not in counts:
            raise InsufficientStatisticsError(f"missing counts for basis {basis}")
        n_plus, n_minus = counts[basis]
        total = n_plus + n_minus
        if total < 1:
            raise InsufficientStatisticsError(f"basis {basis} has no counts")
        r[k] = (n_plus - n_minus) / total
    norm = float(np.linalg.norm(r))
    clipped = norm > 1.0
    if clipped:
        r = r / norm
    rho = density_from_bloch(r)
    f = fidelity(rho, input_state)
    p = purity(rho)
    return TomographyResult(
        bloch=bloch_from_density(rho),
        rho=rho,
        fidelity=f,
        purity=p,
        f_max=f_max_from_purity(p),
        counts={b: tuple(counts[b]) for b in BASES},
        clipped=clipped,
    )


def uncertainty(
    counts: dict, input_state: PureQubit, n_resamples: int = 500, seed: int = 0
) -> dict:
    """Poisson-resampled 1-sigma uncertainties of the tomography outputs.

    Each raw count is resampled from a Poisson with the observed mean;
    each resample gets its own derived seed so the estimate is
    deterministic and order-independent.
    """
    if n_resamples < 100:
        raise AnalysisError("need at least 100 resamples for stable sigmas")
    samples = {"bloch": [], "fidelity": [], "purity": [], "f_max": []}
    for i in range(n_resamples):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, i)))
        fake = {
            b: tuple(float(rng.poisson(max(c, 0.0))) for c in counts[b]) for b in BASES
        }
        try:
            res = reconstruct(fake, input_state)
        except InsufficientStatisticsError:
            continue
        samples["bloch"].append(res.bloch)
        samples["fidelity"].append(res.fidelity)
        samples["purity"].append(res.purity)
        samples["f_max"].append(res.f_max)
    if len(samples["fidelity"]) < n_resamples // 2:
        raise InsufficientStatisticsError("too many degenerate resamples")
    return {
        "bloch": [float(s) for s in np.std(np.array(samples["bloch"]), axis=0)],
        "fidelity": float(np.std(samples["fidelity"])),
        "purity": float(np.std(samples["purity"])),
        "f_max": float(np.std(samples["f_max"])),
    }


def counts_from_expectations(weights: dict) -> dict:
    """Adapt engine tomography output {basis: (n_D3, n_D4)} to the
    (N_plus, N_minus) = (D4, D3) convention used here."""
    return {b: (float(w[1]), float(w[0])) for b, w in weights.items()}
