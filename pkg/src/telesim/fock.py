"""Exact few-photon amplitude engine for the Bell-state measurement.

States are truncated photon-number expansions over labeled modes
(spatial, polarization, temporal bin). The 50/50 beam splitter mixes the
`idler` and `wcs` spatial modes into `bs_out_1` / `bs_out_2`; detector D1
sits behind an H polarizer on output 1, D2 behind a V polarizer on
output 2. Temporal bin 0 is the mode occupied by the WCS photon; partial
overlap xi < 1 puts the idler in a superposition of bin 0 and an
orthogonal bin 1 with weights xi and sqrt(1 - xi^2).

Incoherent mixtures (dephased sources, heralded loss branches) are
represented as lists of (weight, FewPhotonState) pairs; every consumer
here accepts either a single state or such a mixture.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .exceptions import DomainError, NullConditionError, TruncationError
from .qubit import PureQubit

# mode label: (spatial, polarization, temporal_bin)
Mode = tuple

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_AMP_EPS = 1e-30


class FewPhotonState:
    """Sparse map {sorted photon-mode tuple: complex amplitude}."""

    __slots__ = ("terms", "n_max")

    def __init__(self, terms=None, n_max: int = 4):
        self.terms: dict = dict(terms) if terms else {}
        self.n_max = int(n_max)

    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def scaled(self, c: complex) -> "FewPhotonState":
        return FewPhotonState({k: c * a for k, a in self.terms.items()}, self.n_max)

    def __add__(self, other: "FewPhotonState") -> "FewPhotonState":
        out = dict(self.terms)
        for k, a in other.terms.items():
            out[k] = out.get(k, 0.0) + a
        return FewPhotonState(out, max(self.n_max, other.n_max))

    def cleaned(self, eps: float = 1e-15) -> "FewPhotonState":
        return FewPhotonState(
            {k: a for k, a in self.terms.items() if abs(a) > eps}, self.n_max
        )

    def tensor(self, other: "FewPhotonState") -> "FewPhotonState":
        """Product state; terms exceeding n_max total photons are dropped
        (sub-normalized truncation)."""
        mine = set(m for k in self.terms for m in k)
        theirs = set(m for k in other.terms for m in k)
        if mine & theirs:
            raise DomainError("tensor product requires disjoint mode sets")
        out = {}
        for k1, a1 in self.terms.items():
            for k2, a2 in other.terms.items():
                if len(k1) + len(k2) > self.n_max:
                    continue
                key = tuple(sorted(k1 + k2))
                out[key] = out.get(key, 0.0) + a1 * a2
        return FewPhotonState(out, self.n_max)


Mixture = list  # list[(weight, FewPhotonState)]
StateLike = Union[FewPhotonState, Mixture]


def as_mixture(state: StateLike) -> Mixture:
    if isinstance(state, FewPhotonState):
        return [(1.0, state)]
    return list(state)


def vacuum(n_max: int = 4) -> FewPhotonState:
    return FewPhotonState({(): 1.0}, n_max)


def create(state: FewPhotonState, superpos: Sequence) -> FewPhotonState:
    """Apply sum_k c_k a_dagger(mode_k) to the state.

    `superpos` is a sequence of (mode, amplitude) pairs describing one
    photon created in a superposition of modes.
    """
    out = {}
    for key, amp in state.terms.items():
        if len(key) + 1 > state.n_max:
            raise TruncationError(
                f"adding a photon exceeds n_max={state.n_max}"
            )
        for mode, c in superpos:
            if abs(c) < _AMP_EPS:
                continue
            n = key.count(mode)
            nk = tuple(sorted(key + (mode,)))
            out[nk] = out.get(nk, 0.0) + amp * c * math.sqrt(n + 1)
    return FewPhotonState(out, state.n_max)


_BS_SUBST = {
    "idler": lambda pol, tb: (
        (("bs_out_1", pol, tb), _INV_SQRT2),
        (("bs_out_2", pol, tb), _INV_SQRT2),
    ),
    "wcs": lambda pol, tb: (
        (("bs_out_1", pol, tb), _INV_SQRT2),
        (("bs_out_2", pol, tb), -_INV_SQRT2),
    ),
}


def _occ_factorial(key) -> float:
    prod = 1.0
    for n in Counter(key).values():
        prod *= math.factorial(n)
    return prod


def beamsplitter_transform(state: FewPhotonState) -> FewPhotonState:
    """50/50 beam splitter on the idler/wcs inputs, per polarization and bin."""
    out = {}
    for key, amp in state.terms.items():
        # raw creation-operator polynomial, seeded with the basis-state factor
        raw = {(): amp / math.sqrt(_occ_factorial(key))}
        for mode in key:
            spatial, pol, tb = mode
            if spatial in _BS_SUBST:
                subst = _BS_SUBST[spatial](pol, tb)
            else:
                subst = ((mode, 1.0),)
            new_raw = {}
            for mono, coeff in raw.items():
                for m2, c2 in subst:
                    nm = tuple(sorted(mono + (m2,)))
                    new_raw[nm] = new_raw.get(nm, 0.0) + coeff * c2
            raw = new_raw
        for mono, coeff in raw.items():
            if abs(coeff) < _AMP_EPS:
                continue
            a = coeff * math.sqrt(_occ_factorial(mono))
            out[mono] = out.get(mono, 0.0) + a
    return FewPhotonState(out, state.n_max).cleaned()


@dataclass(frozen=True)
class ClickPattern:
    """Detection pattern behind the beam splitter.

    `d1_bins`/`d2_bins`: "any" for a click in any temporal bin, an iterable
    of allowed bins, or None for no requirement on that detector.
    `polarized`: whether the H (D1) / V (D2) polarizers are in place.
    `require_signal`: additionally require >= 1 photon in the signal mode
    (heralded configurations).
    """

    d1_bins: object = "any"
    d2_bins: object = "any"
    polarized: bool = True
    require_signal: bool = False

    def _bins_ok(self, bins_spec, tb) -> bool:
        if bins_spec == "any":
            return True
        return tb in bins_spec

    def matches(self, key) -> bool:
        if self.d1_bins is not None:
            if not any(
                m[0] == "bs_out_1"
                and (not self.polarized or m[1] == "H")
                and self._bins_ok(self.d1_bins, m[2])
                for m in key
            ):
                return False
        if self.d2_bins is not None:
            if not any(
                m[0] == "bs_out_2"
                and (not self.polarized or m[1] == "V")
                and self._bins_ok(self.d2_bins, m[2])
                for m in key
            ):
                return False
        if self.require_signal and not any(m[0] == "signal" for m in key):
            return False
        return True


def click_probability(state: StateLike, pattern: ClickPattern) -> float:
    """Probability that unit-efficiency non-number-resolving detectors
    produce the requested click pattern."""
    prob = 0.0
    for weight, st in as_mixture(state):
        for key, amp in st.terms.items():
            if pattern.matches(key):
                prob += weight * abs(amp) ** 2
    return prob


def conditional_signal_state(state: StateLike, pattern: ClickPattern):
    """(pattern probability, reduced signal polarization state given pattern).

    For terms holding several signal photons the reduced matrix is the
    normalized first-order coherence of the signal mode.
    """
    prob = 0.0
    rho = np.zeros((2, 2), dtype=complex)
    pol_index = {"H": 0, "V": 1}
    for weight, st in as_mixture(state):
        vecs: dict = {}
        for key, amp in st.terms.items():
            if not pattern.matches(key):
                continue
            prob += weight * abs(amp) ** 2
            for mode in set(key):
                if mode[0] != "signal":
                    continue
                n = key.count(mode)
                idx = key.index(mode)
                reduced = key[:idx] + key[idx + 1 :]
                # environment label: everything else plus the bin annihilated
                env = (reduced, mode[2])
                v = vecs.setdefault(env, np.zeros(2, dtype=complex))
                v[pol_index[mode[1]]] += amp * math.sqrt(n)
        for v in vecs.values():
            rho += weight * np.outer(v, v.conj())
    if prob < 1e-24:
        raise NullConditionError("click pattern has zero probability")
    tr = np.trace(rho).real
    if tr < 1e-24:
        raise NullConditionError("no signal photon consistent with pattern")
    return prob, rho / tr


def bsm_correction_unitary(phi: float = 0.0) -> np.ndarray:
    """Unitary applied by the analyzer after a D1&D2 herald.

    Calibrated so that the ideal overlapped teleportation returns the
    input state exactly, for any entanglement phase phi (the phase is
    compensated with the analyzer wave plates).
    """
    swap_flip = np.array([[0, 1], [-1, 0]], dtype=complex)
    comp = np.diag([np.exp(-1j * phi), 1.0])
    return comp @ swap_flip


def _idler_superpos(pol: str, xi: float):
    lam = math.sqrt(max(0.0, 1.0 - xi * xi))
    sup = []
    if xi > 0:
        sup.append((("idler", pol, 0), xi))
    if lam > 0:
        sup.append((("idler", pol, 1), lam))
    return sup


def _pair_operator(state, phi: float, xi: float) -> FewPhotonState:
    """(A_H + e^{i phi} A_V)/sqrt(2) applied to `state`."""
    out = None
    for pol, coeff in (("H", 1.0), ("V", np.exp(1j * phi))):
        st = create(state, _idler_superpos(pol, xi))
        st = create(st, [(("signal", pol, 0), 1.0)])
        st = st.scaled(coeff * _INV_SQRT2)
        out = st if out is None else out + st
    return out


def _wcs_state(mu: float, wcs_pol: PureQubit, n_max: int) -> FewPhotonState:
    if mu < 0 or mu + mu * mu / 2 > 1:
        raise DomainError(f"mu={mu} outside the weak-state regime")
    sup = [(("wcs", "H", 0), wcs_pol.a_h), (("wcs", "V", 0), wcs_pol.a_v)]
    st = vacuum(n_max).scaled(math.sqrt(1.0 - mu - mu * mu / 2.0))
    if mu > 0:
        one = create(vacuum(n_max), sup)
        st = st + one.scaled(math.sqrt(mu))
        st = st + create(one, sup).scaled(mu / 2.0)
    return st


def _pair_state(p: float, phi: float, xi: float, n_max: int) -> FewPhotonState:
    if p < 0 or p + 0.75 * p * p > 1:
        raise DomainError(f"p={p} outside the low-gain regime")
    st = vacuum(n_max).scaled(math.sqrt(1.0 - p - 0.75 * p * p))
    if p > 0:
        one = _pair_operator(vacuum(n_max), phi, xi)
        st = st + one.scaled(math.sqrt(p))
        st = st + _pair_operator(one, phi, xi).scaled(p / 2.0)
    return st


def source_state(
    p: float,
    phi: float,
    v_src: float,
    mu: float,
    wcs_pol: PureQubit,
    overlap: float,
    n_max: int = 4,
) -> Mixture:
    """Joint source + WCS state at the beam-splitter input.

    Returns a mixture: dephasing (v_src < 1) is an incoherent admixture of
    the pair state at phase phi and at phi + pi, with weights (1 +- v)/2.
    Cross terms beyond n_max total photons are dropped (sub-normalized).
    """
    if not 0.0 <= overlap <= 1.0:
        raise DomainError(f"overlap xi={overlap} outside [0, 1]")
    if not 0.0 <= v_src <= 1.0:
        raise DomainError(f"v_src={v_src} outside [0, 1]")
    needed = 4 if p > 0 else (2 if mu > 0 else 0)
    if n_max < needed:
        raise TruncationError(
            f"n_max={n_max} cannot hold the required noise terms ({needed} photons)"
        )
    wcs = _wcs_state(mu, wcs_pol, n_max)
    out = []
    for weight, phase in (((1 + v_src) / 2, phi), ((1 - v_src) / 2, phi + math.pi)):
        if weight < 1e-15:
            continue
        out.append((weight, _pair_state(p, phase, overlap, n_max).tensor(wcs)))
    return out


def _hom_state(p: float, mu: float, xi: float, n_max: int = 4) -> FewPhotonState:
    """Single-polarization (H) pair source plus H-polarized WCS.

    The two-pair amplitude is p/4 * A^2, i.e. branch probability p^2/4,
    mirroring the per-branch norm of the entangled-source expansion.
    """
    if p < 0 or p + p * p / 4 > 1:
        raise DomainError(f"p={p} outside the low-gain regime")
    st = vacuum(n_max).scaled(math.sqrt(1.0 - p - p * p / 4.0))
    if p > 0:
        def a_op(s):
            s = create(s, _idler_superpos("H", xi))
            return create(s, [(("signal", "H", 0), 1.0)])

        one = a_op(vacuum(n_max))
        st = st + one.scaled(math.sqrt(p))
        st = st + a_op(one).scaled(p / 4.0)
    return st.tensor(_wcs_state(mu, PureQubit(1, 0), n_max))


_HOM_PATTERN = ClickPattern(
    d1_bins="any", d2_bins="any", polarized=False, require_signal=True
)


def hom_coincidence_probability(p: float, mu: float, xi: float) -> float:
    """Heralded D1&D2 coincidence probability at overlap xi (no polarizers)."""
    state = beamsplitter_transform(_hom_state(p, mu, xi))
    return click_probability(state, _HOM_PATTERN)


def hom_scan(delta_ts: Iterable[float], tau_i: float, p: float, mu: float):
    """Heralded coincidence probability vs WCS-idler delay, plus visibility.

    Visibility compares the fully distinguishable limit (xi = 0) with the
    fully overlapped point (delta t = 0, xi = 1).
    """
    if tau_i <= 0:
        raise DomainError("tau_i must be positive")
    probs = [
        hom_coincidence_probability(p, mu, math.exp(-abs(dt) / tau_i))
        for dt in delta_ts
    ]
    p_far = hom_coincidence_probability(p, mu, 0.0)
    p_zero = hom_coincidence_probability(p, mu, 1.0)
    if p_far <= 0:
        raise NullConditionError("no coincidences in the distinguishable limit")
    visibility = (p_far - p_zero) / p_far
    return probs, visibility
