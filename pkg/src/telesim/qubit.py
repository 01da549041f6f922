"""Polarization-qubit algebra: kets, density matrices, Bloch vectors, Jones calculus.

Basis convention (fixed for the whole package):
    z-axis = {|H>, |V>},  x-axis = {|+>, |->},  y-axis = {|R>, |L>}
with |+> = (|H>+|V>)/sqrt(2) and |R> = (|H>+i|V>)/sqrt(2).
"""
from __future__ import annotations

import numpy as np

from .exceptions import DomainError, InsufficientStatisticsError

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


class PureQubit:
    """Pure polarization state (a_H, a_V), compared up to global phase."""

    __slots__ = ("amps",)

    def __init__(self, a_h: complex, a_v: complex):
        v = np.array([a_h, a_v], dtype=complex)
        n = np.linalg.norm(v)
        if n < 1e-12:
            raise DomainError("pure state amplitudes cannot both be zero")
        # renormalize exactly; reject inputs that are not close to a ray
        self.amps = v / n

    @property
    def a_h(self) -> complex:
        return self.amps[0]

    @property
    def a_v(self) -> complex:
        return self.amps[1]

    def ket(self) -> np.ndarray:
        return self.amps.copy()

    def density(self) -> np.ndarray:
        return np.outer(self.amps, self.amps.conj())

    def orthogonal(self) -> "PureQubit":
        return PureQubit(-np.conj(self.amps[1]), np.conj(self.amps[0]))

    def apply(self, u: np.ndarray) -> "PureQubit":
        w = u @ self.amps
        return PureQubit(w[0], w[1])

    def bloch(self) -> np.ndarray:
        return bloch_from_density(self.density())

    def __eq__(self, other) -> bool:
        if not isinstance(other, PureQubit):
            return NotImplemented
        return abs(abs(np.vdot(self.amps, other.amps)) - 1.0) < 1e-9

    def __hash__(self):
        raise TypeError("PureQubit is compared up to phase and is unhashable")

    def __repr__(self):
        return f"PureQubit({self.amps[0]:.6g}, {self.amps[1]:.6g})"


_NAMED = {
    "H": (1, 0),
    "V": (0, 1),
    "+": (1 / np.sqrt(2), 1 / np.sqrt(2)),
    "-": (1 / np.sqrt(2), -1 / np.sqrt(2)),
    "R": (1 / np.sqrt(2), 1j / np.sqrt(2)),
    "L": (1 / np.sqrt(2), -1j / np.sqrt(2)),
}


def named_state(name: str) -> PureQubit:
    try:
        a_h, a_v = _NAMED[name]
    except KeyError:
        raise DomainError(f"unknown state name {name!r}; expected one of {sorted(_NAMED)}")
    return PureQubit(a_h, a_v)


# (plus, minus) eigenstates of each measurement axis
BASIS_STATES = {
    "Z": ("H", "V"),
    "X": ("+", "-"),
    "Y": ("R", "L"),
}


def basis_states(axis: str) -> tuple[PureQubit, PureQubit]:
    if axis not in BASIS_STATES:
        raise DomainError(f"unknown basis {axis!r}; expected X, Y or Z")
    plus, minus = BASIS_STATES[axis]
    return named_state(plus), named_state(minus)


def validate_density(rho: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DomainError("density matrix must be 2x2")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > atol:
        raise DomainError("density matrix trace differs from 1")
    if np.min(np.linalg.eigvalsh(rho)) < -atol:
        raise DomainError("density matrix has a negative eigenvalue")
    return rho


def density_from_bloch(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise DomainError("Bloch vector must have three components")
    norm = np.linalg.norm(r)
    if norm > 1.0 + 1e-9:
        raise DomainError(f"Bloch vector length {norm:.6g} exceeds 1")
    return 0.5 * (IDENTITY + r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z)


def bloch_from_density(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return np.array(
        [
            np.trace(rho @ SIGMA_X).real,
            np.trace(rho @ SIGMA_Y).real,
            np.trace(rho @ SIGMA_Z).real,
        ]
    )


def fidelity(rho: np.ndarray, psi: PureQubit) -> float:
    """Overlap <psi|rho|psi> of a density matrix with a pure target."""
    f = np.vdot(psi.amps, np.asarray(rho, dtype=complex) @ psi.amps).real
    return float(min(max(f, 0.0), 1.0))


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(np.trace(rho @ rho).real)


def f_max_from_purity(p: float) -> float:
    """Fidelity ceiling (1 + sqrt(2P - 1))/2 for a state of purity P."""
    if p < 0.5 - 1e-12 or p > 1.0 + 1e-12:
        raise DomainError(f"purity {p} outside [0.5, 1]")
    arg = max(2.0 * p - 1.0, 0.0)
    return 0.5 * (1.0 + np.sqrt(arg))


def purity_from_fidelity_model(f: float) -> float:
    """Purity 2F^2 - 2F + 1 of the depolarizing-channel model at fidelity F."""
    if f < -1e-12 or f > 1.0 + 1e-12:
        raise DomainError(f"fidelity {f} outside [0, 1]")
    return 2.0 * f * f - 2.0 * f + 1.0


def fidelity_from_counts(n_target: float, n_orth: float) -> tuple[float, float]:
    """(F, V) from projective counts on the target state and its orthogonal."""
    if n_target < 0 or n_orth < 0:
        raise DomainError("counts must be non-negative")
    total = n_target + n_orth
    if total <= 0:
        raise InsufficientStatisticsError("no counts in either projector")
    v = (n_target - n_orth) / total
    return (1.0 + v) / 2.0, v


def average_fidelity(f_equator, f_pole: float) -> float:
    """Mean fidelity over the Bloch sphere: (2/3) equator average + (1/3) pole."""
    f_equator = list(f_equator)
    if not f_equator:
        raise DomainError("need at least one equator fidelity")
    return (2.0 / 3.0) * float(np.mean(f_equator)) + (1.0 / 3.0) * f_pole


def waveplate_unitary(kind: str, angle: float) -> np.ndarray:
    """Jones matrix of a wave plate with fast axis at `angle` from horizontal."""
    if not np.isfinite(angle):
        raise DomainError("wave-plate angle must be finite")
    c, s = np.cos(angle), np.sin(angle)
    if kind == "HWP":
        c2, s2 = np.cos(2 * angle), np.sin(2 * angle)
        return np.array([[c2, s2], [s2, -c2]], dtype=complex)
    if kind == "QWP":
        return np.exp(-1j * np.pi / 4) * np.array(
            [
                [c * c + 1j * s * s, (1 - 1j) * s * c],
                [(1 - 1j) * s * c, s * s + 1j * c * c],
            ]
        )
    raise DomainError(f"unknown wave plate kind {kind!r}")


def depolarize(psi: PureQubit, v: float) -> np.ndarray:
    """White-noise admixture V |psi><psi| + (1 - V) I/2."""
    if v < 0.0 or v > 1.0 + 1e-12:
        raise DomainError(f"visibility {v} outside [0, 1]")
    return v * psi.density() + (1.0 - v) * 0.5 * IDENTITY
