"""Bosonized double-Lambda interaction, polariton operators and zero-energy classes.

Everything is quadratic in the mode operators, so each polariton is a linear
combination of the five ladder operators and the Hamiltonian is fixed by a
5x5 single-particle matrix ``h`` via ``V = sum_ij h_ij a_i^+ a_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .fock import FockSpace, normalize

P1, P2, A, C, D = range(5)


@dataclass(frozen=True)
class CouplingParams:
    """Single-atom couplings g1, g2 (rad/s), atom number N, decay Gamma (rad/s)."""

    g1: float
    g2: float
    N: float
    gamma: float = 0.0

    def __post_init__(self):
        if not self.g1 > 0 or not self.g2 > 0:
            raise ValueError("couplings g1, g2 must be positive")
        if not self.N >= 1:
            raise ValueError("atom number N must be >= 1")
        if not self.gamma >= 0:
            raise ValueError("decay rate gamma must be non-negative")

    @property
    def gN1(self) -> float:
        return self.g1 * sqrt(self.N)

    @property
    def gN2(self) -> float:
        return self.g2 * sqrt(self.N)

    @property
    def symmetric(self) -> bool:
        return bool(np.isclose(self.g1, self.g2, rtol=1e-12, atol=0))


@dataclass(frozen=True)
class MixingAngles:
    theta: float
    phi: float

    def __post_init__(self):
        for name in ("theta", "phi"):
            v = getattr(self, name)
            if not -1e-12 <= v <= np.pi / 2 + 1e-12:
                raise ValueError(f"{name}={v} outside [0, pi/2]")


class UndefinedAngleError(ValueError):
    """Both control fields vanish, so the probe-partition angle is undefined."""


def mixing_angles(params: CouplingParams, omega1: float, omega2: float) -> MixingAngles:
    if omega1 < 0 or omega2 < 0:
        raise ValueError("Rabi frequencies must be non-negative")
    if omega1 == 0 and omega2 == 0:
        raise UndefinedAngleError("phi is undefined when both controls are off")
    g1, g2 = params.g1, params.g2
    theta = np.arctan2(params.gN1, np.hypot(omega1, omega2 * g1 / g2))
    phi = np.arctan2(g1 * omega2, g2 * omega1)
    return MixingAngles(float(theta), float(phi))


def single_particle_matrix(params: CouplingParams, omega1: float, omega2: float) -> np.ndarray:
    h = np.zeros((5, 5))
    h[A, P1] = h[P1, A] = params.gN1
    h[A, C] = h[C, A] = omega1
    h[D, P2] = h[P2, D] = params.gN2
    h[D, C] = h[C, D] = omega2
    return h


def quadratic_operator(space: FockSpace, h: np.ndarray) -> sp.csr_matrix:
    """Fock-space operator ``sum_ij h_ij a_i^+ a_j``."""
    op = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for i in range(space.n_modes):
        for j in range(space.n_modes):
            if h[i, j] != 0:
                op = op + h[i, j] * (space.raising(i) @ space.lowering(j))
    return op.tocsr()


def build_hamiltonian(space: FockSpace, params: CouplingParams, omega1: float, omega2: float):
    return quadratic_operator(space, single_particle_matrix(params, omega1, omega2))


def polariton_energies(params: CouplingParams, omega1: float, omega2: float) -> tuple[float, float]:
    """Non-zero single-particle energies (eps1 >= eps2) of the coupling matrix.

    For g1 = g2 = g these are sqrt(g^2 N + Omega1^2 + Omega2^2) and g sqrt(N).
    """
    block = np.array([[params.gN1, 0.0, omega1], [0.0, params.gN2, omega2]])
    s = np.linalg.svd(block, compute_uv=False)
    return float(s[0]), float(s[1])


def mode_operator(space: FockSpace, coeffs) -> sp.csr_matrix:
    """Annihilation operator ``sum_i coeffs[i] a_i``."""
    op = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for i, c in enumerate(coeffs):
        if c != 0:
            op = op + c * space.lowering(i)
    return op.tocsr()


def polariton_vectors(angles: MixingAngles) -> dict[str, np.ndarray]:
    """Mode coefficients of d, b, u, v, s and a = cos(phi) a1 + sin(phi) a2."""
    ct, st = np.cos(angles.theta), np.sin(angles.theta)
    cp, sp_ = np.cos(angles.phi), np.sin(angles.phi)
    vec = {
        "d": [ct * cp, ct * sp_, 0, -st, 0],
        # the C coefficient is cos(theta); with cos(phi) the [V, Q+-^+] relations fail
        "b": [st * cp, st * sp_, 0, ct, 0],
        "u": [0, 0, cp, 0, sp_],
        "v": [0, 0, -sp_, 0, cp],
        "s": [-sp_, cp, 0, 0, 0],
        "a": [cp, sp_, 0, 0, 0],
    }
    return {k: np.array(v, dtype=float) for k, v in vec.items()}


@dataclass(frozen=True)
class PolaritonSet:
    """Polariton annihilation operators; ``Qp``/``Qm``/``Pp``/``Pm`` are the
    annihilators whose adjoints are ``u^+ +/- b^+`` and ``s^+ +/- v^+``."""

    space: FockSpace
    angles: MixingAngles
    d: sp.csr_matrix
    b: sp.csr_matrix
    u: sp.csr_matrix
    v: sp.csr_matrix
    s: sp.csr_matrix
    Qp: sp.csr_matrix
    Qm: sp.csr_matrix
    Pp: sp.csr_matrix
    Pm: sp.csr_matrix
    eps1: float | None = None
    eps2: float | None = None
    params: CouplingParams | None = field(default=None, repr=False)

    def creator(self, name: str) -> sp.csr_matrix:
        return getattr(self, name).conj().T.tocsr()


def polaritons(space: FockSpace, angles: MixingAngles, params: CouplingParams | None = None,
               energies: tuple[float, float] | None = None) -> PolaritonSet:
    vec = polariton_vectors(angles)
    ops = {k: mode_operator(space, v) for k, v in vec.items() if k != "a"}
    e1, e2 = energies if energies is not None else (None, None)
    return PolaritonSet(
        space=space, angles=angles, **ops,
        Qp=(ops["u"] + ops["b"]).tocsr(), Qm=(ops["u"] - ops["b"]).tocsr(),
        Pp=(ops["s"] + ops["v"]).tocsr(), Pm=(ops["s"] - ops["v"]).tocsr(),
        eps1=e1, eps2=e2, params=params,
    )


def polariton_set(space: FockSpace, params: CouplingParams, omega1: float, omega2: float) -> PolaritonSet:
    angles = mixing_angles(params, omega1, omega2)
    return polaritons(space, angles, params, polariton_energies(params, omega1, omega2))


def dark_state(space: FockSpace, n: int, angles: MixingAngles) -> np.ndarray:
    """``(d^+)^n |0> / sqrt(n!)`` for the dark polariton at the given angles."""
    if not 0 <= n <= space.cutoff:
        raise ValueError(f"dark-state excitation {n} exceeds cutoff {space.cutoff}")
    d_dag = mode_operator(space, polariton_vectors(angles)["d"]).conj().T
    psi = space.vacuum()
    for k in range(1, n + 1):
        psi = d_dag @ psi / sqrt(k)
    return psi


def dark_states(space: FockSpace, angles: MixingAngles, nmax: int | None = None) -> list[np.ndarray]:
    nmax = space.cutoff if nmax is None else nmax
    d_dag = mode_operator(space, polariton_vectors(angles)["d"]).conj().T
    out = [space.vacuum()]
    for k in range(1, nmax + 1):
        out.append(d_dag @ out[-1] / sqrt(k))
    return out


class DegeneracyIndex(NamedTuple):
    i: int
    j: int
    k: int
    l: int
    n: int

    @property
    def excitations(self) -> int:
        return self.i + self.j + self.k + self.l + self.n

    @property
    def sector(self) -> tuple[int, int] | None:
        """``(i, k)`` label of a zero-energy class member, ``None`` otherwise."""
        return (self.i, self.k) if self.i == self.j and self.k == self.l else None


def zero_class_index(i: int, k: int, n: int) -> DegeneracyIndex:
    return DegeneracyIndex(i, i, k, k, n)


class ClassState(NamedTuple):
    psi: np.ndarray
    energy: float | None
    index: DegeneracyIndex


def degeneracy_state(space: FockSpace, pset: PolaritonSet, idx) -> ClassState:
    """Normalized ``(Q+^+)^i (Q-^+)^j (P+^+)^k (P-^+)^l |D_n>`` with its eigenvalue."""
    idx = DegeneracyIndex(*idx)
    if min(idx) < 0:
        raise ValueError("degeneracy indices must be non-negative")
    if pset.params is not None and not pset.params.symmetric:
        raise ValueError("the enlarged zero-energy class needs g1 == g2")
    if idx.excitations > space.cutoff - 2:
        raise ValueError(
            f"index {tuple(idx)} needs {idx.excitations} excitations; "
            f"cutoff {space.cutoff} leaves headroom only up to {space.cutoff - 2}"
        )
    psi = dark_state(space, idx.n, pset.angles)
    for name, power in (("Pm", idx.l), ("Pp", idx.k), ("Qm", idx.j), ("Qp", idx.i)):
        if power:
            op = pset.creator(name)
            for _ in range(power):
                psi = op @ psi
    energy = None
    if pset.eps1 is not None:
        energy = (idx.i - idx.j) * pset.eps1 + (idx.k - idx.l) * pset.eps2
    return ClassState(normalize(psi), energy, idx)


def _rotated(pset: PolaritonSet, which: str, delta: float) -> PolaritonSet:
    theta, phi = pset.angles.theta, pset.angles.phi
    if which == "theta":
        theta += delta
    elif which == "phi":
        phi += delta
    else:
        raise ValueError("which must be 'theta' or 'phi'")
    # finite-difference probes may step just outside [0, pi/2]
    angles = object.__new__(MixingAngles)
    object.__setattr__(angles, "theta", theta)
    object.__setattr__(angles, "phi", phi)
    return polaritons(pset.space, angles, pset.params, (pset.eps1, pset.eps2))


def adiabatic_mixing_matrix(space: FockSpace, pset: PolaritonSet, indices, which: str,
                            h: float = 1e-5) -> np.ndarray:
    """``<d(i',k';n')| d/d(angle) |d(i,k;n)>`` by central differences.

    Row index runs over bras, column index over kets, both in the order of
    ``indices``.
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError("finite-difference step must lie in [1e-6, 1e-3]")
    indices = [DegeneracyIndex(*ix) for ix in indices]
    plus, minus = _rotated(pset, which, h), _rotated(pset, which, -h)
    bras = np.array([degeneracy_state(space, pset, ix).psi for ix in indices])
    derivs = np.array([
        (degeneracy_state(space, plus, ix).psi - degeneracy_state(space, minus, ix).psi) / (2 * h)
        for ix in indices
    ])
    return bras.conj() @ derivs.T


