"""Truncated five-mode bosonic Fock space.

Modes are ordered ``(p1, p2, A, C, D)``: the two probe photon modes followed by
the three bosonized collective atomic modes. The space keeps every occupation
vector whose total excitation number is at most the cutoff ``M``; basis states
are ordered lexicographically in the occupation tuple.
"""
from __future__ import annotations

from math import comb, factorial, lgamma, sqrt

import numpy as np
import scipy.sparse as sp

MODES = ("p1", "p2", "A", "C", "D")
N_MODES = len(MODES)
MAX_CUTOFF = 16
LEAKAGE_TOL = 1e-6


class CutoffError(ValueError):
    pass


class LeakageError(ValueError):
    """Raised when a truncated state would lose more norm than allowed."""


def mode_index(mode) -> int:
    """Accept a mode name (``"p1"``, ``"C"``...) or an integer index."""
    if isinstance(mode, str):
        try:
            return MODES.index(mode)
        except ValueError:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}") from None
    i = int(mode)
    if not 0 <= i < N_MODES:
        raise ValueError(f"mode index {mode} out of range")
    return i


def _occupations(cutoff: int, n_modes: int) -> np.ndarray:
    if n_modes == 1:
        return np.arange(cutoff + 1, dtype=np.int64)[:, None]
    blocks = []
    for k in range(cutoff + 1):
        rest = _occupations(cutoff - k, n_modes - 1)
        blocks.append(np.column_stack([np.full(len(rest), k, dtype=np.int64), rest]))
    return np.vstack(blocks)


class FockSpace:
    """Basis bookkeeping and cached ladder operators for a fixed cutoff.

    Instances are treated as immutable; arrays are write-protected and the
    operator cache only ever grows with deterministic content.
    """

    def __init__(self, cutoff: int, n_modes: int = N_MODES):
        self.cutoff = int(cutoff)
        self.n_modes = n_modes
        states = _occupations(self.cutoff, n_modes)
        states.setflags(write=False)
        self.states = states
        self._radix = self.cutoff + 1
        self._weights = self._radix ** np.arange(n_modes - 1, -1, -1, dtype=np.int64)
        codes = states @ self._weights
        codes.setflags(write=False)
        self._codes = codes
        totals = states.sum(axis=1)
        totals.setflags(write=False)
        self.totals = totals
        self._ops: dict = {}

    @property
    def dim(self) -> int:
        return len(self.states)

    def __repr__(self):
        return f"FockSpace(cutoff={self.cutoff}, dim={self.dim})"

    def indices(self, occupations) -> np.ndarray:
        occ = np.atleast_2d(np.asarray(occupations, dtype=np.int64))
        if occ.shape[1] != self.n_modes:
            raise ValueError("occupation vectors must have one entry per mode")
        if (occ < 0).any() or (occ.sum(axis=1) > self.cutoff).any():
            raise KeyError("occupation outside the truncated space")
        codes = occ @ self._weights
        pos = np.searchsorted(self._codes, codes)
        return pos

    def index(self, occupation) -> int:
        return int(self.indices(occupation)[0])

    def state(self, i: int) -> tuple:
        return tuple(int(x) for x in self.states[i])

    def basis_vector(self, occupation) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(occupation)] = 1.0
        return psi

    def vacuum(self) -> np.ndarray:
        return self.basis_vector((0,) * self.n_modes)

    def sector(self, n: int) -> np.ndarray:
        """Indices of basis states with exactly ``n`` excitations."""
        return np.flatnonzero(self.totals == n)

    def lowering(self, mode) -> sp.csr_matrix:
        m = mode_index(mode)
        key = ("lower", m)
        if key not in self._ops:
            cols = np.flatnonzero(self.states[:, m] > 0)
            shifted = np.array(self.states[cols])
            shifted[:, m] -= 1
            rows = self.indices(shifted)
            vals = np.sqrt(self.states[cols, m].astype(float))
            op = sp.csr_matrix((vals.astype(complex), (rows, cols)), shape=(self.dim, self.dim))
            self._ops[key] = op
        return self._ops[key]

    def raising(self, mode) -> sp.csr_matrix:
        m = mode_index(mode)
        key = ("raise", m)
        if key not in self._ops:
            # transpose of the lowering matrix already drops states above the cutoff
            self._ops[key] = self.lowering(m).T.tocsr()
        return self._ops[key]

    def number(self, mode) -> sp.csr_matrix:
        m = mode_index(mode)
        return sp.diags(self.states[:, m].astype(complex), format="csr")

    def total_number(self) -> sp.csr_matrix:
        return sp.diags(self.totals.astype(complex), format="csr")


def build_space(cutoff: int) -> FockSpace:
    """Enumerate all five-mode occupations with total excitation <= ``cutoff``."""
    if isinstance(cutoff, bool) or int(cutoff) != cutoff:
        raise CutoffError(f"cutoff must be an integer, got {cutoff!r}")
    if not 0 <= cutoff <= MAX_CUTOFF:
        raise CutoffError(f"cutoff must lie in [0, {MAX_CUTOFF}], got {cutoff}")
    return FockSpace(int(cutoff))


def expected_dim(cutoff: int, n_modes: int = N_MODES) -> int:
    return comb(cutoff + n_modes, n_modes)


def ladder(space: FockSpace, mode, kind: str) -> sp.csr_matrix:
    if kind in ("lower", "annihilate", "-"):
        return space.lowering(mode)
    if kind in ("raise", "create", "+"):
        return space.raising(mode)
    raise ValueError(f"kind must be 'raise' or 'lower', got {kind!r}")


def dagger(op):
    return op.conj().T.tocsr()


def coherent_amplitudes(alpha: complex, nmax: int) -> np.ndarray:
    """Poissonian amplitudes ``alpha**n exp(-|alpha|^2/2) / sqrt(n!)`` for n <= nmax."""
    alpha = complex(alpha)
    amps = np.empty(nmax + 1, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, nmax + 1):
        amps[n] = amps[n - 1] * alpha / sqrt(n)
    return amps


def poisson_tail(mean: float, nmax: int) -> float:
    """Probability that a Poisson variable with the given mean exceeds ``nmax``."""
    if mean == 0:
        return 0.0
    logs = [k * np.log(mean) - mean - lgamma(k + 1) for k in range(nmax + 1)]
    head = float(np.sum(np.exp(logs)))
    return max(0.0, 1.0 - head)


def normalize(psi: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return psi / norm


def product_coherent(space: FockSpace, alphas, renormalize: bool = True,
                     leakage_tol: float = LEAKAGE_TOL) -> np.ndarray:
    """Multimode coherent state ``|alpha_1> x ... x |alpha_5>`` truncated to the space.

    The total excitation of a product coherent state is Poissonian with mean
    ``sum |alpha_j|^2``, which fixes the truncation leakage.
    """
    alphas = np.asarray(alphas, dtype=complex)
    if alphas.shape != (space.n_modes,):
        raise ValueError("need one coherent amplitude per mode")
    leakage = poisson_tail(float(np.sum(np.abs(alphas) ** 2)), space.cutoff)
    if leakage > leakage_tol:
        raise LeakageError(
            f"cutoff {space.cutoff} loses {leakage:.2e} of the norm for |alpha|^2="
            f"{np.sum(np.abs(alphas) ** 2):.3g} (limit {leakage_tol:g})"
        )
    psi = np.ones(space.dim, dtype=complex)
    for j, a in enumerate(alphas):
        psi *= coherent_amplitudes(a, space.cutoff)[space.states[:, j]]
    return normalize(psi) if renormalize else psi


def coherent_state(space: FockSpace, mode, alpha: complex, renormalize: bool = True,
                   leakage_tol: float = LEAKAGE_TOL) -> np.ndarray:
    alphas = np.zeros(space.n_modes, dtype=complex)
    alphas[mode_index(mode)] = alpha
    return product_coherent(space, alphas, renormalize=renormalize, leakage_tol=leakage_tol)


def cat_norm(alpha: complex, sign: int) -> float:
    """Normalization ``2 +/- 2 exp(-2|alpha|^2)`` of ``|alpha> +/- |-alpha>``."""
    return 2.0 + 2.0 * _sign(sign) * np.exp(-2 * abs(alpha) ** 2)


def _sign(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise ValueError(f"sign must be + or -, got {sign!r}")


def product_cat(space: FockSpace, alphas, sign, leakage_tol: float = LEAKAGE_TOL) -> np.ndarray:
    """``(|alphas> +/- |-alphas>)`` over all modes, truncated and renormalized."""
    s = _sign(sign)
    alphas = np.asarray(alphas, dtype=complex)
    if s < 0 and not np.any(alphas):
        raise ValueError("odd cat with alpha = 0 is the zero vector")
    plus = product_coherent(space, alphas, renormalize=False, leakage_tol=leakage_tol)
    minus = product_coherent(space, -alphas, renormalize=False, leakage_tol=leakage_tol)
    return normalize(plus + s * minus)


def cat_state(space: FockSpace, mode, alpha: complex, sign, leakage_tol: float = LEAKAGE_TOL) -> np.ndarray:
    alphas = np.zeros(space.n_modes, dtype=complex)
    alphas[mode_index(mode)] = alpha
    return product_cat(space, alphas, sign, leakage_tol)


def number_state(space: FockSpace, occupation) -> np.ndarray:
    return space.basis_vector(occupation)


def apply_passive(space: FockSpace, U: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Apply the Fock-space image of a mode transformation to ``psi``.

    Every creation operator is substituted ``a_j^+ -> sum_i U[i, j] a_i^+`` and
    the resulting polynomial is evaluated on the vacuum with a nested Horner
    scheme over the lexicographic basis. Excitation number is preserved, so no
    intermediate vector ever touches the cutoff. ``U`` need not be unitary.
    """
    U = np.asarray(U, dtype=complex)
    B = []
    for j in range(space.n_modes):
        op = sp.csr_matrix((space.dim, space.dim), dtype=complex)
        for i in range(space.n_modes):
            if U[i, j] != 0:
                op = op + U[i, j] * space.raising(i)
        B.append(op.tocsr())
    occ = space.states
    support = np.flatnonzero(psi)
    if support.size == 0:
        return np.zeros(space.dim, dtype=complex)

    def horner(mode: int, idx: np.ndarray):
        if mode == space.n_modes:
            out = np.zeros(space.dim, dtype=complex)
            out[0] = psi[idx[0]]
            return out
        levels = occ[idx, mode]
        acc = None
        for k in range(int(levels.max()), -1, -1):
            if acc is not None:
                acc = B[mode] @ acc / sqrt(k + 1)
            sub = idx[levels == k]
            if sub.size:
                r = horner(mode + 1, sub)
                acc = r if acc is None else acc + r
        return acc

    return horner(0, support)


def photon_distribution(space: FockSpace, psi: np.ndarray, mode) -> np.ndarray:
    m = mode_index(mode)
    probs = np.zeros(space.cutoff + 1)
    np.add.at(probs, space.states[:, m], np.abs(psi) ** 2)
    return probs


def mean_number(space: FockSpace, psi: np.ndarray, mode) -> float:
    m = mode_index(mode)
    return float(np.sum(np.abs(psi) ** 2 * space.states[:, m]))


def fock_norm_factor(occupation) -> float:
    return sqrt(float(np.prod([factorial(int(n)) for n in occupation])))
