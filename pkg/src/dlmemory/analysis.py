"""Fidelities, reduced density matrices and entanglement entropy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import MODES, FockSpace, mode_index, product_cat

EIG_CLIP = 1e-14


def fidelity(psi: np.ndarray, phi: np.ndarray) -> float:
    """|<psi|phi>|^2."""
    psi, phi = np.asarray(psi), np.asarray(phi)
    if psi.shape != phi.shape:
        raise ValueError(f"dimension mismatch: {psi.shape} vs {phi.shape}")
    return float(abs(np.vdot(psi, phi)) ** 2)


@dataclass(frozen=True)
class ReducedDensity:
    """Density matrix over ``modes``, in the basis of ``FockSpace(cutoff, len(modes))``."""

    modes: tuple[int, ...]
    matrix: np.ndarray
    cutoff: int

    @property
    def basis(self) -> FockSpace:
        return FockSpace(self.cutoff, len(self.modes))

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def check(self, trace_tol: float = 1e-10, eig_tol: float = 1e-12) -> None:
        if np.abs(self.matrix - self.matrix.conj().T).max() > 1e-12:
            raise ValueError("reduced density matrix is not Hermitian")
        if abs(self.trace - 1) > trace_tol:
            raise ValueError(f"trace {self.trace} differs from 1")
        if self.eigenvalues().min() < -eig_tol:
            raise ValueError("reduced density matrix has negative eigenvalues")

    def partial_trace(self, drop) -> "ReducedDensity":
        drop = {mode_index(m) for m in np.atleast_1d(drop)}
        if not drop <= set(self.modes):
            raise ValueError("can only trace out modes present in the matrix")
        pos_keep = [k for k, m in enumerate(self.modes) if m not in drop]
        pos_drop = [k for k, m in enumerate(self.modes) if m in drop]
        rows, cols = _split(self.basis.states, pos_keep, pos_drop, self.cutoff)
        n_keep = FockSpace(self.cutoff, len(pos_keep)).dim
        out = np.zeros((n_keep, n_keep), dtype=complex)
        for r in np.unique(cols):
            sel = np.flatnonzero(cols == r)
            out[np.ix_(rows[sel], rows[sel])] += self.matrix[np.ix_(sel, sel)]
        return ReducedDensity(tuple(self.modes[k] for k in pos_keep), out, self.cutoff)

    def populations(self) -> np.ndarray:
        return np.diag(self.matrix).real.copy()


def _split(states, keep, drop, cutoff):
    rows = FockSpace(cutoff, len(keep)).indices(states[:, keep])
    cols = FockSpace(cutoff, len(drop)).indices(states[:, drop]) if drop else np.zeros(len(states), int)
    return rows, cols


def amplitude_matrix(space: FockSpace, psi: np.ndarray, keep) -> tuple[tuple[int, ...], np.ndarray]:
    """Reshape ``psi`` into Psi[kept occupation, complementary occupation]."""
    keep = tuple(sorted({mode_index(m) for m in np.atleast_1d(keep)}))
    if not keep:
        raise ValueError("keep at least one mode")
    drop = [m for m in range(space.n_modes) if m not in keep]
    rows, cols = _split(space.states, list(keep), drop, space.cutoff)
    n_rows = FockSpace(space.cutoff, len(keep)).dim
    n_cols = FockSpace(space.cutoff, len(drop)).dim if drop else 1
    Psi = np.zeros((n_rows, n_cols), dtype=complex)
    Psi[rows, cols] = psi
    return keep, Psi


def reduce(space: FockSpace, psi: np.ndarray, keep) -> ReducedDensity:
    """Partial trace of |psi><psi| over every mode not in ``keep``."""
    keep, Psi = amplitude_matrix(space, psi, keep)
    rho = Psi @ Psi.conj().T
    return ReducedDensity(keep, rho, space.cutoff)


def entanglement_entropy(rho, base=2) -> float:
    """Von Neumann entropy; eigenvalues below 1e-14 are dropped before the log."""
    mat = rho.matrix if isinstance(rho, ReducedDensity) else np.asarray(rho)
    lam = np.linalg.eigvalsh(mat)
    lam = lam[lam > EIG_CLIP]
    log = np.log2 if base == 2 else np.log
    if base not in (2, "e", np.e):
        raise ValueError("base must be 2 or e")
    return float(max(0.0, -np.sum(lam * log(lam))))


def schmidt_coefficients(space: FockSpace, psi: np.ndarray, keep) -> np.ndarray:
    _, Psi = amplitude_matrix(space, psi, keep)
    return np.linalg.svd(Psi, compute_uv=False)


def ecs_state(space: FockSpace, alpha: complex, phi_e: float, sign: int) -> np.ndarray:
    """``|a cos(phi_e), a sin(phi_e)> +/- |-a cos, -a sin>`` on the probe modes, atoms in vacuum."""
    return product_cat(space, [alpha * np.cos(phi_e), alpha * np.sin(phi_e), 0, 0, 0], sign)


def entanglement_vs_release_angle(params, alpha: complex, sign: int, phi_grid, space: FockSpace | None = None,
                                  simulate: bool = False, spec_kw: dict | None = None) -> list[dict]:
    """Entropy of probe mode 1 across release angles.

    With ``simulate`` the full storage/release protocol is run per angle;
    otherwise the ideal released state is used.
    """
    from .dynamics import ProtocolSpec, run_cat_protocol
    from .fock import build_space

    space = space or build_space(12)
    rows = []
    for phi_e in np.asarray(phi_grid, dtype=float):
        if not -1e-12 <= phi_e <= np.pi / 2 + 1e-12:
            raise ValueError(f"release angle {phi_e} outside [0, pi/2]")
        row = {"phi_e": float(phi_e), "alpha_e1": float(np.real(alpha * np.cos(phi_e))),
               "alpha_e2": float(np.real(alpha * np.sin(phi_e)))}
        if sign < 0 and alpha == 0:
            raise ValueError("odd cat needs alpha != 0")
        if simulate:
            spec = ProtocolSpec(input="cat", alpha=alpha, sign=sign, phi_e=float(phi_e), **(spec_kw or {}))
            res = run_cat_protocol(space, params, spec)
            psi = res.final
            row["fidelity"] = res.fidelity
        else:
            psi = ecs_state(space, alpha, phi_e, sign)
        row["entropy"] = entanglement_entropy(reduce(space, psi, [0]))
        rows.append(row)
    return rows


def mode_names(modes) -> list[str]:
    return [MODES[m] for m in modes]
