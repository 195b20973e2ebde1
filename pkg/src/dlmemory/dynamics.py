"""Time evolution under the scheduled Hamiltonian and the storage/release protocols.

The Hamiltonian is a quadratic form in the mode operators and conserves the
total excitation number, so the Fock-space propagator is fixed by the 5x5
single-particle propagator ``U``: every creation operator is carried to
``a_j^+ -> sum_i U_ij a_i^+``. The default ``lift`` method accumulates ``U``
with midpoint exponentials (batched over steps) and lifts it once per sample
time. The ``sparse`` method steps the full Fock vector and serves as a check.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from . import fock
from .controls import ControlSchedule, ScheduleBuilder, ScheduleError
from .ensemble import A, C, D, P1, P2, CouplingParams, MixingAngles, dark_states, mixing_angles
from .fock import FockSpace

log = logging.getLogger(__name__)

STEP_LIMIT = 0.1          # max dt * ||V|| per step
DARK_THRESHOLD = 0.9      # adiabaticity monitor abort level
MAX_INITIAL_THETA = 0.05  # storage needs a nearly photonic dark polariton at t0
_CHUNK = 100_000


class StepSizeError(ValueError):
    pass


class AdiabaticityError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class StoredFormError(ValueError):
    pass


# ---------------------------------------------------------------- evolution

def _h_batch(params: CouplingParams, o1: np.ndarray, o2: np.ndarray) -> np.ndarray:
    h = np.zeros((len(o1), 5, 5))
    h[:, A, P1] = h[:, P1, A] = params.gN1
    h[:, A, C] = h[:, C, A] = o1
    h[:, D, P2] = h[:, P2, D] = params.gN2
    h[:, D, C] = h[:, C, D] = o2
    return h


def excitation_reach(space: FockSpace, psi: np.ndarray) -> int:
    """Largest total excitation carried by ``psi``; V never leaves these sectors."""
    support = np.flatnonzero(psi)
    return int(space.totals[support].max()) if support.size else 0


def hamiltonian_norm(params: CouplingParams, omega1, omega2, n_exc: int):
    """Spectral norm of V on sectors with at most ``n_exc`` excitations.

    On the n-excitation sector the eigenvalues of V are sums of n single-particle
    eigenvalues, and the single-particle spectrum is symmetric about zero, so the
    norm is ``n_exc`` times the spectral radius of ``h``.
    """
    o1, o2 = np.atleast_1d(omega1), np.atleast_1d(omega2)
    w = np.linalg.eigvalsh(_h_batch(params, o1, o2))
    return n_exc * np.abs(w).max(axis=-1)


def _tree_product(Us: np.ndarray) -> np.ndarray:
    """``Us[-1] @ ... @ Us[0]`` by pairwise reduction."""
    while len(Us) > 1:
        if len(Us) % 2:
            Us = np.concatenate([Us, np.eye(Us.shape[-1])[None]], axis=0)
        Us = Us[1::2] @ Us[0::2]
    return Us[0]


def single_particle_propagator(params, schedule, t0, t1, n_steps, n_exc=None):
    """Product of midpoint exponentials ``exp(-i h(t_mid) dt)`` over [t0, t1]."""
    U = np.eye(5, dtype=complex)
    if n_steps == 0:
        return U
    dt = (t1 - t0) / n_steps
    for start in range(0, n_steps, _CHUNK):
        k = np.arange(start, min(n_steps, start + _CHUNK))
        o1, o2 = schedule(t0 + (k + 0.5) * dt)
        w, v = np.linalg.eigh(_h_batch(params, o1, o2))
        if n_exc is not None:
            worst = n_exc * np.abs(w).max() * abs(dt)
            if worst > STEP_LIMIT * (1 + 1e-9):
                raise StepSizeError(f"dt*||V|| = {worst:.3g} exceeds {STEP_LIMIT}")
        Us = (v * np.exp(-1j * w * dt)[:, None, :]) @ np.conj(np.swapaxes(v, 1, 2))
        U = _tree_product(Us) @ U
    return U


class _SparseStepper:
    def __init__(self, space: FockSpace, params: CouplingParams):
        def bil(i, j):
            op = space.raising(i) @ space.lowering(j)
            return (op + op.T).tocsr()
        self.static = (params.gN1 * bil(A, P1) + params.gN2 * bil(D, P2)).tocsr()
        self.k1 = bil(A, C)
        self.k2 = bil(D, C)

    def step(self, psi, o1, o2, dt):
        V = self.static + o1 * self.k1 + o2 * self.k2
        return expm_multiply(-1j * dt * V, psi)


def _lifted_propagators(params, schedule, times, dt, n_exc):
    """Cumulative single-particle propagators from times[0] to each sample time."""
    props = np.empty((len(times), 5, 5), dtype=complex)
    props[0] = np.eye(5)
    total = 0
    for k in range(1, len(times)):
        n = _steps_for(times[k] - times[k - 1], dt) if times[k] > times[k - 1] else 0
        props[k] = single_particle_propagator(params, schedule, times[k - 1], times[k], n, n_exc) @ props[k - 1]
        total += n
    return props, total


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    propagators: np.ndarray | None = None
    n_steps: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))


def _steps_for(interval: float, dt: float) -> int:
    return max(1, int(np.ceil(interval / dt - 1e-9)))


def evolve(space: FockSpace, params: CouplingParams, schedule: ControlSchedule, psi0: np.ndarray,
           t0: float, t1: float, dt: float, samples: int = 2, method: str = "lift") -> Trajectory:
    """Integrate ``i d psi/dt = V(t) psi`` from t0 to t1.

    Each sample interval is split into equal steps no longer than ``dt``; each
    step applies the exact exponential of the midpoint Hamiltonian.
    """
    if not t1 >= t0:
        raise ValueError("t1 must not precede t0")
    if not schedule.covers(t0, t1):
        raise ScheduleError([f"schedule [{schedule.t_start}, {schedule.t_end}] does not cover [{t0}, {t1}]"])
    if samples < 2:
        raise ValueError("need at least two samples (start and end)")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if method not in ("lift", "sparse"):
        raise ValueError(f"unknown method {method!r}")
    psi0 = np.asarray(psi0, dtype=complex)
    n_exc = excitation_reach(space, psi0)
    times = np.linspace(t0, t1, samples)
    states = np.empty((samples, space.dim), dtype=complex)
    states[0] = psi0
    total_steps = 0
    if method == "lift":
        props, total_steps = _lifted_propagators(params, schedule, times, dt, n_exc)
        for k in range(1, samples):
            states[k] = fock.apply_passive(space, props[k], psi0)
        return Trajectory(times, states, props, total_steps)
    stepper = _SparseStepper(space, params)
    psi = psi0.copy()
    for k in range(1, samples):
        if times[k] > times[k - 1]:
            n = _steps_for(times[k] - times[k - 1], dt)
            h = (times[k] - times[k - 1]) / n
            mids = times[k - 1] + (np.arange(n) + 0.5) * h
            o1, o2 = schedule(mids)
            worst = float(hamiltonian_norm(params, o1, o2, n_exc).max()) * h
            if worst > STEP_LIMIT * (1 + 1e-9):
                raise StepSizeError(f"dt*||V|| = {worst:.3g} exceeds {STEP_LIMIT}")
            for a, b in zip(o1, o2):
                psi = stepper.step(psi, a, b, h)
            total_steps += n
        states[k] = psi
    return Trajectory(times, states, None, total_steps)


def stable_dt(params: CouplingParams, schedule: ControlSchedule, t0: float, t1: float,
              n_exc: int, dt_max: float, probes: int = 513) -> float:
    """Largest step not above ``dt_max`` meeting the step limit on [t0, t1]."""
    o1, o2 = schedule(np.linspace(t0, t1, probes))
    norm = float(hamiltonian_norm(params, o1, o2, max(n_exc, 1)).max())
    # 2% margin covers the norm between probe points
    return min(dt_max, 0.98 * STEP_LIMIT / norm) if norm > 0 else dt_max


# ------------------------------------------------------------------ angles

def angle_track(params: CouplingParams, schedule: ControlSchedule, times) -> tuple[np.ndarray, np.ndarray]:
    """theta(t), phi(t) along a schedule; phi keeps its last defined value while
    both controls are off (theta is then pi/2)."""
    o1, o2 = schedule(np.asarray(times, dtype=float))
    theta = np.empty(len(o1))
    phi = np.empty(len(o1))
    last_phi = None
    for k, (a, b) in enumerate(zip(o1, o2)):
        if a == 0 and b == 0:
            if last_phi is None:
                raise ValueError("phi is undefined: schedule starts with both controls off")
            theta[k], phi[k] = np.pi / 2, last_phi
        else:
            ang = mixing_angles(params, a, b)
            theta[k], phi[k] = ang.theta, ang.phi
            last_phi = ang.phi
    return theta, phi


def dark_population(space: FockSpace, psi: np.ndarray, angles: MixingAngles, nmax: int | None = None) -> float:
    """Weight of ``psi`` on the dark-state family {|D_n>}."""
    return float(sum(abs(np.vdot(d, psi)) ** 2 for d in dark_states(space, angles, nmax)))


# ---------------------------------------------------------------- protocols

INPUT_KINDS = ("coherent", "cat", "single-photon", "custom")


@dataclass(frozen=True)
class ProtocolSpec:
    """Storage/release run. Durations are in seconds; ``None`` picks a default
    in units of ``1/(g sqrt N)`` (ramp 80, hold 5, step 1e-3) and rates in units
    of ``g sqrt N`` (peak control 100, knee 3).

    Each ramp is two raised-cosine pieces: a fast one between the peak and the
    knee lasting ``fast_fraction * ramp``, and a slow one between the knee and
    zero for the rest.
    """

    input: str = "coherent"
    alpha: complex = 1.0
    sign: int = 1
    input_mode: int = 2
    phi_e: float = np.pi / 4
    ramp: float | None = None
    hold: float | None = None
    dt: float | None = None
    omega_max: float | None = None
    omega_knee: float | None = None
    fast_fraction: float = 0.25
    samples: int = 9
    custom_state: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        problems = []
        if self.input not in INPUT_KINDS:
            problems.append(f"input must be one of {INPUT_KINDS}")
        if self.input_mode not in (1, 2):
            problems.append("input_mode must be 1 or 2")
        if not -1e-12 <= self.phi_e <= np.pi / 2 + 1e-12:
            problems.append(f"phi_e={self.phi_e} outside [0, pi/2]")
        if self.sign not in (1, -1):
            problems.append("sign must be +1 or -1")
        if not 0 < self.fast_fraction < 1:
            problems.append("fast_fraction must lie in (0, 1)")
        for name in ("ramp", "hold", "dt", "omega_max", "omega_knee"):
            v = getattr(self, name)
            if v is not None and not v > 0 and not (name == "hold" and v == 0):
                problems.append(f"{name} must be positive")
        if self.input == "custom" and self.custom_state is None:
            problems.append("custom input needs custom_state")
        if self.samples < 2:
            problems.append("samples must be >= 2")
        if problems:
            raise ValueError("; ".join(problems))

    def resolved(self, params: CouplingParams) -> dict:
        gn = min(params.gN1, params.gN2)
        out = {
            "ramp": self.ramp if self.ramp is not None else 80.0 / gn,
            "hold": self.hold if self.hold is not None else 5.0 / gn,
            "dt": self.dt if self.dt is not None else 1e-3 / gn,
            "omega_max": self.omega_max if self.omega_max is not None else 100.0 * gn,
            "omega_knee": self.omega_knee if self.omega_knee is not None else 3.0 * gn,
        }
        if not out["omega_knee"] < out["omega_max"]:
            raise ValueError("omega_knee must be below omega_max")
        return out


def _control_pair(params: CouplingParams, omega: float, mode: int, phi: float | None = None):
    """Controls with effective strength ``omega`` steering phi to the target.

    ``Omega2 = Omega_eff (g2/g1) sin(phi)`` keeps tan(theta) = g1 sqrt(N) / Omega_eff.
    """
    r = params.g2 / params.g1
    if phi is None:
        return (omega, 0.0) if mode == 1 else (0.0, omega * r)
    return omega * np.cos(phi), omega * r * np.sin(phi)


def storage_release_schedule(params: CouplingParams, spec: ProtocolSpec, t0: float = 0.0) -> ControlSchedule:
    cfg = spec.resolved(params)
    fast = spec.fast_fraction * cfg["ramp"]
    slow = cfg["ramp"] - fast
    o_start = _control_pair(params, cfg["omega_max"], spec.input_mode)
    o_knee = _control_pair(params, cfg["omega_knee"], spec.input_mode)
    r_knee = _control_pair(params, cfg["omega_knee"], spec.input_mode, spec.phi_e)
    r_end = _control_pair(params, cfg["omega_max"], spec.input_mode, spec.phi_e)
    b = ScheduleBuilder(*o_start, t0=t0).ramp(fast, *o_knee).ramp(slow, 0.0, 0.0)
    if cfg["hold"] > 0:
        b.hold(cfg["hold"])
    return b.ramp(slow, *r_knee).ramp(fast, *r_end).build()


def input_state(space: FockSpace, spec: ProtocolSpec) -> np.ndarray:
    mode = P1 if spec.input_mode == 1 else P2
    if spec.input == "coherent":
        return fock.coherent_state(space, mode, spec.alpha)
    if spec.input == "cat":
        return fock.cat_state(space, mode, spec.alpha, spec.sign)
    if spec.input == "single-photon":
        occ = [0] * 5
        occ[mode] = 1
        return fock.number_state(space, occ)
    psi = np.asarray(spec.custom_state, dtype=complex)
    if psi.shape != (space.dim,):
        raise ValueError("custom_state has the wrong dimension")
    return fock.normalize(psi)


def ideal_map(spec: ProtocolSpec, stage: str) -> np.ndarray:
    """Mode map of perfect storage (input -> -C) or release (input -> cos a1 + sin a2)."""
    U = np.eye(5, dtype=complex)
    j = P1 if spec.input_mode == 1 else P2
    U[:, j] = 0
    if stage == "stored":
        U[C, j] = -1.0
    elif stage == "released":
        U[P1, j] = np.cos(spec.phi_e)
        U[P2, j] = np.sin(spec.phi_e)
    else:
        raise ValueError("stage must be 'stored' or 'released'")
    return U


def target_states(space: FockSpace, spec: ProtocolSpec, psi0: np.ndarray | None = None):
    """Ideal stored and released states for the protocol input."""
    psi0 = input_state(space, spec) if psi0 is None else psi0
    return (fock.apply_passive(space, ideal_map(spec, "stored"), psi0),
            fock.apply_passive(space, ideal_map(spec, "released"), psi0))


def _fid(a, b) -> float:
    return float(abs(np.vdot(a, b)) ** 2)


@dataclass
class ProtocolResult:
    final: np.ndarray
    stored: np.ndarray
    target: np.ndarray
    stored_target: np.ndarray
    fidelity: float
    stored_fidelity: float
    times: np.ndarray
    dark_population: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    schedule: ControlSchedule
    n_steps: int
    propagator: np.ndarray | None = None
    occupations: np.ndarray | None = None   # mean number per mode at each sample

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity

    def diagnostics(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "stored_fidelity": self.stored_fidelity,
            "min_dark_population": float(self.dark_population.min()),
            "n_steps": self.n_steps,
            "norm_final": float(np.linalg.norm(self.final)),
        }


def run_protocol(space: FockSpace, params: CouplingParams, spec: ProtocolSpec, method: str = "lift",
                 monitor: bool = True) -> ProtocolResult:
    """Store the input in the C spin wave, hold, and release it at angle phi_e."""
    schedule = storage_release_schedule(params, spec)
    cfg = spec.resolved(params)
    theta0 = mixing_angles(params, *schedule(schedule.t_start)).theta
    if theta0 > MAX_INITIAL_THETA:
        raise ValueError(f"initial theta {theta0:.3g} rad exceeds {MAX_INITIAL_THETA}; raise omega_max")
    psi0 = input_state(space, spec)
    stored_target, target = target_states(space, spec, psi0)
    n_exc = excitation_reach(space, psi0)

    times, states = [schedule.t_start], [psi0]
    psi, U, n_steps = psi0, np.eye(5, dtype=complex), 0
    stored = None
    for seg in schedule.segments:
        dt = stable_dt(params, schedule, seg.t_start, seg.t_end, n_exc, cfg["dt"])
        if method == "lift":
            # lift from the (sparse) input rather than the dense running state
            seg_times = np.linspace(seg.t_start, seg.t_end, spec.samples)
            props, n = _lifted_propagators(params, schedule, seg_times, dt, n_exc)
            seg_states = [fock.apply_passive(space, p @ U, psi0) for p in props[1:]]
            U = props[-1] @ U
        else:
            traj = evolve(space, params, schedule, psi, seg.t_start, seg.t_end, dt, spec.samples, method)
            seg_times, seg_states, n = traj.times, list(traj.states[1:]), traj.n_steps
        times.extend(seg_times[1:])
        states.extend(seg_states)
        psi = states[-1]
        n_steps += n
        if max(seg.omega1[1], seg.omega2[1]) == 0 and stored is None:
            stored = psi
    times = np.array(times)
    theta, phi = angle_track(params, schedule, times)
    dark = np.array([
        dark_population(space, s, MixingAngles(min(th, np.pi / 2), ph), n_exc)
        for s, th, ph in zip(states, theta, phi)
    ])
    result = ProtocolResult(
        final=psi, stored=stored, target=target, stored_target=stored_target,
        fidelity=_fid(target, psi), stored_fidelity=_fid(stored_target, stored),
        times=times, dark_population=dark, theta=theta, phi=phi, schedule=schedule,
        n_steps=n_steps, propagator=U if method == "lift" else None,
        occupations=np.array([np.abs(s) ** 2 @ space.states for s in states]),
    )
    if monitor and dark.min() < DARK_THRESHOLD:
        k = int(np.argmin(dark))
        raise AdiabaticityError(
            f"dark-state population fell to {dark[k]:.3f} at t={times[k]:.3g} s "
            f"(theta={theta[k]:.3f}, phi={phi[k]:.3f}); lengthen the ramps",
            {"time": float(times[k]), "dark_population": float(dark[k]), "result": result},
        )
    log.debug("protocol %s phi_e=%.4f fidelity=%.6f steps=%d", spec.input, spec.phi_e, result.fidelity, n_steps)
    return result


def run_storage_release(space: FockSpace, params: CouplingParams, spec: ProtocolSpec, **kw) -> ProtocolResult:
    return run_protocol(space, params, spec, **kw)


def run_cat_protocol(space: FockSpace, params: CouplingParams, spec: ProtocolSpec, **kw) -> ProtocolResult:
    """Cat input; the released target is the entangled coherent state
    ``|a cos, a sin> +/- |-a cos, -a sin>`` (normalized)."""
    if spec.input != "cat":
        raise ValueError("run_cat_protocol needs a cat input")
    return run_protocol(space, params, spec, **kw)


def run_single_photon(space: FockSpace, params: CouplingParams, spec: ProtocolSpec, **kw) -> ProtocolResult:
    if spec.input != "single-photon":
        raise ValueError("run_single_photon needs a single-photon input")
    return run_protocol(space, params, spec, **kw)


def ecs_target(space: FockSpace, alpha: complex, phi_e: float, sign: int) -> np.ndarray:
    return fock.product_cat(space, [alpha * np.cos(phi_e), alpha * np.sin(phi_e), 0, 0, 0], sign)


def mes_target(space: FockSpace, alpha: complex) -> np.ndarray:
    """Odd two-mode cat at equal amplitudes alpha/sqrt(2)."""
    return ecs_target(space, alpha, np.pi / 4, -1)


# ---------------------------------------------------------------- dephasing

@dataclass(frozen=True)
class DephasingParams:
    D: float
    t: float

    def __post_init__(self):
        if not self.D >= 0 or not self.t >= 0:
            raise ValueError("diffusion rate D and exposure time t must be non-negative")


@dataclass
class DephasedState:
    rho: np.ndarray
    populations: np.ndarray
    purity: float
    factors: np.ndarray


def stored_amplitudes(space: FockSpace, psi: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Amplitudes on |c^n> of a state whose excitations all sit in mode C."""
    others = np.delete(space.states, C, axis=1).sum(axis=1) > 0
    outside = float(np.sum(np.abs(psi[others]) ** 2))
    if outside > tol:
        raise StoredFormError(f"population {outside:.2e} outside mode C exceeds {tol:g}")
    amps = np.zeros(space.cutoff + 1, dtype=complex)
    only_c = ~others
    amps[space.states[only_c, C]] = psi[only_c]
    return amps


def dephasing_factors(nmax: int, p: DephasingParams) -> np.ndarray:
    """Schur multiplier F with F_nm = exp(-(n+m) D t / 2) off the diagonal, 1 on it."""
    x = np.exp(-np.arange(nmax + 1) * p.D * p.t / 2)
    F = np.outer(x, x)
    np.fill_diagonal(F, 1.0)
    return F


def apply_motional_dephasing(psi: np.ndarray, space: FockSpace, p: DephasingParams,
                             tol: float = 1e-6) -> DephasedState:
    amps = stored_amplitudes(space, psi, tol)
    rho_pure = np.outer(amps, amps.conj())
    rho_pure /= np.trace(rho_pure).real
    F = dephasing_factors(space.cutoff, p)
    rho = F * rho_pure
    return DephasedState(rho=rho, populations=np.diag(rho).real.copy(),
                         purity=float(np.real(np.trace(rho @ rho))), factors=F)


def coherence_sum(rho: np.ndarray) -> float:
    """Sum of |rho_nm| over n != m."""
    return float(np.abs(rho).sum() - np.abs(np.diag(rho)).sum())


def fock_sparse(space: FockSpace, params: CouplingParams, omega1: float, omega2: float) -> sp.csr_matrix:
    """Fock-space Hamiltonian from the same pieces the sparse stepper uses."""
    st = _SparseStepper(space, params)
    return (st.static + omega1 * st.k1 + omega2 * st.k2).tocsr()

