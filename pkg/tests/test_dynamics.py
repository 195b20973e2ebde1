import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlmemory import dynamics as dyn
from dlmemory import fock
from dlmemory.analysis import fidelity
from dlmemory.controls import ScheduleBuilder, ScheduleError, constant
from dlmemory.ensemble import CouplingParams, dark_state, mixing_angles
from dlmemory.fock import build_space

# scipy expm of the 5x5 block h (g = 1, N = 4, O1 = 1.5, O2 = 0.7), column of p1
SURVIVAL = {0.37: 0.7451590655101977, 1.9: 0.2988711667204541}
COLUMN_037 = np.array([0.74515907, 0.00312224, -0.63901713j, -0.19003792, 0.0164597j])

UNIT = CouplingParams(1.0, 1.0, 1.0)


@pytest.fixture(scope="module")
def space3():
    return build_space(3)


def test_constant_block_survival(space3):
    p = CouplingParams(1.0, 1.0, 4.0)
    sched = constant(1.5, 0.7, 2.0)
    psi0 = space3.basis_vector((1, 0, 0, 0, 0))
    for t, amp in SURVIVAL.items():
        traj = dyn.evolve(space3, p, sched, psi0, 0.0, t, 1e-3)
        assert abs(np.vdot(psi0, traj.final)) == pytest.approx(amp, abs=1e-10)
    traj = dyn.evolve(space3, p, sched, psi0, 0.0, 0.37, 1e-3)
    sector = [space3.index(s) for s in np.eye(5, dtype=int)]
    assert np.allclose(traj.final[sector], COLUMN_037, atol=1e-8)


def test_lift_and_sparse_agree(space3):
    p = CouplingParams(0.8, 1.1, 3.0)
    sched = ScheduleBuilder(2.0, 0.3).ramp(1.0, 0.5, 1.2).ramp(0.6, 1.0, 0.0).build()
    rng = np.random.default_rng(5)
    psi0 = fock.normalize(rng.normal(size=space3.dim) + 1j * rng.normal(size=space3.dim))
    a = dyn.evolve(space3, p, sched, psi0, 0.0, 1.6, 5e-3, samples=5, method="lift")
    b = dyn.evolve(space3, p, sched, psi0, 0.0, 1.6, 5e-3, samples=5, method="sparse")
    assert np.abs(a.states - b.states).max() <= 1e-10
    assert a.norm_drift <= 1e-10 and b.norm_drift <= 1e-10


def test_controls_off_leave_spin_wave_alone(space3):
    sched = ScheduleBuilder(0.0, 0.0).hold(3.0).build()
    psi0 = fock.normalize(space3.basis_vector((0, 0, 0, 2, 0)) + 0.5j * space3.vacuum())
    out = dyn.evolve(space3, UNIT, sched, psi0, 0.0, 3.0, 1e-2).final
    assert np.abs(out - psi0).max() <= 1e-14


def test_dark_state_is_stationary_under_constant_controls():
    space = build_space(5)
    p = CouplingParams(1.0, 1.3, 2.0)
    ang = mixing_angles(p, 0.9, 0.4)
    psi0 = dark_state(space, 3, ang)
    out = dyn.evolve(space, p, constant(0.9, 0.4, 4.0), psi0, 0.0, 4.0, 1e-2).final
    assert fidelity(out, psi0) >= 1 - 1e-12


def test_step_size_and_coverage_errors(space3):
    sched = constant(1.0, 1.0, 1.0)
    psi0 = space3.basis_vector((3, 0, 0, 0, 0))
    for method in ("lift", "sparse"):
        with pytest.raises(dyn.StepSizeError):
            dyn.evolve(space3, UNIT, sched, psi0, 0.0, 1.0, 0.1, method=method)
    with pytest.raises(ScheduleError):
        dyn.evolve(space3, UNIT, sched, psi0, 0.0, 1.5, 1e-3)
    with pytest.raises(ValueError):
        dyn.evolve(space3, UNIT, sched, psi0, 0.0, 1.0, 1e-3, method="rk4")


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 1000))
def test_evolution_is_linear(x, y, seed):
    space = build_space(3)
    rng = np.random.default_rng(seed)
    a, b = (rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim) for _ in range(2))
    sched = ScheduleBuilder(1.0, 0.0).ramp(1.0, 0.2, 0.9).build()
    run = lambda v: dyn.evolve(space, UNIT, sched, v, 0.0, 1.0, 1e-2).final  # noqa: E731
    lhs = run(x * a + y * b)
    assert np.abs(lhs - (x * run(a) + y * run(b))).max() <= 1e-10 * (1 + abs(x) + abs(y)) * 10


def test_excitation_number_conserved():
    space = build_space(6)
    spec = dyn.ProtocolSpec(input="coherent", alpha=0.5, phi_e=0.6, samples=5)
    res = dyn.run_protocol(space, UNIT, spec)
    n_tot = res.occupations.sum(axis=1)
    assert np.abs(n_tot - n_tot[0]).max() <= 1e-10
    assert abs(np.linalg.norm(res.final) - 1) <= 1e-10
    assert res.propagator is not None


@pytest.mark.parametrize("phi_e", [np.pi / 2, 0.0, np.pi / 4])
def test_coherent_storage_and_release(phi_e):
    space = build_space(10)
    spec = dyn.ProtocolSpec(input="coherent", alpha=1.0, phi_e=phi_e, samples=5)
    res = dyn.run_protocol(space, UNIT, spec)
    assert res.fidelity >= 0.99 and res.stored_fidelity >= 0.99
    assert res.dark_population.min() >= dyn.DARK_THRESHOLD
    mean = res.occupations[-1]
    assert mean[0] == pytest.approx(np.cos(phi_e) ** 2 * mean.sum(), abs=0.02)
    assert mean[1] == pytest.approx(np.sin(phi_e) ** 2 * mean.sum(), abs=0.02)


def test_stored_state_sits_in_spin_wave():
    space = build_space(10)
    res = dyn.run_protocol(space, UNIT, dyn.ProtocolSpec(alpha=1.0, samples=3))
    i = space.index((0, 0, 0, 1, 0))
    # stored amplitude of one excitation carries the -1 of the storage map
    want = -1.0 * np.exp(-0.5)
    assert abs(res.stored[i] - want) <= 0.02


def test_cat_release_at_zero_angle_returns_single_mode_cat():
    space = build_space(10)
    spec = dyn.ProtocolSpec(input="cat", alpha=1.0, sign=-1, phi_e=0.0, samples=3)
    res = dyn.run_cat_protocol(space, UNIT, spec)
    want = fock.cat_state(space, 0, 1.0, -1)
    assert fidelity(res.final, want) >= 0.99


def test_vacuum_cat_stays_vacuum():
    space = build_space(4)
    res = dyn.run_cat_protocol(space, UNIT, dyn.ProtocolSpec(input="cat", alpha=0.0, sign=1, samples=3))
    assert fidelity(res.final, space.vacuum()) >= 1 - 1e-12


def test_single_photon_release():
    space = build_space(3)
    res = dyn.run_single_photon(space, UNIT, dyn.ProtocolSpec(input="single-photon", phi_e=np.pi / 4, samples=3))
    want = (space.basis_vector((1, 0, 0, 0, 0)) + space.basis_vector((0, 1, 0, 0, 0))) / np.sqrt(2)
    assert fidelity(res.final, want) >= 0.999


def test_short_ramp_trips_adiabaticity_monitor():
    space = build_space(4)
    spec = dyn.ProtocolSpec(input="single-photon", ramp=2.0, samples=9)
    with pytest.raises(dyn.AdiabaticityError) as err:
        dyn.run_protocol(space, UNIT, spec)
    assert err.value.diagnostics["dark_population"] < dyn.DARK_THRESHOLD
    res = dyn.run_protocol(space, UNIT, spec, monitor=False)
    assert res.fidelity < 0.99


def test_initial_theta_check():
    with pytest.raises(ValueError, match="initial theta"):
        dyn.run_protocol(build_space(2), UNIT, dyn.ProtocolSpec(input="single-photon", omega_max=5.0, omega_knee=1.0))


@pytest.mark.parametrize("kw", [dict(phi_e=2.0), dict(input="squeezed"), dict(sign=0), dict(ramp=-1.0),
                                dict(input_mode=3), dict(fast_fraction=1.0), dict(input="custom")])
def test_protocol_spec_validation(kw):
    with pytest.raises(ValueError):
        dyn.ProtocolSpec(**kw)


def test_ideal_maps_send_input_to_unit_column():
    spec = dyn.ProtocolSpec(phi_e=0.3)
    for stage in ("stored", "released"):
        U = dyn.ideal_map(spec, stage)
        col = U[:, 1]
        assert np.linalg.norm(col) == pytest.approx(1.0)


# ---------------------------------------------------------------- dephasing

def _kraus_dephasing(rho, x):
    """Independent CPTP construction: K0 = diag(x^n), K_n = sqrt(1 - x^2n)|n><n|."""
    n = np.arange(len(rho))
    K = [np.diag(x ** n)] + [np.sqrt(1 - x ** (2 * k)) * np.outer(np.eye(len(rho))[k], np.eye(len(rho))[k])
                              for k in n]
    assert np.allclose(sum(k.conj().T @ k for k in K), np.eye(len(rho)))
    return sum(k @ rho @ k.conj().T for k in K)


def _spin_wave_state(space, amps):
    psi = np.zeros(space.dim, dtype=complex)
    for n, a in enumerate(amps):
        psi[space.index((0, 0, 0, n, 0))] = a
    return fock.normalize(psi)


def test_dephasing_matches_kraus_oracle():
    space = build_space(2)
    psi = _spin_wave_state(space, [0.6, 0.5j, -0.4 + 0.3j])
    p = dyn.DephasingParams(D=0.25, t=2.0)
    out = dyn.apply_motional_dephasing(psi, space, p)
    amps = psi[[space.index((0, 0, 0, n, 0)) for n in range(3)]]
    want = _kraus_dephasing(np.outer(amps, amps.conj()), np.exp(-0.25))
    assert np.allclose(out.rho, want, atol=1e-14)
    assert np.allclose(out.populations, np.abs(amps) ** 2)


def test_dephasing_limits():
    space = build_space(4)
    psi = _spin_wave_state(space, [0.5, 0.5, 0.5, 0.5, 0.5])
    same = dyn.apply_motional_dephasing(psi, space, dyn.DephasingParams(0.0, 3.0))
    assert same.purity == pytest.approx(1.0, abs=1e-12)
    late = dyn.apply_motional_dephasing(psi, space, dyn.DephasingParams(1.0, 1e3))
    assert late.purity == pytest.approx(np.sum(late.populations ** 2), abs=1e-12)
    assert dyn.coherence_sum(late.rho) <= 1e-12
    assert np.trace(late.rho).real == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5))
def test_dephasing_coherences_never_grow(D, t):
    space = build_space(3)
    psi = _spin_wave_state(space, [0.3, 0.4, 0.5, 0.6])
    base = dyn.apply_motional_dephasing(psi, space, dyn.DephasingParams(0.0, 0.0))
    out = dyn.apply_motional_dephasing(psi, space, dyn.DephasingParams(D, t))
    assert dyn.coherence_sum(out.rho) <= dyn.coherence_sum(base.rho) + 1e-12
    assert np.all(np.linalg.eigvalsh(out.rho) >= -1e-12)


def test_dephasing_rejects_unstored_state():
    space = build_space(2)
    with pytest.raises(dyn.StoredFormError):
        dyn.apply_motional_dephasing(space.basis_vector((1, 0, 0, 0, 0)), space, dyn.DephasingParams(1, 1))
    with pytest.raises(ValueError):
        dyn.DephasingParams(-1.0, 1.0)


def test_dephasing_after_storage():
    space = build_space(10)
    res = dyn.run_protocol(space, UNIT, dyn.ProtocolSpec(alpha=1.0, samples=3))
    out = dyn.apply_motional_dephasing(res.stored, space, dyn.DephasingParams(0.1, 2.0), tol=1e-3)
    assert out.purity < 1.0
    assert np.sum(out.populations) == pytest.approx(1.0)
    assert out.factors[0, 1] == pytest.approx(np.exp(-0.1))
