import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import expm

from mzbraid.errors import (GridTooCoarseError, SingularParametrizationError,
                            ValidationError)
from mzbraid.synthesis import braid_schedule, chiral_schedule, linear_braid_profile
from mzbraid.uqc import (AncillaryFrame, check_passage, completeness_residual,
                         correction_margin, evolution_operator, global_phase,
                         rotated_hamiltonian, second_order_infidelity)

T = 200.0


@pytest.fixture(scope="module")
def braid5():
    return braid_schedule(linear_braid_profile(T, slope=5.0))


@pytest.fixture(scope="module")
def braid0():
    return braid_schedule(linear_braid_profile(T, slope=0.0))


def smooth_frame(dim=3, seed=7):
    """Random smooth orthonormal frame from an exponentiated generator."""
    rng = np.random.default_rng(seed)
    G1 = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    G2 = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    G1 = G1 - G1.conj().T
    G2 = G2 - G2.conj().T

    def basis(t):
        return expm(0.3 * np.sin(t) * G1 + 0.2 * np.cos(2 * t) * G2)

    return AncillaryFrame(basis=basis, dim=dim, fd_step=1e-5)


# ---------------------------------------------------------------------------
# rotated decomposition
# ---------------------------------------------------------------------------

def test_static_eigenbasis_gives_diagonal_and_zero_gauge():
    H = np.diag([0.0, 1.0, 3.0]).astype(complex)
    H[0, 1] = H[1, 0] = 0.4
    evals, evecs = np.linalg.eigh(H)
    frame = AncillaryFrame(basis=lambda t: evecs, dim=3,
                           dbasis=lambda t: np.zeros((3, 3), complex))
    dec = rotated_hamiltonian(lambda t: H, frame, 0.3)
    np.testing.assert_allclose(dec.A_gauge, 0, atol=1e-14)
    np.testing.assert_allclose(dec.H_dyn, np.diag(evals), atol=1e-12)
    assert dec.off_diag_residual < 1e-12


def test_braid_frame_satisfies_passage_conditions(braid5):
    frame = braid5.frame()
    worst = 0.0
    for t in np.linspace(0.01 * T, 0.99 * T, 41):
        dec = rotated_hamiltonian(braid5.hamiltonian, frame, t)
        worst = max(worst, dec.off_diag_residual)
    assert worst < 1e-8 * np.abs(braid5.rabi(np.linspace(0, T, 64))).max() / 1e-3
    assert worst < 1e-8


def test_zero_hamiltonian_rotated_equals_minus_gauge_fd_oracle():
    frame = smooth_frame()
    zero = lambda t: np.zeros((3, 3), complex)
    for t in (0.2, 0.9, 2.4):
        dec = rotated_hamiltonian(zero, frame, t)
        # independent plain central-difference oracle
        h = 2e-6
        dV = (frame.basis(t + h) - frame.basis(t - h)) / (2 * h)
        A_oracle = 1j * frame.basis(t).conj().T @ dV
        A_oracle = 0.5 * (A_oracle + A_oracle.conj().T)
        np.testing.assert_allclose(dec.A_gauge, A_oracle, atol=1e-7)
        np.testing.assert_allclose(dec.H_dyn, 0, atol=1e-14)


def test_non_hermitian_rejected():
    frame = smooth_frame()
    bad = lambda t: np.array([[0, 1], [0, 0], ]).astype(complex)
    with pytest.raises(ValidationError):
        rotated_hamiltonian(lambda t: np.array([[0, 1j], [1j, 0]]),
                            smooth_frame(dim=2), 0.1)


def test_frame_completeness_and_orthonormality(braid5):
    frame = braid5.frame()
    ts = np.linspace(0, T, 33)
    frame.validate(ts)
    assert completeness_residual(frame, ts) < 1e-10
    cframe = chiral_schedule("clockwise", T=300.0)[0].frame()
    ts = np.linspace(1.0, 899.0, 31)
    cframe.validate(ts)
    assert completeness_residual(cframe, ts) < 1e-10


# ---------------------------------------------------------------------------
# passage checks
# ---------------------------------------------------------------------------

def test_constant_eigenprojector_has_zero_residual():
    H = np.diag([0.0, 2.0]).astype(complex)
    v = np.array([1.0, 0.0], complex)
    P = np.outer(v, v.conj())
    res = check_passage(lambda t: H, lambda t: P, np.linspace(0, 1, 9))
    assert res < 1e-12


def test_braid_passages_valid(braid5):
    frame = braid5.frame()
    grid = np.linspace(0.02 * T, 0.98 * T, 25)
    for k in (0, 1):
        res = check_passage(braid5.hamiltonian,
                            lambda t, k=k: frame.projector(t, k), grid)
        assert res < 1e-8


def test_chiral_passage_valid_per_stage():
    Tc = 400.0
    params, pulses = chiral_schedule("clockwise", T=Tc)
    frame = params.frame()
    from mzbraid.dynamics import control_model
    model = control_model(pulses)
    for stage in range(3):
        grid = np.linspace(stage * Tc + 0.02 * Tc, (stage + 1) * Tc - 0.02 * Tc, 19)
        res = check_passage(model.matrix, lambda t: frame.projector(t, 3), grid)
        assert res < 1e-6


def test_coarse_derivative_grid_reported_distinctly():
    # fast frame + absurdly large fd step: the residual estimate cannot
    # converge, which must not be mistaken for a passage violation
    sched = braid_schedule(linear_braid_profile(1.0, slope=8.0))
    frame = sched.frame()
    coarse = AncillaryFrame(basis=frame.basis, dim=2, fd_step=0.4)
    with pytest.raises(GridTooCoarseError):
        check_passage(sched.hamiltonian,
                      lambda t: coarse.projector(t, 0),
                      np.linspace(0.3, 0.7, 5), threshold=1e-12)


# ---------------------------------------------------------------------------
# global phases
# ---------------------------------------------------------------------------

def test_flat_relative_phase_gives_zero_global_phase(braid0):
    frame = braid0.frame()
    times = np.linspace(0, T, 81)
    phases = global_phase(frame, braid0.hamiltonian, times)
    np.testing.assert_allclose(phases.f, 0.0, atol=1e-10)


def test_linear_family_accumulates_slope_times_angle(braid5):
    frame = braid5.frame()
    times = np.linspace(0, T, 161)
    phases = global_phase(frame, braid5.hamiltonian, times)
    assert phases.at_end(0) == pytest.approx(5 * np.pi / 2, rel=1e-8)
    assert phases.at_end(1) == pytest.approx(-5 * np.pi / 2, rel=1e-8)


def test_phase_rate_matches_two_level_quadrature_oracle(braid5):
    # independent oracle: integrate Omega cos(alpha)/sin(2 theta) directly
    prof = braid5.profile

    def rate(t):
        th = float(prof.theta(t))
        return float(prof.rabi(t)) * np.cos(float(prof.alpha(t))) / np.sin(2 * th)

    val, _ = quad(rate, 1e-9, T - 1e-9, limit=400)
    frame = braid5.frame()
    times = np.linspace(0, T, 641)
    phases = global_phase(frame, braid5.hamiltonian, times)
    assert phases.at_end(0) == pytest.approx(val, abs=1e-8 * abs(val) + 1e-10)


def test_singular_parametrization_reported():
    frame = smooth_frame(dim=2, seed=3)

    def H_sing(t):
        w = 1.0 / max(t - 1.0, 0.0) if t >= 1.0 else np.inf
        return np.array([[w, 0], [0, -w]], complex)

    with pytest.raises(SingularParametrizationError):
        global_phase(frame, H_sing, np.linspace(0.5, 1.5, 21))


def test_evolution_operator_reconstruction_unitary_and_solves_dynamics(braid5):
    frame = braid5.frame()
    times = np.linspace(0, T, 1281)
    phases = global_phase(frame, braid5.hamiltonian, times)
    # unitarity everywhere
    for idx in (0, len(times) // 3, len(times) - 1):
        U = evolution_operator(frame, phases, idx)
        assert np.linalg.norm(U.conj().T @ U - np.eye(2), ord=2) < 1e-9
    # generator residual || i dU - H U || shrinks under grid refinement
    def residual(n):
        ts = np.linspace(0, T, n)
        ph = global_phase(frame, braid5.hamiltonian, ts)
        worst = 0.0
        for i in range(2, n - 2, max(1, n // 17)):
            dt = ts[1] - ts[0]
            dU = (evolution_operator(frame, ph, i + 1)
                  - evolution_operator(frame, ph, i - 1)) / (2 * dt)
            HU = braid5.hamiltonian(ts[i]) @ evolution_operator(frame, ph, i)
            worst = max(worst, np.linalg.norm(1j * dU - HU, ord=2))
        return worst

    r1, r2 = residual(2561), residual(5121)
    assert r2 < 1e-6
    assert r2 < 0.3 * r1


# ---------------------------------------------------------------------------
# second-order error budget and correction margin
# ---------------------------------------------------------------------------

def _omega_error_generator(schedule):
    """First-order effective defect-frequency error channel: a fractional
    rescaling of the exchange coupling (unit normalization in epsilon)."""
    sx = np.array([[0, 1], [1, 0]], complex)
    return lambda t: float(schedule.rabi(t)) * sx


def test_diagonal_error_has_no_channels(braid5):
    frame = braid5.frame()
    times = np.linspace(0, T, 201)
    phases = global_phase(frame, braid5.hamiltonian, times)

    def H1(t):
        V = frame.basis(t)
        return V @ np.diag([0.3, -0.1]) @ V.conj().T

    budget = second_order_infidelity(H1, frame, phases, k=0)
    assert budget.c2 < 1e-16


@pytest.mark.parametrize("slope,expected", [
    # closed-form channel integrals of the linear family (resonant harmonic
    # at slope 2; boundary-dominated at slope 5)
    (0.0, (np.pi / 2) ** 2),
    (2.0, np.pi ** 2 / 16),
    (5.0, (4.0 / 105.0) ** 2),
])
def test_error_channel_coefficient_closed_forms(slope, expected):
    sched = braid_schedule(linear_braid_profile(T, slope=slope))
    frame = sched.frame()
    times = np.linspace(0, T, 4001)
    phases = global_phase(frame, sched.hamiltonian, times)
    budget = second_order_infidelity(_omega_error_generator(sched), frame,
                                     phases, k=0)
    assert budget.c2 == pytest.approx(expected, rel=2e-4)


def test_rapid_phase_suppresses_error_channel():
    c2 = {}
    for slope in (0.0, 5.0):
        sched = braid_schedule(linear_braid_profile(T, slope=slope))
        frame = sched.frame()
        times = np.linspace(0, T, 4001)
        phases = global_phase(frame, sched.hamiltonian, times)
        c2[slope] = second_order_infidelity(_omega_error_generator(sched),
                                            frame, phases, k=0).c2
    assert c2[5.0] < c2[0.0] / 10


def test_margin_zero_for_static_phase(braid0):
    frame = braid0.frame()
    times = np.linspace(0, T, 201)
    phases = global_phase(frame, braid0.hamiltonian, times)
    margins = correction_margin(frame, phases, _omega_error_generator(braid0))
    assert margins[1] == 0.0


def test_margin_grows_with_slope_and_matches_geometry():
    # pointwise ratio min equals sqrt(1 + slope^2/4) for this family
    vals = {}
    for slope in (2.0, 5.0):
        sched = braid_schedule(linear_braid_profile(T, slope=slope))
        frame = sched.frame()
        times = np.linspace(0, T, 2001)
        phases = global_phase(frame, sched.hamiltonian, times)
        vals[slope] = correction_margin(frame, phases,
                                        _omega_error_generator(sched))[1]
        assert vals[slope] == pytest.approx(np.sqrt(1 + slope ** 2 / 4), rel=0.05)
    assert vals[5.0] > vals[2.0] > 0
    assert vals[5.0] > 1.0


def test_margin_infinite_for_constant_error_element():
    basis = np.eye(2, dtype=complex)
    frame = AncillaryFrame(basis=lambda t: basis, dim=2,
                           dbasis=lambda t: np.zeros((2, 2), complex))
    H = lambda t: np.diag([1.0, -1.0]).astype(complex)
    times = np.linspace(0, 5, 101)
    phases = global_phase(frame, H, times)
    H1 = lambda t: np.array([[0, 0.2], [0.2, 0]], complex)
    margins = correction_margin(frame, phases, H1)
    assert margins[1] == np.inf
