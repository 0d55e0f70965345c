"""Inverse engineering of laboratory pulse schedules.

Braiding: a two-level passage is parametrized by a mixing angle theta(t),
a relative phase alpha(t) and a global phase f(theta).  Taking theta and f
as the independent controls removes the parameter singularities; the
remaining quantities are fixed pointwise by

    q(t)      = f'(theta) sin 2theta
    alpha(t)  = pi/2 + arctan q                     (alpha(0) = pi/2 branch)
    Omega(t)  = -|thetadot| sqrt(1 + q^2)           (negative root)
    Delta(t)  = alphadot + 2 f'(theta) thetadot cos 2theta

and the two-photon phase integral int Delta dt accumulates in closed form
for the linear family f = lambda * theta.  The laboratory drives follow by
reading the two-photon coupling backwards through the adiabatic
elimination of the defect's excited state: isotropic envelopes
Omega_1..3 = sqrt(|Omega| / kappa), detunings Delta0 -/+ Delta/2 on the
active pair and a fixed parking detuning on spectators, with the sign of
Omega absorbed into a pi offset of the drive-phase difference.

Chiral transfer: a four-level bright-state cascade frame; with all static
relative phases chosen so the inversion denominators equal one, every
detuning vanishes and the three signed envelopes are Omega_k = -udot_k /
cos(chi) where u(t) is the real passage vector.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (DegenerateScheduleError, SpectatorCollisionError,
                     ValidationError)
from .uqc import AncillaryFrame

LARGE_DETUNING_RATIO = 0.05


def _as_array(t):
    return np.asarray(t, dtype=float)


# ---------------------------------------------------------------------------
# braiding passage parametrization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PassageParams:
    """Independent controls (theta, f) of one two-level passage.

    ``fprime``/``fsecond`` are derivatives of the global phase with respect
    to theta; for the standard error-correcting family f = slope * theta
    they are constant.  theta(t) must be monotone on [0, T].
    """

    T: float
    theta: Callable[[np.ndarray], np.ndarray]
    dtheta: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    fsecond: Callable[[np.ndarray], np.ndarray]
    f_of_theta: Callable[[np.ndarray], np.ndarray]
    slope: float | None = None          # global-phase slope when linear
    theta0: float = 0.0
    theta1: float = np.pi / 2

    # -- derived closed forms ------------------------------------------------
    def q(self, t):
        th = self.theta(t)
        return self.fprime(th) * np.sin(2 * th)

    def alpha(self, t):
        return np.pi / 2 + np.arctan(self.q(t))

    def dalpha(self, t):
        th = self.theta(t)
        thd = self.dtheta(t)
        qd = thd * (self.fsecond(th) * np.sin(2 * th)
                    + 2 * self.fprime(th) * np.cos(2 * th))
        return qd / (1.0 + self.q(t) ** 2)

    def f(self, t):
        th = self.theta(t)
        return self.f_of_theta(th) - self.f_of_theta(np.asarray(self.theta0))

    def rabi(self, t):
        """Signed effective two-photon coupling (negative root)."""
        thd = self.dtheta(t)
        return -np.abs(thd) * np.sqrt(1.0 + self.q(t) ** 2)

    def detuning(self, t):
        th = self.theta(t)
        thd = self.dtheta(t)
        return self.dalpha(t) + 2.0 * self.fprime(th) * thd * np.cos(2 * th)

    def detuning_phase(self, t):
        """Exact int_0^t Delta dt' for the linear global-phase family."""
        if self.slope is None:
            raise ValidationError("closed-form phase needs the linear family; "
                                  "use a tabulated integral for generic f")
        th = self.theta(t)
        th0 = self.theta(np.zeros_like(_as_array(t)))
        a0 = np.pi / 2 + np.arctan(self.slope * np.sin(2 * th0))
        return (self.alpha(t) - a0) + self.slope * (np.sin(2 * th) - np.sin(2 * th0))


def linear_braid_profile(T: float, slope: float = 0.0,
                         theta0: float = 0.0, theta1: float = np.pi / 2) -> PassageParams:
    """Linear ramp theta = theta0 + (theta1-theta0) t/T with f = slope*theta."""
    if T <= 0:
        raise ValidationError("stage duration must be positive")
    rate = (theta1 - theta0) / T
    lam = float(slope)
    return PassageParams(
        T=float(T),
        theta=lambda t: theta0 + rate * _as_array(t),
        dtheta=lambda t: np.full_like(_as_array(t), rate, dtype=float),
        fprime=lambda th: np.full_like(_as_array(th), lam, dtype=float),
        fsecond=lambda th: np.zeros_like(_as_array(th)),
        f_of_theta=lambda th: lam * _as_array(th),
        slope=lam,
        theta0=float(theta0),
        theta1=float(theta1),
    )


@dataclass(frozen=True)
class EffectiveSchedule:
    """Two-photon controls of the reduced braid-plane model.

    ``rabi`` is signed (negative branch by construction); ``phi_jk`` is the
    drive-phase difference of the effective coupling, zero by default.  The
    pair indices are 1-based positions of the braided modes.
    """

    profile: PassageParams
    pair: tuple[int, int] = (1, 2)
    phi_jk: float = 0.0

    @property
    def T(self):
        return self.profile.T

    def rabi(self, t):
        return self.profile.rabi(t)

    def detuning(self, t):
        return self.profile.detuning(t)

    def detuning_phase(self, t):
        return self.profile.detuning_phase(t)

    def hamiltonian(self, t: float) -> np.ndarray:
        """2x2 double-rotated braid-plane Hamiltonian, basis (j, k)."""
        d = float(self.detuning(t))
        w = float(self.rabi(t)) * np.exp(1j * self.phi_jk)
        return np.array([[-d / 2.0, w], [np.conj(w), d / 2.0]])

    def frame(self) -> AncillaryFrame:
        """Ancillary passage frame (mu1, mu2) with analytic derivative."""
        prof = self.profile

        def basis(t):
            th = float(prof.theta(t))
            a = float(prof.alpha(t))
            ep = np.exp(1j * a / 2)
            em = np.exp(-1j * a / 2)
            return np.array([[np.cos(th) * ep, np.sin(th) * ep],
                             [-np.sin(th) * em, np.cos(th) * em]])

        def dbasis(t):
            th = float(prof.theta(t))
            a = float(prof.alpha(t))
            thd = float(prof.dtheta(t))
            ad = float(prof.dalpha(t))
            ep = np.exp(1j * a / 2)
            em = np.exp(-1j * a / 2)
            return np.array([
                [(-thd * np.sin(th) + 0.5j * ad * np.cos(th)) * ep,
                 (thd * np.cos(th) + 0.5j * ad * np.sin(th)) * ep],
                [(-thd * np.cos(th) + 0.5j * ad * np.sin(th)) * em,
                 (-thd * np.sin(th) - 0.5j * ad * np.cos(th)) * em],
            ])

        return AncillaryFrame(basis=basis, dbasis=dbasis, dim=2)


def braid_schedule(profile: PassageParams, pair: tuple[int, int] = (1, 2),
                   phi_jk: float = 0.0) -> EffectiveSchedule:
    """Build the effective two-photon schedule from the passage controls.

    Raises :class:`DegenerateScheduleError` when the coupling vanishes on an
    open interval (thetadot = 0 together with a stalled global phase), which
    would make the inverse map ill-posed.
    """
    probe = np.linspace(0.0, profile.T, 257)
    om = profile.rabi(probe)
    if not np.all(np.isfinite(om)):
        raise DegenerateScheduleError("synthesized coupling is not finite")
    dead = np.abs(om) < 1e-12 * max(np.abs(om).max(), 1e-300)
    if dead.any() and np.any(dead[1:] & dead[:-1]):
        raise DegenerateScheduleError(
            "coupling vanishes on an open interval: degenerate schedule")
    return EffectiveSchedule(profile=profile, pair=pair, phi_jk=phi_jk)


# ---------------------------------------------------------------------------
# laboratory pulse synthesis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DrivenTransition:
    """One defect drive targeting the transition |e> <-> |gamma_label>.

    ``amplitude`` carries the sign of the synthesized coupling; the physical
    Rabi envelope is its magnitude and negative stretches are realized by a
    pi offset on the drive phase (see ``phase_at``).
    """

    label: str
    amplitude: Callable[[np.ndarray], np.ndarray]
    detuning: Callable[[np.ndarray], np.ndarray]
    detuning_phase: Callable[[np.ndarray], np.ndarray]
    phase: float = 0.0

    def rabi_envelope(self, t):
        return np.abs(self.amplitude(t))

    def phase_at(self, t):
        amp = self.amplitude(t)
        return self.phase + np.where(np.asarray(amp) < 0, np.pi, 0.0)


@dataclass(frozen=True)
class LabPulseSet:
    """Per-transition laboratory controls plus the defect parameters.

    ``frame`` records which rotating picture the drive data lives in:
    ``"rotating"`` (defect carrier removed; detunings and their phase
    integrals drive the coupling phases) or ``"double-rotated"`` (all
    detunings absorbed; couplings are bare).
    """

    transitions: tuple[DrivenTransition, ...]
    omega: float
    Delta0: float
    counter_rotating: bool = True
    frame: str = "rotating"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.Delta0 <= 0 or self.omega <= 0:
            raise ValidationError("frequencies must be positive")

    @property
    def n_drives(self) -> int:
        return len(self.transitions)

    def amplitudes(self, ts) -> np.ndarray:
        return np.stack([tr.amplitude(ts) for tr in self.transitions], axis=-1)

    def detunings(self, ts) -> np.ndarray:
        return np.stack([tr.detuning(ts) for tr in self.transitions], axis=-1)

    def detuning_phases(self, ts) -> np.ndarray:
        return np.stack([tr.detuning_phase(ts) for tr in self.transitions], axis=-1)

    @property
    def phases(self) -> np.ndarray:
        return np.array([tr.phase for tr in self.transitions])

    def check_drive_ratio(self, limit: float = LARGE_DETUNING_RATIO):
        ts = np.linspace(0.0, self.meta.get("T", 1.0), 513)
        peak = float(np.abs(self.amplitudes(ts)).max())
        if peak / self.Delta0 > limit:
            warnings.warn(
                f"peak Rabi / Delta0 = {peak / self.Delta0:.3f} exceeds the "
                f"large-detuning budget {limit}", stacklevel=2)
        return peak


def elimination_weight(Delta_j: np.ndarray, Delta_k: np.ndarray,
                       omega: float, counter_rotating: bool) -> np.ndarray:
    """Second-order weight kappa with Omega_eff = kappa * Omega_1^2.

    The co-rotating ladder contributes mean(1/Delta_j, 1/Delta_k); with the
    counter-rotating drive components present, their mutual ladder adds a
    coherent term of opposite sign at the shifted gap 2*omega + Delta.
    """
    k = 0.5 * (1.0 / Delta_j + 1.0 / Delta_k)
    if counter_rotating:
        k = k - 0.5 * (1.0 / (2 * omega + Delta_j) + 1.0 / (2 * omega + Delta_k))
    return k


def spectator_detunings(M: int, Delta0: float, Delta_l: float) -> list[float]:
    """Parking detunings for the M-2 spectator drives: Delta_l, then steps
    of Delta0/2 upward (distinct, safely separated)."""
    return [Delta_l + 0.5 * Delta0 * i for i in range(M - 2)]


def rate_renormalization_coefficient(Delta0: float, parks: Sequence[float],
                                     probe: float = 4e-3) -> float:
    """Relative fourth-order correction of the two-photon rate, per (Omega1/Delta0)^2.

    The isotropically driven star admits a static picture (each mode level
    at its drive detuning, excited level at zero, couplings Omega1).  The
    antisymmetric pair combination decouples exactly, so the realized
    two-photon rate is half the split between it and the dressed symmetric
    state; beyond leading order the dressed energies pick up light-shift
    corrections of relative size c*(Omega1/Delta0)^2.  c is extracted by
    Richardson extrapolation of two exact diagonalizations.
    """
    def rel_corr(x):
        Om = x * Delta0
        dets = [Delta0, Delta0] + list(parks)
        M = len(dets)
        H = np.diag(dets + [0.0]).astype(float)
        H[M, :M] = Om
        H[:M, M] = Om
        evals, evecs = np.linalg.eigh(H)
        sym = np.zeros(M + 1)
        sym[0] = sym[1] = 1 / np.sqrt(2)
        i = int(np.argmax(np.abs(evecs.T @ sym)))
        rate = 0.5 * (Delta0 - evals[i])
        return (abs(rate) / (Om ** 2 / Delta0) - 1.0) / x ** 2

    c1 = rel_corr(probe)
    c2 = rel_corr(probe / 2)
    return float((4.0 * c2 - c1) / 3.0)


def lab_pulses_from_effective(schedule: EffectiveSchedule,
                              Delta0: float,
                              Delta_l: float | None = None,
                              omega: float = 20.0,
                              counter_rotating: bool = True,
                              M: int = 3,
                              phases: Sequence[float] | None = None,
                              allow_strong_drive: bool = False) -> LabPulseSet:
    """Reverse the adiabatic elimination: two-photon schedule -> lab drives.

    All M envelopes are isotropic, Omega_1(t) = sqrt(|Omega(t)| / kappa(t));
    the braided pair sits at Delta0 -/+ Delta(t)/2 and spectators park at
    fixed detunings starting from Delta_l (default 2*Delta0).  The negative
    sign of the synthesized coupling is realized by a pi drive-phase offset
    on the j leg.
    """
    if Delta_l is None:
        Delta_l = 2.0 * Delta0
    j, k = schedule.pair
    if not (1 <= j <= M and 1 <= k <= M and j != k):
        raise ValidationError(f"pair {schedule.pair} invalid for M={M}")
    parks = spectator_detunings(M, Delta0, Delta_l)
    park_iter = iter(parks)

    def kappa(ts):
        d = schedule.detuning(ts)
        return elimination_weight(Delta0 - d / 2, Delta0 + d / 2, omega,
                                  counter_rotating)

    # guard first (with the leading-order envelope): the adiabatic
    # elimination needs every drive far detuned from every other
    probe_ts = np.linspace(0, schedule.T, 257)
    peak_probe = float(np.sqrt(np.abs(schedule.rabi(probe_ts)) / kappa(probe_ts)).max())
    for dl in parks:
        if abs(dl - Delta0) <= 10 * peak_probe:
            raise SpectatorCollisionError(
                f"spectator detuning {dl} collides with the active pair at {Delta0}")

    c4 = rate_renormalization_coefficient(Delta0, parks)

    def envelope(ts):
        base2 = np.abs(schedule.rabi(ts)) / kappa(ts)       # Omega1^2, leading
        return np.sqrt(base2 / (1.0 + c4 * base2 / Delta0 ** 2))

    base_phi = np.pi if schedule.rabi(np.array([schedule.T / 2]))[0] < 0 else 0.0
    transitions = []
    for m in range(1, M + 1):
        if m == j:
            det = lambda ts: Delta0 - schedule.detuning(ts) / 2
            det_ph = lambda ts: Delta0 * _as_array(ts) - schedule.detuning_phase(ts) / 2
            phi = base_phi + schedule.phi_jk
        elif m == k:
            det = lambda ts: Delta0 + schedule.detuning(ts) / 2
            det_ph = lambda ts: Delta0 * _as_array(ts) + schedule.detuning_phase(ts) / 2
            phi = 0.0
        else:
            dl = next(park_iter)
            det = (lambda dl: lambda ts: np.full_like(_as_array(ts), dl))(dl)
            det_ph = (lambda dl: lambda ts: dl * _as_array(ts))(dl)
            phi = 0.0
        transitions.append(DrivenTransition(
            label=f"gamma{m}", amplitude=envelope, detuning=det,
            detuning_phase=det_ph, phase=float(phi)))
    if phases is not None:
        transitions = [DrivenTransition(tr.label, tr.amplitude, tr.detuning,
                                        tr.detuning_phase, float(p))
                       for tr, p in zip(transitions, phases)]
    pulses = LabPulseSet(
        transitions=tuple(transitions), omega=float(omega), Delta0=float(Delta0),
        counter_rotating=counter_rotating, frame="rotating",
        meta={"kind": "braid", "pair": schedule.pair, "T": schedule.T,
              "slope": schedule.profile.slope, "Delta_l": Delta_l,
              "schedule": schedule})
    if not allow_strong_drive:
        pulses.check_drive_ratio()
    return pulses


# ---------------------------------------------------------------------------
# chiral four-level schedules
# ---------------------------------------------------------------------------

def _chi(tloc, T):
    s = np.sin(np.pi * tloc / T)
    return np.pi / 2 * (1.0 + s / (1.0 + s * s))


def _dchi(tloc, T):
    s = np.sin(np.pi * tloc / T)
    c = np.cos(np.pi * tloc / T)
    return np.pi / 2 * (np.pi / T) * c * (1.0 - s * s) / (1.0 + s * s) ** 2


@dataclass(frozen=True)
class ChiralParams:
    """Stagewise population angles of the three-mode chiral loop.

    theta and phi are piecewise-linear in the loop phase
    Phi = pi (t - 3(k-1)T) / (2T); chi dips away from pi/2 inside every
    stage and returns to pi/2 at each boundary, so the passage touches the
    defect's excited state only mid-stage.  alpha1..3 are the static
    relative phases of the frame (zero under the convention that makes all
    inversion denominators one); direction selects the transfer cycle
    gamma1 -> gamma2 -> gamma3 (clockwise) or gamma1 -> gamma3 -> gamma2.
    """

    direction: str
    T: float
    loop_index: int = 1
    alpha1: float = 0.0
    alpha2: float = 0.0
    alpha3: float = 0.0

    def __post_init__(self):
        if self.direction not in ("clockwise", "counterclockwise"):
            raise ValidationError(f"unknown direction {self.direction!r}")
        if self.T <= 0:
            raise ValidationError("stage duration must be positive")
        if self.loop_index < 1:
            raise ValidationError("loop index must be >= 1")

    def _local(self, t):
        tloc = np.mod(_as_array(t) - 3.0 * (self.loop_index - 1) * self.T,
                      3.0 * self.T)
        return tloc

    def angles(self, t):
        """theta, dtheta, phi, dphi, chi, dchi at time t (stage-owned)."""
        tloc = self._local(t)
        T = self.T
        Phi = np.pi * tloc / (2 * T)
        Phid = np.pi / (2 * T)
        stage = np.minimum((tloc // T).astype(int), 2)
        if self.direction == "clockwise":
            theta = np.where(stage == 2, Phi, Phi + np.pi / 2)
            thetad = np.full_like(tloc, Phid)
            phi = np.select([stage == 0, stage == 1, stage == 2],
                            [2 * Phi + np.pi / 2, Phi, Phi])
            phid = np.where(stage == 0, 2 * Phid, Phid)
        else:
            theta = np.where(stage == 0, Phi + np.pi / 2, Phi + np.pi)
            thetad = np.full_like(tloc, Phid)
            phi = np.select([stage == 0, stage == 1, stage == 2],
                            [Phi + np.pi / 2, Phi + np.pi / 2, 2 * Phi - 3 * np.pi / 2])
            phid = np.where(stage == 2, 2 * Phid, Phid)
        return theta, thetad, phi, phid, _chi(tloc, T), _dchi(tloc, T)

    def passage_vector(self, t):
        """Real unit passage vector over (gamma1, gamma2, gamma3, e)."""
        th, _, ph, _, chi, _ = self.angles(t)
        return np.stack([np.sin(chi) * np.sin(ph) * np.sin(th),
                         np.sin(chi) * np.sin(ph) * np.cos(th),
                         np.sin(chi) * np.cos(ph),
                         np.cos(chi)], axis=-1)

    def passage_velocity(self, t):
        th, thd, ph, phd, chi, chid = self.angles(t)
        return np.stack([
            chid * np.cos(chi) * np.sin(ph) * np.sin(th)
            + phd * np.sin(chi) * np.cos(ph) * np.sin(th)
            + thd * np.sin(chi) * np.sin(ph) * np.cos(th),
            chid * np.cos(chi) * np.sin(ph) * np.cos(th)
            + phd * np.sin(chi) * np.cos(ph) * np.cos(th)
            - thd * np.sin(chi) * np.sin(ph) * np.sin(th),
            chid * np.cos(chi) * np.cos(ph) - phd * np.sin(chi) * np.sin(ph),
            -chid * np.sin(chi)], axis=-1)

    def rabi(self, t):
        """Signed envelopes (Omega_1, Omega_2, Omega_3); diverges like the
        inverse distance to a stage boundary, where the passage itself is
        regular (sample strictly inside stages)."""
        u = self.passage_vector(t)
        ud = self.passage_velocity(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -ud[..., :3] / u[..., 3:4]

    def boundary_values(self):
        """(theta, phi, chi) at the stage boundaries 0, T, 2T, 3T (one-sided
        from the incoming stage; 3T wraps to the next loop's entry)."""
        eps = 0.0
        out = {}
        for m, t in enumerate([0.0, self.T, 2 * self.T, 3 * self.T]):
            th, _, ph, _, chi, _ = self.angles(np.asarray(t + eps))
            out[m] = (float(th), float(ph), float(chi))
        return out

    def stage_targets(self) -> list[int]:
        """Mode index (0-based) holding the population at t = T, 2T, 3T."""
        if self.direction == "clockwise":
            return [1, 2, 0]
        return [2, 1, 0]

    def frame(self) -> AncillaryFrame:
        """Complete orthonormal four-level frame (mu1..mu4).

        mu4 is the transfer passage; the normalization of the (mu3, mu4)
        doublet uses matched cos/sin weights on the second bright state and
        the excited state so the frame stays orthonormal for every chi.
        """
        a1, a2, a3 = self.alpha1, self.alpha2, self.alpha3

        def basis(t):
            th, _, ph, _, chi, _ = self.angles(np.asarray(float(t)))
            th, ph, chi = float(th), float(ph), float(chi)
            g1 = np.array([1, 0, 0, 0], complex)
            g2 = np.array([0, 1, 0, 0], complex)
            g3 = np.array([0, 0, 1, 0], complex)
            e = np.array([0, 0, 0, 1], complex)
            b1 = np.sin(th) * g1 + np.cos(th) * np.exp(-1j * a1) * g2
            mu1 = np.cos(th) * g1 - np.sin(th) * np.exp(-1j * a1) * g2
            b2 = np.sin(ph) * b1 + np.cos(ph) * np.exp(-1j * a2) * g3
            mu2 = np.cos(ph) * b1 - np.sin(ph) * np.exp(-1j * a2) * g3
            mu3 = np.cos(chi) * b2 - np.sin(chi) * np.exp(-1j * a3) * e
            mu4 = np.sin(chi) * b2 + np.cos(chi) * np.exp(-1j * a3) * e
            return np.stack([mu1, mu2, mu3, mu4], axis=1)

        return AncillaryFrame(basis=basis, dim=4, fd_step=self.T * 1e-6)


def chiral_schedule(direction: str, loop_index: int = 1, T: float = 1000.0,
                    phase_convention: Sequence[float] | None = None
                    ) -> tuple[ChiralParams, LabPulseSet]:
    """Synthesize the three-drive chiral loop schedule.

    The phase convention fixes the drive phases so every inversion
    denominator equals one: with all frame phases zero that means
    phi_1 = phi_2 = phi_3 = pi/2, i.e. couplings i*Omega_k(t).  The
    returned pulse set lives in the double-rotated frame where every
    detuning vanishes identically.
    """
    params = ChiralParams(direction=direction, T=float(T), loop_index=loop_index)
    phis = (np.pi / 2, np.pi / 2, np.pi / 2) if phase_convention is None \
        else tuple(float(p) for p in phase_convention)
    if any(abs(np.sin(p)) < 1e-12 for p in phis):
        raise DegenerateScheduleError("phase convention makes an inversion "
                                      "denominator vanish")

    def amp_for(idx):
        def amp(ts):
            r = params.rabi(ts)
            return r[..., idx] / np.sin(phis[idx])
        return amp

    zero = lambda ts: np.zeros_like(_as_array(ts))
    transitions = tuple(
        DrivenTransition(label=f"gamma{m+1}", amplitude=amp_for(m),
                         detuning=zero, detuning_phase=zero, phase=phis[m])
        for m in range(3))
    pulses = LabPulseSet(
        transitions=transitions, omega=20.0,
        Delta0=1.0, counter_rotating=False, frame="double-rotated",
        meta={"kind": "chiral", "direction": direction, "T": float(T),
              "loop_index": loop_index, "params": params})
    return params, pulses


# ---------------------------------------------------------------------------
# M-mode scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChiralRing:
    """Per-stage two-mode ring transfer among M modes through the defect."""

    M: int
    T: float
    direction: str = "clockwise"

    def stage_of(self, t):
        tloc = np.mod(_as_array(t), self.M * self.T)
        return np.minimum((tloc // self.T).astype(int), self.M - 1), tloc

    def _hop(self, stage):
        order = (np.arange(self.M) if self.direction == "clockwise"
                 else (-np.arange(self.M)) % self.M)
        return order[stage], order[(stage + 1) % self.M]

    def passage_vector(self, t):
        t1 = np.atleast_1d(_as_array(t))
        stage, tloc = self.stage_of(t1)
        ts = tloc - stage * self.T
        Th = np.pi * ts / (2 * self.T)
        chi = _chi(ts, self.T)
        u = np.zeros(t1.shape + (self.M + 1,))
        src, dst = self._hop(stage)
        rows = np.arange(len(t1))
        u[rows, src] = np.sin(chi) * np.cos(Th)
        u[rows, dst] = np.sin(chi) * np.sin(Th)
        u[rows, self.M] = np.cos(chi)
        return u[0] if np.isscalar(t) or np.ndim(t) == 0 else u

    def rabi(self, t):
        t1 = np.atleast_1d(_as_array(t))
        stage, tloc = self.stage_of(t1)
        ts = tloc - stage * self.T
        Th = np.pi * ts / (2 * self.T)
        Thd = np.pi / (2 * self.T)
        chi, chid = _chi(ts, self.T), _dchi(ts, self.T)
        with np.errstate(divide="ignore", invalid="ignore"):
            tan = np.tan(chi)
            om_src = -(chid * np.cos(Th) - Thd * tan * np.sin(Th))
            om_dst = -(chid * np.sin(Th) + Thd * tan * np.cos(Th))
        out = np.zeros(t1.shape + (self.M,))
        src, dst = self._hop(stage)
        rows = np.arange(len(t1))
        out[rows, src] = om_src
        out[rows, dst] = om_dst
        return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


def scale_to_M_modes(M: int,
                     pair: tuple[int, int] | None = None,
                     chiral: bool = False,
                     schedule: EffectiveSchedule | None = None,
                     T: float = 1000.0,
                     Delta0: float = 1.0,
                     Delta_l: float | None = None,
                     omega: float = 20.0,
                     counter_rotating: bool = True,
                     direction: str = "clockwise") -> LabPulseSet:
    """Scale the construction from 3 defect-coupled modes to M.

    Braiding (``pair`` given): the same isotropic-envelope inversion, with
    the M-2 spectators parked at distinct detunings >= Delta_l spaced by
    Delta0/2.  Chiral (``chiral=True``): the (1+M)-level two-band ring with
    one stage per hop.  M = 3 reproduces the base constructions exactly.
    """
    if M < 3:
        raise ValidationError("mode scaling needs M >= 3")
    if chiral:
        ring = ChiralRing(M=M, T=float(T), direction=direction)

        def amp_for(idx):
            def amp(ts):
                return ring.rabi(ts)[..., idx]
            return amp

        zero = lambda ts: np.zeros_like(_as_array(ts))
        transitions = tuple(
            DrivenTransition(label=f"gamma{m+1}", amplitude=amp_for(m),
                             detuning=zero, detuning_phase=zero, phase=np.pi / 2)
            for m in range(M))
        return LabPulseSet(transitions=transitions, omega=20.0,
                           Delta0=Delta0, counter_rotating=False,
                           frame="double-rotated",
                           meta={"kind": "chiral-ring", "ring": ring, "T": float(T),
                                 "direction": direction})
    if pair is None:
        raise ValidationError("braiding scale-out needs the active pair")
    if schedule is None:
        raise ValidationError("braiding scale-out needs the effective schedule")
    sched = EffectiveSchedule(profile=schedule.profile, pair=pair,
                              phi_jk=schedule.phi_jk)
    return lab_pulses_from_effective(sched, Delta0=Delta0, Delta_l=Delta_l,
                                     omega=omega, counter_rotating=counter_rotating,
                                     M=M)
