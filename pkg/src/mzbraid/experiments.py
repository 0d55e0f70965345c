"""Scenario runners: braiding, systematic-error sweeps, chiral loops,
braid-operator algebra verification.

Runners accept a :class:`~mzbraid.config.RunConfig` and return plain result
objects; all file emission lives in the CLI layer.  Sweep grid points are
independent and may execute in a process pool; results are keyed by their
grid coordinates so assembly order never matters.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import RunConfig, config_digest
from .dynamics import (GRID_RESOLUTION_FACTOR, Trajectory, control_model,
                       mode_labels, propagate)
from .errors import PropagationError, ValidationError
from .synthesis import (ChiralParams, DrivenTransition, LabPulseSet,
                        braid_schedule, chiral_schedule,
                        lab_pulses_from_effective, linear_braid_profile)

LEAKAGE_THRESHOLD = 1e-2
BOUNDARY_FIDELITY_FLOOR = 0.99


# ---------------------------------------------------------------------------
# error models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorSpec:
    """One systematic-error channel.

    ``omega_fluctuation`` rescales the defect splitting, omega ->
    (1+epsilon) omega, with the drive synthesizer still tuned to the
    nominal value; ``rabi_fluctuation`` rescales one drive envelope,
    Omega_target -> (1+epsilon) Omega_target.
    """

    kind: str
    epsilon: float = 0.0
    target: int = 1

    def __post_init__(self):
        if self.kind not in ("omega_fluctuation", "rabi_fluctuation"):
            raise ValidationError(f"unknown error kind {self.kind!r}")
        if abs(self.epsilon) > 0.1 + 1e-12:
            raise ValidationError("|epsilon| must be <= 0.1")


def apply_rabi_error(pulses: LabPulseSet, epsilon: float, target: int = 1) -> LabPulseSet:
    """Scale one drive's envelope by (1 + epsilon); other drives untouched."""
    new = []
    for i, tr in enumerate(pulses.transitions, start=1):
        if i == target:
            amp = tr.amplitude
            new.append(DrivenTransition(
                label=tr.label,
                amplitude=(lambda a: lambda ts: (1.0 + epsilon) * a(ts))(amp),
                detuning=tr.detuning, detuning_phase=tr.detuning_phase,
                phase=tr.phase))
        else:
            new.append(tr)
    return LabPulseSet(transitions=tuple(new), omega=pulses.omega,
                       Delta0=pulses.Delta0,
                       counter_rotating=pulses.counter_rotating,
                       frame=pulses.frame, meta=dict(pulses.meta))


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def braid_pulses(config: RunConfig, slope: float | None = None,
                 omega: float | None = None,
                 counter_rotating: bool | None = None) -> LabPulseSet:
    """Synthesize the braid drive set for the configured pair."""
    profile = linear_braid_profile(config.braid_T,
                                   config.lam if slope is None else slope)
    schedule = braid_schedule(profile, pair=tuple(config.pair))
    return lab_pulses_from_effective(
        schedule,
        Delta0=config.Delta0,
        Delta_l=config.Delta_l * config.Delta0,
        omega=(config.omega if omega is None else omega) * config.Delta0,
        counter_rotating=(config.counter_rotating if counter_rotating is None
                          else counter_rotating),
        M=config.M,
        allow_strong_drive=config.allow_strong_drive)


def uniform_grid(T: float, omega_max: float | None, points_floor: int = 400,
                 odd: bool = True) -> np.ndarray:
    """Uniform step grid resolving the fastest phase; even step count so the
    midpoint time is a grid node."""
    if omega_max:
        n = int(np.ceil(T * omega_max * GRID_RESOLUTION_FACTOR / (2 * np.pi)))
    else:
        n = points_floor
    n = max(n, points_floor)
    if odd and n % 2:
        n += 1
    return np.linspace(0.0, T, n + 1)


def graded_stage_grid(T: float, n_interior: int, n_edge: int = 60,
                      shrink: float = 0.7, edge_fraction: float = 0.04) -> np.ndarray:
    """Stage grid with geometric refinement toward both ends.

    The synthesized chiral envelopes grow like the inverse distance to a
    stage boundary while the passage stays regular; clustering nodes
    geometrically keeps the unresolved boundary layer exponentially thin.
    """
    base = np.linspace(0.0, T, n_interior + 1)
    ladder = T * edge_fraction * shrink ** np.arange(1, n_edge + 1)
    return np.unique(np.concatenate([base, ladder, T - ladder]))


def phase_invariant_distance(U: np.ndarray, V: np.ndarray) -> float:
    """min over a global phase of the spectral-norm difference ||U - e^{i p} V||.

    Coarse scan plus local golden-section refinement; the Frobenius-optimal
    phase arg tr(V^dag U) seeds the scan but is not spectral-optimal when
    the difference is strongly non-normal.
    """
    def d(p):
        return np.linalg.norm(U - np.exp(1j * p) * V, ord=2)

    seeds = list(np.linspace(0.0, 2 * np.pi, 64, endpoint=False))
    tr = np.trace(V.conj().T @ U)
    if abs(tr) > 1e-300:
        seeds.append(float(np.angle(tr)))
    p0 = min(seeds, key=d)
    lo, hi = p0 - 0.15, p0 + 0.15
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = hi - gr * (hi - lo), lo + gr * (hi - lo)
    fa, fb = d(a), d(b)
    for _ in range(60):
        if fa < fb:
            hi, b, fb = b, a, fa
            a = hi - gr * (hi - lo)
            fa = d(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + gr * (hi - lo)
            fb = d(b)
    return float(min(fa, fb))


def ideal_braid_matrix(pair: tuple[int, int], M: int = 3,
                       global_phase: float = 0.0) -> np.ndarray:
    """Exchange unitary on the M-mode span: |j><k| - |k><j| + identity rest,
    optionally decorated with the passage global phase e^{-/+ i f}."""
    j, k = pair[0] - 1, pair[1] - 1
    B = np.eye(M, dtype=complex)
    B[j, j] = B[k, k] = 0.0
    B[j, k] = np.exp(-1j * global_phase)
    B[k, j] = -np.exp(1j * global_phase)
    return B


#: gauge fixing the braid-plane comparison: the synthesized passage frame
#: carries e^{+/- i alpha/2} quadrature phases (alpha = pi/2 at both ends),
#: reconciled with the plain exchange convention by rephasing the k mode.
BRAID_GAUGE_PHASE = np.pi / 2


def _gauge(M: int, pair: tuple[int, int]) -> np.ndarray:
    d = np.ones(M, complex)
    d[pair[1] - 1] = np.exp(1j * BRAID_GAUGE_PHASE)
    return np.diag(d)


# ---------------------------------------------------------------------------
# braiding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BraidOperatorReport:
    """Realized braid operator and its algebra checks."""

    pair: tuple[int, int]
    realized_full: np.ndarray            # (M+1, M+1) incl. excited level
    realized_modes: np.ndarray           # (M, M) mode-span block
    target: np.ndarray                   # ideal exchange (gauge-reconciled)
    distance: float                      # plane distance, global-phase invariant
    square_distance: float               # d(B^2, -I) on the braid plane
    unitarity_defect: float
    final_fidelities: dict[str, float]
    max_leakage: float
    leakage_flag: bool
    global_phase: float                  # synthesized passage phase at T
    meta: dict = field(default_factory=dict)


def _realized_operator(model, grid, dim, tol) -> np.ndarray:
    cols = []
    for i in range(dim):
        psi0 = np.zeros(dim, complex)
        psi0[i] = 1.0
        traj = propagate(model, psi0, grid, tol=tol,
                         out_times=np.array([grid[0], grid[-1]]))
        cols.append(traj.psi[-1])
    return np.stack(cols, axis=1)


def run_braiding(config: RunConfig) -> tuple[Trajectory, BraidOperatorReport]:
    """Propagate the braid from both pair states and reconstruct the operator.

    The returned trajectory starts from the first pair mode; the report
    compares the realized mode-span block with the exchange target up to a
    global phase, in the fixed frame gauge, and flags leakage out of the
    braid plane beyond the large-detuning budget.
    """
    pulses = braid_pulses(config)
    model = control_model(pulses)
    T = config.braid_T
    grid = uniform_grid(T, model.omega_max)
    out = np.linspace(0.0, T, 2001)
    j, k = config.pair
    labels = mode_labels(config.M)

    psi0 = np.zeros(config.M + 1, complex)
    psi0[j - 1] = 1.0
    traj = propagate(model, psi0, grid, tol=config.tol, out_times=out)

    U = _realized_operator(model, grid, config.M + 1, tol=None)
    Um = U[:config.M, :config.M]
    G = _gauge(config.M, tuple(config.pair))
    Um_gauged = G.conj().T @ Um @ G
    fT = float(config.lam * np.pi / 2)
    target = ideal_braid_matrix(tuple(config.pair), config.M, global_phase=fT)
    # restrict the distance to the braid plane (spectators carry their own
    # deterministic elimination phases)
    pl = [j - 1, k - 1]
    dist = phase_invariant_distance(Um_gauged[np.ix_(pl, pl)],
                                    target[np.ix_(pl, pl)])
    B2 = Um_gauged[np.ix_(pl, pl)] @ Um_gauged[np.ix_(pl, pl)]
    sq = phase_invariant_distance(B2, -np.eye(2, dtype=complex))
    unit = float(np.linalg.norm(U.conj().T @ U - np.eye(config.M + 1), ord=2))

    finals = {lab: traj.final_fidelity(lab) for lab in labels}
    spectators = [lab for i, lab in enumerate(labels)
                  if i not in (j - 1, k - 1)]
    max_leak = max(float(traj.fidelity_series(lab).max()) for lab in spectators)
    flag = max_leak > LEAKAGE_THRESHOLD
    if flag:
        warnings.warn(f"leakage {max_leak:.2e} beyond the large-detuning budget",
                      stacklevel=2)
    report = BraidOperatorReport(
        pair=tuple(config.pair), realized_full=U, realized_modes=Um_gauged,
        target=target, distance=dist, square_distance=sq,
        unitarity_defect=unit, final_fidelities=finals, max_leakage=max_leak,
        leakage_flag=flag, global_phase=fT,
        meta={"digest": config_digest(config), "omega": config.omega,
              "counter_rotating": config.counter_rotating,
              "slope": config.lam, "T": T})
    return traj, report


@dataclass(frozen=True)
class AlgebraReport:
    """Pairwise braid operators and their group-relation distances."""

    pairs: tuple[tuple[int, int], ...]
    square_distances: dict[tuple[int, int], float]
    fourth_power_distances: dict[tuple[int, int], float]
    yang_baxter_distance: float
    ideal_square_exact: bool
    ideal_yang_baxter_exact: bool
    realized: dict[tuple[int, int], np.ndarray]


def verify_braid_algebra(config: RunConfig | None = None,
                         pairs=((1, 2), (2, 3), (1, 3))) -> AlgebraReport:
    """Check exchange algebra: squares to -1 on the plane, braid relation.

    The ideal operators are verified first by explicit matrix products
    (the oracle); the realized ones come from full propagations of each
    pair's schedule and are compared up to a global phase.  Deterministic
    per-mode elimination phases cancel between the two braid-relation
    orderings because every mode plays each role (plane member twice,
    spectator once) on both sides.
    """
    if config is None:
        config = RunConfig(experiment="braid")
    M = config.M
    ideal = {p: ideal_braid_matrix(p, M) for p in pairs}
    sq_ok = all(
        np.array_equal((ideal[p] @ ideal[p])[np.ix_([p[0] - 1, p[1] - 1],
                                                    [p[0] - 1, p[1] - 1])],
                       -np.eye(2)) for p in pairs)
    lhs = ideal[(1, 2)] @ ideal[(2, 3)] @ ideal[(1, 2)]
    rhs = ideal[(2, 3)] @ ideal[(1, 2)] @ ideal[(2, 3)]
    yb_ok = np.array_equal(lhs, rhs)

    realized = {}
    for p in pairs:
        cfg = replace(config, pair=p)
        pulses = braid_pulses(cfg)
        model = control_model(pulses)
        grid = uniform_grid(cfg.braid_T, model.omega_max)
        U = _realized_operator(model, grid, M + 1, tol=None)
        realized[p] = U[:M, :M]
    sq = {}
    p4 = {}
    for p, B in realized.items():
        pl = [p[0] - 1, p[1] - 1]
        B2 = (B @ B)[np.ix_(pl, pl)]
        sq[p] = phase_invariant_distance(B2, -np.eye(2, dtype=complex))
        p4[p] = phase_invariant_distance(
            np.linalg.matrix_power(B[np.ix_(pl, pl)], 4), np.eye(2, dtype=complex))
    L = realized[(1, 2)] @ realized[(2, 3)] @ realized[(1, 2)]
    R = realized[(2, 3)] @ realized[(1, 2)] @ realized[(2, 3)]
    yb = phase_invariant_distance(L, R)
    return AlgebraReport(pairs=tuple(pairs), square_distances=sq,
                         fourth_power_distances=p4, yang_baxter_distance=yb,
                         ideal_square_exact=bool(sq_ok),
                         ideal_yang_baxter_exact=bool(yb_ok), realized=realized)


# ---------------------------------------------------------------------------
# systematic-error sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    """Final-state fidelity over the (epsilon, lambda) grid."""

    kind: str
    axis: np.ndarray                     # epsilon grid
    lambdas: tuple[float, ...]
    fidelities: np.ndarray               # (n_lambda, n_eps); NaN = missing
    missing: tuple[tuple[float, float], ...]
    metadata: dict

    def series(self, lam: float) -> np.ndarray:
        return self.fidelities[self.lambdas.index(lam)]


def _sweep_point(args) -> tuple[int, int, float]:
    il, ie, lam, eps, kind, target, cfg_kwargs = args
    config = RunConfig(**cfg_kwargs)
    pulses = braid_pulses(config, slope=lam, omega=config.sweep_omega,
                          counter_rotating=config.sweep_counter_rotating)
    omega_error = 0.0
    if kind == "omega_fluctuation":
        omega_error = eps
    else:
        pulses = apply_rabi_error(pulses, eps, target=target)
    model = control_model(pulses, omega_error=omega_error)
    T = config.braid_T
    grid = uniform_grid(T, model.omega_max)
    j, k = config.pair
    psi0 = np.zeros(config.M + 1, complex)
    psi0[j - 1] = 1.0
    traj = propagate(model, psi0, grid, tol=config.sweep_tol,
                     out_times=np.array([0.0, T]), max_refines=4)
    return il, ie, traj.final_fidelity(f"gamma{k}")


def run_error_sweep(config: RunConfig, spec: ErrorSpec,
                    eps_grid=None, lambda_set=None) -> SweepResult:
    """Fidelity of the braid target state against the error magnitude.

    Every (epsilon, lambda) point synthesizes its own schedule, injects the
    error into the full rotating-frame Hamiltonian, and propagates from the
    first pair mode; a failed point is recorded as missing rather than
    aborting the sweep.
    """
    if eps_grid is None:
        lo, hi = config.eps_range
        eps_grid = np.linspace(lo, hi, config.eps_points)
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.any(np.abs(eps_grid) > 0.1 + 1e-12):
        raise ValidationError("epsilon grid must stay within [-0.1, 0.1]")
    lambdas = tuple(config.lambdas if lambda_set is None else lambda_set)
    if any(l < 0 or l > 10 for l in lambdas):
        raise ValidationError("lambda values must lie in [0, 10]")
    from dataclasses import asdict
    cfg_kwargs = asdict(config)
    jobs = [(il, ie, lam, float(eps), spec.kind, spec.target, cfg_kwargs)
            for il, lam in enumerate(lambdas)
            for ie, eps in enumerate(eps_grid)]
    F = np.full((len(lambdas), len(eps_grid)), np.nan)
    missing = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            results = list(ex.map(_sweep_point, jobs))
        for il, ie, f in results:
            F[il, ie] = f
    else:
        for job in jobs:
            try:
                il, ie, f = _sweep_point(job)
                F[il, ie] = f
            except PropagationError as exc:
                missing.append((job[2], job[3]))
                warnings.warn(f"sweep point lambda={job[2]} eps={job[3]} failed: {exc}",
                              stacklevel=2)
    meta = {"digest": config_digest(config), "kind": spec.kind,
            "target": spec.target, "omega": config.sweep_omega,
            "counter_rotating": config.sweep_counter_rotating,
            "tol": config.tol, "T": config.braid_T}
    return SweepResult(kind=spec.kind, axis=eps_grid, lambdas=lambdas,
                       fidelities=F, missing=tuple(missing), metadata=meta)


# ---------------------------------------------------------------------------
# chiral loops
# ---------------------------------------------------------------------------

def run_chiral(config: RunConfig, direction: str | None = None,
               n_loops: int | None = None) -> tuple[Trajectory, ChiralParams]:
    """Propagate the chiral loop schedule for the requested cycles.

    Uses the fourth-order commutator-free scheme on per-stage grids refined
    geometrically toward the boundaries.  Raises when a stage-boundary
    target fidelity falls below the schedule-consistency floor.
    """
    direction = config.direction if direction is None else direction
    n_loops = config.n_loops if n_loops is None else n_loops
    params, pulses = chiral_schedule(direction, T=config.T_stage)
    model = control_model(pulses)
    T = config.T_stage
    stage = graded_stage_grid(T, n_interior=config.steps_per_stage)
    pieces = [stage + m * T for m in range(3 * n_loops)]
    grid = np.unique(np.concatenate(pieces))
    out = np.unique(np.concatenate(
        [np.linspace(m * T, (m + 1) * T, 241) for m in range(3 * n_loops)]))
    psi0 = np.zeros(4, complex)
    psi0[0] = 1.0
    traj = propagate(model, psi0, grid, tol=config.tol, out_times=out,
                     scheme="cf4", max_refines=3)
    targets = params.stage_targets()
    for m in range(1, 3 * n_loops + 1):
        i = int(np.argmin(np.abs(traj.grid - m * T)))
        f = traj.fidelities[i, targets[(m - 1) % 3]]
        if f < BOUNDARY_FIDELITY_FLOOR:
            raise PropagationError(
                f"stage-boundary fidelity {f:.4f} at t={m}T below "
                f"{BOUNDARY_FIDELITY_FLOOR}: schedule-consistency failure")
    return traj, params
