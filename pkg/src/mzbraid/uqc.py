"""Nonadiabatic-passage machinery over moving orthonormal frames.

A K-dimensional ancillary frame is a smooth family of orthonormal vectors
|mu_k(t)>.  In the frame, the dynamics splits into a dynamical part
H_kn = <mu_k|H|mu_n> and a gauge part A_kn = i <mu_k| d/dt mu_n>; a basis
state is a valid passage when the projector onto it commutes with the flow,
i.e. dPi/dt + i[H, Pi] = 0.  Every validated passage carries the scalar
phase f_k(t) = int (A_kk - H_kk) dt', and the joint evolution operator is
U0(t) = sum_k e^{i f_k} |mu_k(t)><mu_k(0)|.

Systematic errors eps*H1 drive transitions between passages; to second
order the passage fidelity is 1 - eps^2 c2 with per-channel integrals of
<mu_k|H1|mu_n> e^{-i (f_k - f_n)}, so a rapidly varying phase difference
suppresses the channel (the error-correction mechanism).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GridTooCoarseError, SingularParametrizationError, ValidationError

ORTHONORMALITY_TOL = 1e-10
DEFAULT_PASSAGE_THRESHOLD = 1e-6


@dataclass(frozen=True)
class AncillaryFrame:
    """Orthonormal moving frame |mu_k(t)>, k = 0..K-1.

    Parameters
    ----------
    basis : callable
        ``basis(t)`` returns a (K, K) complex matrix whose *columns* are the
        frame vectors at time t.
    dim : int
        Frame dimension K.
    t0 : float
        Reference time (boundary condition of the frame).
    dbasis : callable, optional
        Analytic time derivative of ``basis``; when absent, derivatives use
        Richardson-extrapolated central differences with step ``fd_step``.
    """

    basis: Callable[[float], np.ndarray]
    dim: int
    t0: float = 0.0
    dbasis: Callable[[float], np.ndarray] | None = None
    fd_step: float = 1e-5

    def validate(self, times: Sequence[float], tol: float = ORTHONORMALITY_TOL):
        """Check Gram(t) = identity on the sampled times."""
        for t in times:
            V = self.basis(t)
            if V.shape != (self.dim, self.dim):
                raise ValidationError(f"frame basis must be ({self.dim},{self.dim})")
            gram = V.conj().T @ V
            err = np.abs(gram - np.eye(self.dim)).max()
            if err > tol:
                raise ValidationError(f"frame not orthonormal at t={t}: residual {err:.2e}")

    def derivative(self, t: float, scale: float | None = None) -> np.ndarray:
        if self.dbasis is not None:
            return self.dbasis(t)
        h = self.fd_step if scale is None else scale
        d1 = (self.basis(t + h) - self.basis(t - h)) / (2 * h)
        d2 = (self.basis(t + h / 2) - self.basis(t - h / 2)) / h
        return (4.0 * d2 - d1) / 3.0

    def vector(self, t: float, k: int) -> np.ndarray:
        return self.basis(t)[:, k]

    def projector(self, t: float, k: int) -> np.ndarray:
        v = self.vector(t, k)
        return np.outer(v, v.conj())


@dataclass(frozen=True)
class RotatedDecomposition:
    """Frame decomposition of a Hamiltonian at one instant."""

    H_dyn: np.ndarray
    A_gauge: np.ndarray
    off_diag_residual: float


@dataclass(frozen=True)
class GlobalPhases:
    """Per-passage phases f_k(t) on a time grid, with f_k(t0) = 0."""

    times: np.ndarray
    f: np.ndarray                        # shape (n_times, K)
    rates: np.ndarray = field(repr=False, default=None)

    def at_end(self, k: int) -> float:
        return float(self.f[-1, k])


def _spectral_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, ord=2))


def rotated_hamiltonian(H_eff: Callable[[float], np.ndarray],
                        frame: AncillaryFrame, t: float) -> RotatedDecomposition:
    """Dynamical and gauge matrices of H_eff in the moving frame at time t.

    The residual is the largest off-diagonal magnitude of (H_dyn - A_gauge):
    zero residual on a grid means every frame vector is a valid passage.
    """
    H = np.asarray(H_eff(t), dtype=complex)
    if not np.all(np.isfinite(H)):
        raise SingularParametrizationError(
            f"Hamiltonian diverges at t={t} (singular parametrization)")
    if _spectral_norm(H - H.conj().T) > 1e-10 * max(_spectral_norm(H), 1.0):
        raise ValidationError(f"H_eff must be Hermitian at t={t}")
    V = frame.basis(t)
    dV = frame.derivative(t)
    H_dyn = V.conj().T @ H @ V
    A = 1j * (V.conj().T @ dV)
    A = 0.5 * (A + A.conj().T)           # exact antihermiticity of <mu|dmu> for ON frames
    D = H_dyn - A
    off = D - np.diag(np.diag(D))
    return RotatedDecomposition(H_dyn=H_dyn, A_gauge=A,
                                off_diag_residual=float(np.abs(off).max()))


def _passage_residuals(H_eff, projector, grid, h):
    worst = 0.0
    scale = 0.0
    for t in grid:
        P = projector(t)
        if _spectral_norm(P @ P - P) > 1e-10:
            raise ValidationError(f"projector not idempotent at t={t}")
        dP = (projector(t + h) - projector(t - h)) / (2 * h)
        dP2 = (projector(t + h / 2) - projector(t - h / 2)) / h
        dP = (4.0 * dP2 - dP) / 3.0
        H = np.asarray(H_eff(t), dtype=complex)
        scale = max(scale, np.abs(H).max())
        worst = max(worst, _spectral_norm(dP + 1j * (H @ P - P @ H)))
    return worst, max(scale, 1e-300)


def check_passage(H_eff: Callable[[float], np.ndarray],
                  projector: Callable[[float], np.ndarray],
                  grid: Sequence[float],
                  threshold: float = DEFAULT_PASSAGE_THRESHOLD,
                  fd_step: float | None = None) -> float:
    """Max spectral norm of dPi/dt + i[H_eff, Pi] over the grid.

    The residual is reported in units of the largest Hamiltonian entry.
    The projector derivative uses Richardson central differences at the
    step ``fd_step`` (default: 1e-5 of the grid span) and at a quarter of
    it; when the two estimates disagree while the residual exceeds
    ``threshold``, the grid (not the passage) is the problem and
    :class:`GridTooCoarseError` is raised.  The returned residual is the
    fine-step estimate.
    """
    grid = np.asarray(grid, dtype=float)
    span = grid[-1] - grid[0]
    h = min(span * 1e-5, 1.0) if fd_step is None else float(fd_step)
    r1, scale = _passage_residuals(H_eff, projector, grid, h)
    r2, _ = _passage_residuals(H_eff, projector, grid, h / 4)
    r1, r2 = r1 / scale, r2 / scale
    if r2 > threshold and r2 > 0.5 * r1:
        raise GridTooCoarseError(
            f"residual {r2:.2e} not converging under step refinement "
            f"({r1:.2e} at 4x coarser): derivative grid too coarse")
    return r2


def global_phase(frame: AncillaryFrame,
                 H_eff: Callable[[float], np.ndarray],
                 times: Sequence[float],
                 k: int | None = None) -> GlobalPhases:
    """Accumulated passage phases f_k(t) = int (A_kk - H_kk) dt'.

    Integration is a cumulative Simpson rule on the supplied grid (midpoint
    samples included), so the result is exact for integrands that are cubic
    between nodes.  Pass ``k`` to restrict to one passage (other columns are
    still returned for completeness).
    """
    times = np.asarray(times, dtype=float)
    K = frame.dim
    rates = np.empty((len(times), K))
    for i, t in enumerate(times):
        dec = rotated_hamiltonian(H_eff, frame, t)
        rates[i] = np.real(np.diag(dec.A_gauge) - np.diag(dec.H_dyn))
    if not np.all(np.isfinite(rates)):
        raise SingularParametrizationError(
            "global-phase integrand diverges on the path (singular parametrization)")
    mids = 0.5 * (times[1:] + times[:-1])
    rates_mid = np.empty((len(mids), K))
    for i, t in enumerate(mids):
        dec = rotated_hamiltonian(H_eff, frame, t)
        rates_mid[i] = np.real(np.diag(dec.A_gauge) - np.diag(dec.H_dyn))
    if not np.all(np.isfinite(rates_mid)):
        raise SingularParametrizationError(
            "global-phase integrand diverges on the path (singular parametrization)")
    dt = np.diff(times)[:, None]
    increments = dt / 6.0 * (rates[:-1] + 4.0 * rates_mid + rates[1:])
    f = np.vstack([np.zeros(K), np.cumsum(increments, axis=0)])
    return GlobalPhases(times=times, f=f, rates=rates)


@dataclass(frozen=True)
class InfidelityBudget:
    """Second-order error-channel budget for passage ``k``."""

    k: int
    c2: float
    channels: dict[int, complex]         # n -> int <mu_k|H1|mu_n> e^{-i(f_k-f_n)} dt

    def predicted_fidelity(self, eps: float) -> float:
        return 1.0 - eps ** 2 * self.c2


def second_order_infidelity(H1: Callable[[float], np.ndarray],
                            frame: AncillaryFrame,
                            phases: GlobalPhases,
                            k: int = 0) -> InfidelityBudget:
    """Leading infidelity coefficient c2 = sum_{n != k} |int D~_kn dt|^2.

    ``D~_kn(t) = <mu_k|H1|mu_n> e^{-i (f_k - f_n)}`` is the error channel in
    the co-moving double-rotated picture; the predicted passage fidelity
    under H -> H + eps H1 is 1 - eps^2 c2 + O(eps^3).
    """
    times = phases.times
    K = frame.dim
    vals = np.empty((len(times), K), dtype=complex)
    for i, t in enumerate(times):
        H = np.asarray(H1(t), dtype=complex)
        if _spectral_norm(H - H.conj().T) > 1e-10 * max(_spectral_norm(H), 1.0):
            raise ValidationError(f"error Hamiltonian must be Hermitian at t={t}")
        V = frame.basis(t)
        row = V[:, k].conj() @ H @ V
        vals[i] = row * np.exp(-1j * (phases.f[i, k] - phases.f[i]))
    channels: dict[int, complex] = {}
    c2 = 0.0
    for n in range(K):
        if n == k:
            continue
        I = complex(np.trapezoid(vals[:, n], times))
        channels[n] = I
        c2 += abs(I) ** 2
    return InfidelityBudget(k=k, c2=float(c2), channels=channels)


def correction_margin(frame: AncillaryFrame,
                      phases: GlobalPhases,
                      H1: Callable[[float], np.ndarray],
                      k: int = 0) -> dict[int, float]:
    """Suppression margin per error channel (k, n).

    The pointwise criterion compares the phase-difference slew rate
    |d(f_k - f_n)/dt| with the normalized variation rate of the channel
    element, |d D_kn/dt| / max|D_kn|; the margin is the minimum of that
    dimensionless ratio along the path.  Margin 0 means a static phase
    (no suppression); +inf means the element itself never varies.
    """
    times = phases.times
    K = frame.dim
    D = np.empty((len(times), K), dtype=complex)
    for i, t in enumerate(times):
        V = frame.basis(t)
        D[i] = V[:, k].conj() @ np.asarray(H1(t), dtype=complex) @ V
    dfdt = np.gradient(phases.f[:, k][:, None] - phases.f, times, axis=0)
    out: dict[int, float] = {}
    for n in range(K):
        if n == k:
            continue
        df_span = np.abs(phases.f[:, k] - phases.f[:, n]).max()
        if df_span < 1e-9:
            out[n] = 0.0                 # static phase difference: no suppression
            continue
        scale = np.abs(D[:, n]).max()
        d_var = np.abs(D[:, n] - D[0, n]).max()
        if scale < 1e-300 or d_var < 1e-12 * scale:
            out[n] = math.inf            # error matrix element constant along path
            continue
        dDdt = np.abs(np.gradient(D[:, n], times))
        ratio = np.abs(dfdt[:, n]) / np.maximum(dDdt / scale, 1e-300)
        out[n] = float(np.min(ratio))
    return out


def evolution_operator(frame: AncillaryFrame, phases: GlobalPhases,
                       t_index: int) -> np.ndarray:
    """U0(t) = sum_k e^{i f_k(t)} |mu_k(t)><mu_k(t0)| at grid index ``t_index``."""
    t = phases.times[t_index]
    V = frame.basis(t)
    V0 = frame.basis(frame.t0)
    return (V * np.exp(1j * phases.f[t_index])[None, :]) @ V0.conj().T


def completeness_residual(frame: AncillaryFrame, times: Sequence[float]) -> float:
    """Max deviation of sum_k |mu_k><mu_k| from the identity on the grid."""
    worst = 0.0
    for t in times:
        V = frame.basis(t)
        worst = max(worst, float(np.abs(V @ V.conj().T - np.eye(frame.dim)).max()))
    return worst
