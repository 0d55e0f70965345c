"""Kitaev-chain model in fermionic and Majorana representations.

A single open chain of ``N`` spinless fermion sites with on-site energy
``mu``, hopping ``J`` and p-wave pairing ``g`` is mapped onto 2N Majorana
operators (two per site, odd index = real quadrature, even = imaginary).
The quadratic Hamiltonian is stored as the real antisymmetric coupling
matrix ``A`` with ``H = (i/4) sum_mn A_mn gamma_m gamma_n``; the
single-particle spectrum is the spectrum of the Hermitian matrix ``iA``.

At the sweet spot ``mu = 0, J = -g`` only the inter-site pairs
(gamma_{2n+1}, gamma_{2n}) stay coupled, so the two edge Majoranas
gamma_1 and gamma_2N drop out of the Hamiltonian exactly: these are the
zero modes used as the braiding register.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ValidationError

DEFAULT_ZERO_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ChainParams:
    """Parameters of one Kitaev chain.

    Parameters
    ----------
    mu : float
        On-site energy (frequency units).
    J : float
        Hopping amplitude between neighbouring sites.
    g : float
        Pairing amplitude between neighbouring sites.
    N : int
        Number of lattice sites (>= 1).
    """

    mu: float
    J: float
    g: float
    N: int

    def __post_init__(self):
        if self.N < 1 or int(self.N) != self.N:
            raise ValidationError(f"site count must be a positive integer, got {self.N}")
        for name in ("mu", "J", "g"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValidationError(f"{name} must be a finite real, got {v}")

    def sweet_spot(self) -> bool:
        """True iff the chain sits exactly at mu = 0, J = -g."""
        return self.mu == 0.0 and self.J == -self.g


@dataclass(frozen=True)
class MajoranaCouplingMatrix:
    """Real antisymmetric matrix A with H = (i/4) sum A_mn gamma_m gamma_n.

    Basis order is gamma_1 ... gamma_2N with gamma_{2n-1} = c_n + c_n^dag
    and gamma_{2n} = -i(c_n - c_n^dag).
    """

    A: np.ndarray
    params: ChainParams = field(repr=False, default=None)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
            raise ValidationError(f"coupling matrix must be square 2Nx2N, got {A.shape}")
        scale = max(np.abs(A).max(), 1.0)
        if np.abs(A + A.T).max() > 1e-12 * scale:
            raise ValidationError("coupling matrix must be antisymmetric")
        object.__setattr__(self, "A", A)

    @property
    def n_sites(self) -> int:
        return self.A.shape[0] // 2

    def single_particle_matrix(self) -> np.ndarray:
        """Hermitian matrix iA whose eigenvalues are the mode energies."""
        return 1j * self.A


Localization = Union[float, str]


@dataclass(frozen=True)
class ZeroMode:
    """One near-zero-energy Majorana eigenmode.

    ``amplitudes`` is a real unit vector over the Majorana indices;
    ``localization_length`` is the site-weight decay length, or the string
    ``"exact-edge"`` when all weight sits on a single Majorana index.
    """

    energy: float
    amplitudes: np.ndarray
    localization_length: Localization

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValidationError("zero-mode amplitudes must be normalized to 1")
        object.__setattr__(self, "amplitudes", amps)


def build_majorana_coupling(params: ChainParams) -> MajoranaCouplingMatrix:
    """Assemble the Majorana coupling matrix for one chain.

    Substituting the site operators by their Majorana quadratures turns the
    on-site term into a coupling -mu between gamma_{2n-1} and gamma_{2n},
    and each bond into couplings (g - J) between gamma_{2n+1}, gamma_{2n}
    and (g + J) between gamma_{2n+2}, gamma_{2n-1}.  At the sweet spot the
    only survivor is the (g - J) = 2g channel.
    """
    N = params.N
    A = np.zeros((2 * N, 2 * N))
    for n in range(1, N + 1):
        a, b = 2 * n - 2, 2 * n - 1
        A[a, b] += -params.mu
        A[b, a] -= -params.mu
    for n in range(1, N):
        A[2 * n, 2 * n - 1] += params.g - params.J
        A[2 * n - 1, 2 * n] -= params.g - params.J
        A[2 * n + 1, 2 * n - 2] += params.g + params.J
        A[2 * n - 2, 2 * n + 1] -= params.g + params.J
    return MajoranaCouplingMatrix(A=A, params=params)


def bdg_blocks(params: ChainParams) -> tuple[np.ndarray, np.ndarray]:
    """Fermionic single-particle blocks (h, P).

    ``h`` is the (real symmetric) hopping/on-site block and ``P`` the
    antisymmetric pairing block of
    H = sum h_mn c_m^dag c_n + 1/2 sum (P_mn c_m^dag c_n^dag + h.c.).
    """
    N = params.N
    h = np.zeros((N, N))
    P = np.zeros((N, N))
    for n in range(N):
        h[n, n] = -params.mu
    for n in range(N - 1):
        h[n + 1, n] += -params.J
        h[n, n + 1] += -params.J
        P[n + 1, n] += -params.g
        P[n, n + 1] += +params.g
    return h, P


def coupling_from_bdg(h: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Map fermionic blocks (h, P) to the Majorana coupling matrix A.

    Works through the explicit linear substitution
    c_n = (gamma_{2n-1} + i gamma_{2n})/2 applied to the quadratic form,
    so it is the independent counterpart of :func:`build_majorana_coupling`.
    """
    h = np.asarray(h, dtype=float)
    P = np.asarray(P, dtype=float)
    N = h.shape[0]
    # eta = (c_1..c_N, c_1^dag..c_N^dag);  H = 1/2 eta^dag HBdG eta + tr(h)/2
    HBdG = np.block([[h, P], [-P.conj(), -h.T]])
    Winv = np.zeros((2 * N, 2 * N), complex)   # eta = Winv gamma
    for n in range(N):
        Winv[n, 2 * n] = 0.5
        Winv[n, 2 * n + 1] = 0.5j
        Winv[N + n, 2 * n] = 0.5
        Winv[N + n, 2 * n + 1] = -0.5j
    M = 0.5 * (Winv.conj().T @ HBdG @ Winv)
    Masym = 0.5 * (M - M.T)                    # symmetric part is the constant
    A = Masym / (1j / 4.0)
    if np.abs(A.imag).max() > 1e-12 * max(np.abs(A.real).max(), 1.0):
        raise ValidationError("Majorana coupling came out non-real; check h, P")
    return A.real


def bdg_from_coupling(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`coupling_from_bdg` (up to the dropped constant)."""
    A = np.asarray(A, dtype=float)
    N = A.shape[0] // 2
    W = np.zeros((2 * N, 2 * N), complex)      # gamma = W eta
    for n in range(N):
        W[2 * n, n] = 1.0
        W[2 * n, N + n] = 1.0
        W[2 * n + 1, n] = -1j
        W[2 * n + 1, N + n] = 1j
    M = (1j / 4.0) * (W.T @ A @ W)             # quadratic form back in eta
    # H = 1/2 eta^dag HBdG eta requires folding the anticommutators:
    # eta^T M eta = eta^dag (2 S M) eta + const with S swapping (c, c^dag)
    S = np.zeros((2 * N, 2 * N))
    S[:N, N:] = np.eye(N)
    S[N:, :N] = np.eye(N)
    HBdG = 2.0 * (S @ M)
    HBdG = 0.5 * (HBdG + HBdG.conj().T)
    h = HBdG[:N, :N].real
    P = HBdG[:N, N:].real
    return h, P


def _site_weights(amps: np.ndarray) -> np.ndarray:
    return amps[0::2] ** 2 + amps[1::2] ** 2


def _localization(amps: np.ndarray) -> Localization:
    """Decay length from a log-linear fit of the per-site weights."""
    if np.max(np.abs(amps)) ** 2 > 1.0 - 1e-14:
        return "exact-edge"
    w = _site_weights(amps)
    order = np.arange(len(w))
    if w[0] < w[-1]:
        order = order[::-1]
    w_sorted = w[order]
    mask = w_sorted > max(w_sorted.max() * 1e-24, 1e-300)
    sites = np.arange(len(w))[mask]
    if len(sites) < 3:
        return "exact-edge"
    slope = np.polyfit(sites, np.log(w_sorted[mask]), 1)[0]
    if slope >= 0:
        return float("inf")
    # weight ~ exp(-2 n / xi)
    return float(-2.0 / slope)


def _real_orthonormal_span(vectors: np.ndarray) -> np.ndarray:
    """Real orthonormal basis of the span of complex columns (Gram-Schmidt
    over the stacked real/imaginary quadratures)."""
    cands = []
    for k in range(vectors.shape[1]):
        cands.append(np.real(vectors[:, k]))
        cands.append(np.imag(vectors[:, k]))
    basis: list[np.ndarray] = []
    for v in cands:
        for b in basis:
            v = v - b * (b @ v)
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            basis.append(v / nrm)
    return np.array(basis).T if basis else np.zeros((vectors.shape[0], 0))


def _edge_localize(B: np.ndarray, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Rotate an orthonormal basis B so its first column maximizes weight on
    ``index``; return (best column, deflated remainder basis)."""
    w = B[index, :]
    nw = np.linalg.norm(w)
    if nw < 1e-14:
        return None, B
    v = B @ (w / nw)
    rest = []
    for k in range(B.shape[1]):
        r = B[:, k] - v * (v @ B[:, k])
        for b in rest:
            r = r - b * (b @ r)
        nrm = np.linalg.norm(r)
        if nrm > 1e-8:
            rest.append(r / nrm)
    return v, (np.array(rest).T if rest else np.zeros((B.shape[0], 0)))


def find_zero_modes(coupling: MajoranaCouplingMatrix,
                    tol: float | None = None) -> list[ZeroMode]:
    """All eigenmodes of iA with |energy| <= tol, as real Majorana vectors.

    ``tol`` defaults to 1e-10 in units of the pairing amplitude |g| (the
    double-precision eigensolver floor with margin).  The near-zero subspace
    is spanned by conjugate eigenvector pairs; a real orthonormal basis of
    it is rotated deterministically so that the leading modes maximize
    weight on Majorana index 1, then on index 2N (tie-break of the
    degenerate subspace).  Each mode's energy is the residual ||iA v||,
    which reduces to the pair splitting for a split doublet.
    """
    if tol is None:
        scale = abs(coupling.params.g) if (coupling.params is not None
                                           and coupling.params.g != 0) else 1.0
        tol = DEFAULT_ZERO_TOLERANCE * scale
    iA = coupling.single_particle_matrix()
    evals, evecs = np.linalg.eigh(iA)
    keep = np.abs(evals) <= tol
    if not np.any(keep):
        return []
    B = _real_orthonormal_span(evecs[:, keep])
    ordered: list[np.ndarray] = []
    for index in (0, B.shape[0] - 1):
        v, B = _edge_localize(B, index)
        if v is not None:
            ordered.append(v)
    ordered.extend(B[:, k] for k in range(B.shape[1]))
    ordered.sort(key=lambda v: (-v[0] ** 2, -v[-1] ** 2))
    modes = []
    for v in ordered:
        energy = float(np.linalg.norm(iA @ v))
        modes.append(ZeroMode(energy=energy, amplitudes=v,
                              localization_length=_localization(v)))
    return modes
