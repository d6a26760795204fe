"""Linear vacua, spectral projections, gap eigenpairs, and crossing scans.

Spectral projections are computed by full Hermitian diagonalization, which
is exact at desk scale.  A Fermi level within gap_tol of the spectrum is a
hard error: silent tie-breaking would corrupt the charge bookkeeping.

Eigenvalues of a real scalar external potential come in exact time-reversal
doublets on this lattice (the operator commutes with an antiunitary
symmetry squaring to -1), so "the" gap eigenvalue is reported as a cluster:
a degenerate value plus its multiplicity.  Downstream charge accounting is
per cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dirac, states
from .coulomb import ChargeDensity
from .lattice import MomentumLattice, SpinorField, MOMENTUM
from .states import VacuumState

__all__ = [
    "DegenerateFermiLevelError",
    "MultiplicityError",
    "GapEigenpair",
    "CrossingProfile",
    "GAP_TOL",
    "CLUSTER_TOL",
    "spectral_projection",
    "projector_below",
    "external_dirac_operator",
    "linear_vacuum",
    "gap_eigenpair",
    "crossing_scan",
    "normalize_crossing",
]

GAP_TOL = 1e-6
CLUSTER_TOL = 1e-8


class DegenerateFermiLevelError(ValueError):
    """An eigenvalue sits within gap_tol of the requested Fermi level."""

    def __init__(self, mu: float, eigenvalue: float, iteration: int | None = None):
        self.mu = mu
        self.eigenvalue = eigenvalue
        self.iteration = iteration
        where = f" at iteration {iteration}" if iteration is not None else ""
        super().__init__(
            f"eigenvalue {eigenvalue:.9g} within gap tolerance of Fermi level {mu:.9g}{where}"
        )


class MultiplicityError(ValueError):
    """The Fermi window does not contain exactly one eigenvalue cluster."""


def projector_below(h: np.ndarray, mu: float, gap_tol: float = GAP_TOL):
    """Orthogonal projector onto eigenspaces with eigenvalue <= mu.

    Returns (projector, eigenvalues).  Raises DegenerateFermiLevelError when
    the spectrum approaches mu closer than gap_tol.
    """
    w, u = np.linalg.eigh(h)
    i = int(np.argmin(np.abs(w - mu)))
    if abs(w[i] - mu) < gap_tol:
        raise DegenerateFermiLevelError(mu, float(w[i]))
    sel = w <= mu
    cols = u[:, sel]
    return cols @ cols.conj().T, w


def spectral_projection(h: np.ndarray, mu: float, gap_tol: float = GAP_TOL) -> np.ndarray:
    """Projector-only variant of :func:`projector_below`."""
    p, _ = projector_below(h, mu, gap_tol)
    return p


def external_dirac_operator(lattice: MomentumLattice, nu: ChargeDensity,
                            kappa: float) -> np.ndarray:
    """Cutoff Dirac operator with attractive external Coulomb coupling kappa."""
    h = dirac.free_operator(lattice)
    if kappa != 0.0:
        h = h - kappa * states.potential_operator(lattice, nu)
    return h


def linear_vacuum(nu: ChargeDensity, kappa: float, mu: float,
                  lattice: MomentumLattice | None = None,
                  gap_tol: float = GAP_TOL) -> VacuumState:
    """Non-interacting vacuum: filled spectrum below mu, relative to the free sea."""
    lat = nu.lattice if lattice is None else lattice
    h = external_dirac_operator(lat, nu, kappa)
    p, _ = projector_below(h, mu, gap_tol)
    _, p_minus = dirac.free_projectors(lat)
    return VacuumState(lat, p - p_minus, fermi_level=mu, provenance="linear")


@dataclass
class GapEigenpair:
    lam: float                    # cluster eigenvalue (degenerate values averaged)
    phi: SpinorField              # representative eigenvector, unit L2 norm
    gap_margin: float             # distance from the cluster to the rest of the spectrum
    multiplicity: int             # cluster size (2 for time-reversal doublets)
    cluster: np.ndarray           # the raw eigenvalues in the cluster
    residual: float               # |(H - lam) phi|_2


def _cluster_around(w_in: np.ndarray, cluster_tol: float) -> list[np.ndarray]:
    """Split sorted eigenvalues into clusters separated by more than cluster_tol."""
    groups = []
    start = 0
    for i in range(1, len(w_in) + 1):
        if i == len(w_in) or w_in[i] - w_in[i - 1] > cluster_tol:
            groups.append(np.arange(start, i))
            start = i
    return groups


def gap_eigenpair(nu: ChargeDensity, kappa: float, window: tuple[float, float],
                  lattice: MomentumLattice | None = None,
                  cluster_tol: float = CLUSTER_TOL) -> GapEigenpair:
    """Eigenvalue cluster of the external-field operator inside the Fermi window.

    Requires exactly one cluster strictly inside (mu_minus, mu_plus); exact
    degeneracies are reported through ``multiplicity`` rather than silently
    resolved.  The representative eigenvector has its largest-magnitude
    component rotated to the positive real axis.
    """
    lat = nu.lattice if lattice is None else lattice
    lo, hi = window
    if not lo < hi:
        raise ValueError("empty Fermi window")
    h = external_dirac_operator(lat, nu, kappa)
    w, u = np.linalg.eigh(h)
    inside = np.where((w > lo) & (w < hi))[0]
    if len(inside) == 0:
        raise MultiplicityError(f"no eigenvalue in the window ({lo:g}, {hi:g})")
    groups = _cluster_around(w[inside], cluster_tol)
    if len(groups) != 1:
        vals = [float(np.mean(w[inside][g])) for g in groups]
        raise MultiplicityError(
            f"{len(groups)} distinct eigenvalue clusters in the window: {vals}"
        )
    cluster_idx = inside[groups[0]]
    cluster = w[cluster_idx]
    lam = float(np.mean(cluster))
    outside = np.delete(w, cluster_idx)
    margin = float(np.min(np.abs(outside - lam))) if len(outside) else np.inf

    vec = u[:, cluster_idx[0]].copy()
    j = int(np.argmax(np.abs(vec)))
    phase = vec[j] / abs(vec[j])
    vec = vec / phase
    residual = float(np.linalg.norm(h @ vec - lam * vec))

    n = lat.n
    field = np.zeros((n**3, 4), dtype=complex)
    field[lat.ball_flat] = vec.reshape(lat.m, 4)
    # unit physical L2 norm: coefficient vector scaled by 1/sqrt(dV)
    field /= np.sqrt(lat.cell_volume)
    phi = SpinorField(lat, field.reshape(n, n, n, 4), MOMENTUM)

    return GapEigenpair(
        lam=lam, phi=phi, gap_margin=margin,
        multiplicity=int(len(cluster)), cluster=cluster, residual=residual,
    )


@dataclass
class CrossingProfile:
    kappas: np.ndarray
    lambdas: np.ndarray
    multiplicities: np.ndarray
    kappa_c: float | None        # sign-change estimate, None when no crossing
    monotonic: bool
    max_jump: float


def crossing_scan(nu: ChargeDensity, kappas, window: tuple[float, float],
                  lattice: MomentumLattice | None = None,
                  jump_tol: float = 0.2) -> CrossingProfile:
    """Track the gap cluster along an ascending kappa grid."""
    kappas = np.asarray(kappas, dtype=float)
    if np.any(np.diff(kappas) <= 0):
        raise ValueError("kappa samples must be strictly ascending")
    lams, mults = [], []
    for k in kappas:
        pair = gap_eigenpair(nu, float(k), window, lattice)
        lams.append(pair.lam)
        mults.append(pair.multiplicity)
    lams = np.array(lams)
    jumps = np.abs(np.diff(lams))
    kappa_c = None
    sign_change = np.where(np.sign(lams[:-1]) * np.sign(lams[1:]) < 0)[0]
    if len(sign_change):
        i = sign_change[0]
        # linear interpolation inside the bracketing pair
        k0, k1, l0, l1 = kappas[i], kappas[i + 1], lams[i], lams[i + 1]
        kappa_c = float(k0 - l0 * (k1 - k0) / (l1 - l0))
    return CrossingProfile(
        kappas=kappas,
        lambdas=lams,
        multiplicities=np.array(mults, dtype=int),
        kappa_c=kappa_c,
        monotonic=bool(np.all(np.diff(lams) < 0) or np.all(np.diff(lams) > 0)),
        max_jump=float(np.max(jumps)) if len(jumps) else 0.0,
    )


def normalize_crossing(nu: ChargeDensity, window: tuple[float, float],
                       kappa_range: tuple[float, float],
                       lattice: MomentumLattice | None = None,
                       lam_tol: float = 1e-8, max_iter: int = 80,
                       scan_points: int = 25):
    """Rescale nu so its gap eigenvalue crosses zero exactly at unit coupling.

    A coarse scan over ``kappa_range`` brackets the sign change (couplings
    where no cluster sits in the window are skipped), then bisection refines
    kappa |-> lambda(kappa * nu) until |lambda| <= lam_tol.  Returns
    (nu_scaled, kappa_c0).  Raises ValueError when no crossing is found.
    """
    lo, hi = None, None
    f_lo = f_hi = None
    prev = None
    for k in np.linspace(kappa_range[0], kappa_range[1], scan_points):
        try:
            lam = gap_eigenpair(nu, float(k), window, lattice).lam
        except MultiplicityError:
            prev = None
            continue
        if prev is not None and np.sign(prev[1]) != np.sign(lam):
            (lo, f_lo), (hi, f_hi) = prev, (float(k), lam)
            break
        prev = (float(k), lam)
    if lo is None:
        raise ValueError(
            f"gap eigenvalue does not change sign on [{kappa_range[0]:g}, {kappa_range[1]:g}]"
        )
    mid, f_mid = lo, f_lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = gap_eigenpair(nu, mid, window, lattice).lam
        if abs(f_mid) <= lam_tol:
            break
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    else:
        raise ValueError(f"crossing bisection stalled: |lambda| = {abs(f_mid):.3g}")
    return nu.scaled(mid), float(mid)
