"""Renormalized one-body density matrices and their functionals.

A vacuum state is the deviation Q = P - P0_minus of a one-body density
matrix from the free Dirac sea, stored as a dense Hermitian matrix on the
cutoff spinor space.  This module provides the charge density of a state,
the weighted kernel norms, the exchange operator, the first-order vacuum
response to an external density, and the admissibility diagnostics.

Difference kernels (the potential operator and the first-order response)
are built from true momentum differences restricted to the symmetric band;
out-of-band differences are dropped, never aliased.  The density of a state
uses the same band, which is what makes the operator/field energy pairings
exact identities on the lattice (see docs/conventions.md).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dirac
from .coulomb import ChargeDensity, l2c_norm
from .lattice import MomentumLattice

__all__ = [
    "VacuumState",
    "StatePairNorms",
    "AdmissibilityReport",
    "generalized_trace",
    "density_of",
    "potential_operator",
    "exchange_operator",
    "exchange_energy",
    "g10",
    "b_lattice",
    "q_norm",
    "s2_norm",
    "x_norm",
    "pair_norms",
    "admissibility_check",
    "projector_blocks",
    "block_traces",
    "square_identity_residual",
]


@dataclass
class VacuumState:
    """Q = P - P0_minus on the cutoff spinor space."""

    lattice: MomentumLattice
    q_matrix: np.ndarray  # (4m, 4m) complex Hermitian
    fermi_level: float = 0.0
    provenance: str = "manual"  # linear | scf | manual

    def __post_init__(self):
        d = self.lattice.dim
        if self.q_matrix.shape != (d, d):
            raise ValueError(f"state matrix must have shape {(d, d)}")
        if self.provenance not in ("linear", "scf", "manual"):
            raise ValueError(f"unknown provenance {self.provenance!r}")


def generalized_trace(state: VacuumState) -> float:
    """Charge relative to the free sea: tr(Q_pp) + tr(Q_mm) = tr(Q) at finite dimension."""
    return float(np.real(np.trace(state.q_matrix)))


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------


def density_of(state: VacuumState, imag_tol: float = 1e-10) -> ChargeDensity:
    """Charge density of a state, band-limited to the symmetric difference window.

    Raises ValueError when the position field carries an imaginary residue
    above ``imag_tol`` (relative): the telltale of a non-Hermitian state.
    """
    lat = state.lattice
    m, n = lat.m, lat.n
    blocks = state.q_matrix.reshape(m, 4, m, 4)
    spin_trace = np.einsum("iaja->ij", blocks)
    fhat = np.zeros(n**3, dtype=complex)
    masked = spin_trace * lat.pair_in_window
    np.add.at(fhat, lat.pair_diff_flat.reshape(-1), masked.reshape(-1))
    fhat /= lat.cell_volume * n**1.5
    fhat = fhat.reshape(n, n, n)
    pos = np.fft.ifftn(fhat, norm="ortho")
    scale = max(1.0, float(np.max(np.abs(pos.real))))
    resid = float(np.max(np.abs(pos.imag)))
    if resid > imag_tol * scale:
        raise ValueError(
            f"density has imaginary residue {resid:.3e}; state is not Hermitian"
        )
    return ChargeDensity(lat, np.ascontiguousarray(pos.real), fhat)


# ---------------------------------------------------------------------------
# operators built from densities and states
# ---------------------------------------------------------------------------


def potential_operator(lattice: MomentumLattice, rho: ChargeDensity) -> np.ndarray:
    """Dense cutoff sandwich of the Coulomb potential generated by rho.

    Matrix elements n^{-3/2} * Vhat(p - q) on in-band true differences,
    spin-diagonal; the k = 0 mode is dropped.
    """
    n = lattice.n
    k2 = lattice.k2_grid
    vhat = np.zeros(n**3, dtype=complex)
    nz = k2 > 1e-14
    vhat[nz] = 4 * np.pi * rho.momentum.reshape(-1)[nz] / k2[nz]
    vals = vhat[lattice.pair_diff_flat] * lattice.pair_in_window / n**1.5
    out = np.zeros((lattice.dim, lattice.dim), dtype=complex)
    for s in range(4):
        out[s::4, s::4] = vals
    return out


def _exchange_kernel_matrix(lattice: MomentumLattice) -> np.ndarray:
    """Band-limited periodized Coulomb kernel W(x - y) as an (n^3, n^3)-shaped
    (n,n,n,n,n,n) array; cached on the lattice."""
    cached = getattr(lattice, "_exchange_kernel", None)
    if cached is not None:
        return cached
    n = lattice.n
    band = 2.0 * lattice.cutoff
    k2 = lattice.k2_grid
    mult = np.where((k2 > 1e-14) & (k2 <= band**2 + 1e-12), 4 * np.pi / np.where(k2 > 0, k2, 1.0), 0.0)
    wpos = np.fft.ifftn(mult.reshape(n, n, n)).real * (n**3 / lattice.box_length**3)
    xi = np.arange(n)
    i1, i2, i3, j1, j2, j3 = np.meshgrid(xi, xi, xi, xi, xi, xi, indexing="ij", sparse=True)
    w6 = wpos[(i1 - j1) % n, (i2 - j2) % n, (i3 - j3) % n]
    lattice._exchange_kernel = w6
    return w6


def exchange_operator(lattice: MomentumLattice, q_matrix: np.ndarray) -> np.ndarray:
    """Exchange operator: position-kernel Hadamard product Q(x,y) * W(x-y).

    W is the periodized Coulomb kernel band-limited to momentum transfers
    up to 2 * cutoff.  Computed by a round trip through the full-grid
    position representation; Hermitian for Hermitian input.
    """
    n, m = lattice.n, lattice.m
    full = np.zeros((n**3, 4, n**3, 4), dtype=complex)
    sel = lattice.ball_flat
    full[np.ix_(sel, range(4), sel, range(4))] = q_matrix.reshape(m, 4, m, 4)
    full = full.reshape(n, n, n, 4, n, n, n, 4)
    full = np.fft.ifftn(full, axes=(0, 1, 2), norm="ortho")
    full = np.fft.fftn(full, axes=(4, 5, 6), norm="ortho")
    w6 = _exchange_kernel_matrix(lattice)
    full *= w6[:, :, :, None, :, :, :, None]
    full = np.fft.fftn(full, axes=(0, 1, 2), norm="ortho")
    full = np.fft.ifftn(full, axes=(4, 5, 6), norm="ortho")
    full = full.reshape(n**3, 4, n**3, 4)
    out = full[np.ix_(sel, range(4), sel, range(4))].reshape(lattice.dim, lattice.dim)
    return out


def exchange_energy(lattice: MomentumLattice, q_matrix: np.ndarray,
                    exchange: np.ndarray | None = None) -> float:
    """Double sum over |Q(x,y)|^2 W(x-y); equals tr(R_Q Q) for Hermitian Q."""
    if exchange is None:
        exchange = exchange_operator(lattice, q_matrix)
    return float(np.real(np.trace(exchange @ q_matrix)))


def b_lattice(lattice: MomentumLattice, k_index) -> float:
    """Riemann sum of the screening integrand on the momentum grid.

    For a nonzero grid momentum k this is the exact multiplier in the
    density response of :func:`g10`: the momentum content of the response
    density at k equals -b_lattice(k) times that of the source.  Converges
    to the continuum b_function(|k|, cutoff) as the momentum grid refines.
    """
    k_index = np.asarray(k_index, dtype=np.int64)
    if k_index.shape != (3,):
        raise ValueError("k_index must be an integer 3-vector of grid steps")
    if np.all(k_index == 0):
        raise ValueError("the zero mode has no screening multiplier")
    half = lattice.n // 2
    if np.any(k_index < -(half - 1)) or np.any(k_index > half - 1):
        return 0.0  # outside the symmetric band: no kernel support
    shifted = lattice.i_ball - k_index[None, :]
    # the shifted index must itself be a folded-window representative:
    # folding it would alias in pairs the difference mask excludes
    rep = np.all((shifted >= -half) & (shifted <= half - 1), axis=1)
    flat = (np.mod(shifted[:, 0], lattice.n) * lattice.n
            + np.mod(shifted[:, 1], lattice.n)) * lattice.n + np.mod(shifted[:, 2], lattice.n)
    partner = np.where(rep, lattice.ball_position[flat], -1)
    keep = partner >= 0
    p = lattice.k_ball[keep]
    q = lattice.k_ball[partner[keep]]
    ep = np.sqrt(1.0 + np.sum(p * p, axis=1))
    eq = np.sqrt(1.0 + np.sum(q * q, axis=1))
    trace_m = 4.0 * ((1.0 + np.sum(p * q, axis=1)) / (ep * eq) - 1.0) / (ep + eq)
    kvec = k_index * lattice.dk
    k2 = float(np.sum(kvec**2))
    return float(-2.0 * np.pi / (lattice.box_length**3 * k2) * np.sum(trace_m))


def g10(rho: ChargeDensity) -> np.ndarray:
    """First-order vacuum response to an external density.

    Dense kernel (1 / (2 n^{3/2})) * Vhat_rho(p - q) * M(p, q) on in-band
    pairs, where M is the polarization block of :mod:`bdfvac.dirac`.
    Hermitian; vanishes on the diagonal since M(p, p) = 0.
    """
    lat = rho.lattice
    n, m = lat.n, lat.m
    k2 = lat.k2_grid
    vhat = np.zeros(n**3, dtype=complex)
    nz = k2 > 1e-14
    vhat[nz] = 4 * np.pi * rho.momentum.reshape(-1)[nz] / k2[nz]
    coeff = vhat[lat.pair_diff_flat] * lat.pair_in_window / (2.0 * n**1.5)

    sb = dirac.free_blocks(lat) / lat.e_ball[:, None, None]  # sign operator per momentum
    prod = np.einsum("iab,jbc->ijac", sb, sb)
    prod -= np.eye(4)[None, None, :, :]
    esum = lat.e_ball[:, None] + lat.e_ball[None, :]
    mblocks = prod / esum[:, :, None, None]

    out = coeff[:, :, None, None] * mblocks
    return out.transpose(0, 2, 1, 3).reshape(lat.dim, lat.dim)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def q_norm(lattice: MomentumLattice, q_matrix: np.ndarray) -> float:
    """Weighted kernel norm: sum of E(p-q)^2 E(p+q) |Q(p,q)|^2 over retained pairs."""
    blocks = np.abs(q_matrix.reshape(lattice.m, 4, lattice.m, 4)) ** 2
    per_pair = np.einsum("iajb->ij", blocks)
    return float(np.sqrt(np.sum(lattice.pair_weight * per_pair)))


def s2_norm(q_matrix: np.ndarray) -> float:
    return float(np.linalg.norm(q_matrix))


def x_norm(lattice: MomentumLattice, q_matrix: np.ndarray, rho: ChargeDensity) -> float:
    """Fixed-point norm: weighted kernel norm of Q plus the L2-cap-Coulomb norm of rho."""
    return q_norm(lattice, q_matrix) + l2c_norm(rho)


def projector_blocks(lattice: MomentumLattice, sign: int) -> np.ndarray:
    """Compact (m, 4, 4) free spectral projectors."""
    h = dirac.free_blocks(lattice)
    eye = np.eye(4)[None, :, :]
    return 0.5 * (eye + sign * h / lattice.e_ball[:, None, None])


def _block_sandwich(lattice: MomentumLattice, q_matrix: np.ndarray,
                    left: int, right: int) -> np.ndarray:
    pl = projector_blocks(lattice, left)
    pr = projector_blocks(lattice, right)
    q4 = q_matrix.reshape(lattice.m, 4, lattice.m, 4)
    out = np.einsum("iab,ibjc,jcd->iajd", pl, q4, pr, optimize=True)
    return out.reshape(lattice.dim, lattice.dim)


def block_traces(lattice: MomentumLattice, q_matrix: np.ndarray) -> tuple[float, float]:
    """(tr Q_pp, tr Q_mm) via the momentum-diagonal free projectors."""
    q4 = q_matrix.reshape(lattice.m, 4, lattice.m, 4)
    pp = projector_blocks(lattice, +1)
    pm = projector_blocks(lattice, -1)
    tp = np.einsum("iab,ibia->", pp, q4)
    tm = np.einsum("iab,ibia->", pm, q4)
    return float(np.real(tp)), float(np.real(tm))


@dataclass
class StatePairNorms:
    q_norm: float
    s2_norm: float
    trace_plus: float
    trace_minus: float
    x_norm: float


def pair_norms(state: VacuumState, rho: ChargeDensity) -> StatePairNorms:
    lat = state.lattice
    tp, tm = block_traces(lat, state.q_matrix)
    qn = q_norm(lat, state.q_matrix)
    return StatePairNorms(
        q_norm=qn,
        s2_norm=s2_norm(state.q_matrix),
        trace_plus=tp,
        trace_minus=tm,
        x_norm=qn + l2c_norm(rho),
    )


# ---------------------------------------------------------------------------
# admissibility diagnostics
# ---------------------------------------------------------------------------


def square_identity_residual(lattice: MomentumLattice, q_matrix: np.ndarray) -> float:
    """Frobenius norm of Q^2 - (Q_pp - Q_mm); zero for projector differences."""
    qsq = q_matrix @ q_matrix
    qpp = _block_sandwich(lattice, q_matrix, +1, +1)
    qmm = _block_sandwich(lattice, q_matrix, -1, -1)
    return float(np.linalg.norm(qsq - (qpp - qmm)))


@dataclass
class AdmissibilityReport:
    hermiticity_residual: float
    spectral_low: float          # min eigenvalue of P0_minus + Q
    spectral_high: float         # max eigenvalue of P0_minus + Q
    spectral_violation: float    # overshoot beyond [0, 1]
    projector_residual: float    # |P^2 - P|_F for P = P0_minus + Q
    square_residual: float       # |Q^2 - (Q_pp - Q_mm)|_F
    charge: float

    def ok(self, herm_tol=1e-10, spectral_tol=1e-10, projector_tol=1e-8) -> bool:
        return (
            self.hermiticity_residual <= herm_tol
            and self.spectral_violation <= spectral_tol
            and self.projector_residual <= projector_tol
        )


def admissibility_check(state: VacuumState) -> AdmissibilityReport:
    """Pure diagnostics; never raises."""
    lat = state.lattice
    q = state.q_matrix
    herm = dirac.hermiticity_residual(q)
    _, p_minus = dirac.free_projectors(lat)
    p = p_minus + q
    w = np.linalg.eigvalsh(0.5 * (p + p.conj().T))
    low, high = float(w[0]), float(w[-1])
    violation = max(0.0, -low, high - 1.0)
    proj_res = float(np.linalg.norm(p @ p - p))
    sq_res = square_identity_residual(lat, q)
    return AdmissibilityReport(
        hermiticity_residual=herm,
        spectral_low=low,
        spectral_high=high,
        spectral_violation=violation,
        projector_residual=proj_res,
        square_residual=sq_res,
        charge=float(np.real(np.trace(q))),
    )
