"""Coulomb-space machinery: densities, the electrostatic pairing, and the
explicit screening functions of the cutoff vacuum.

Fields are stored with unitary-DFT momentum coefficients.  With cell volume
dV and grid momenta k, the electrostatic pairing is

    D(f, g) = 4 pi dV sum_{k != 0} F_f(k) conj(F_g(k)) / |k|^2,

the discrete counterpart of the continuum Coulomb inner product.  The k = 0
mode is always dropped (uniform neutralizing background).

The screening functions b_constant, b_function, u_function are continuum
objects evaluated by adaptive 1-D quadrature, not lattice sums: the
renormalization constants they feed must not inherit grid error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .lattice import MomentumLattice

__all__ = [
    "ChargeDensity",
    "ScreeningTable",
    "gaussian_density",
    "coulomb_inner",
    "coulomb_potential",
    "l2_norm",
    "coulomb_norm",
    "l2c_norm",
    "z_cutoff",
    "b_function",
    "b_constant",
    "b_constant_asymptotic",
    "u_function",
    "u_envelope",
    "renormalize_density",
]

QUAD_ABS_TOL = 1e-10
QUAD_REL_TOL = 1e-8


@dataclass
class ChargeDensity:
    """Real scalar field on the lattice with cached momentum data."""

    lattice: MomentumLattice
    position: np.ndarray  # (n, n, n) real
    momentum: np.ndarray = field(default=None, repr=False)  # unitary DFT, complex

    def __post_init__(self):
        n = self.lattice.n
        if self.position.shape != (n, n, n):
            raise ValueError(f"density must have shape {(n, n, n)}")
        if self.momentum is None:
            self.momentum = np.fft.fftn(self.position, norm="ortho")

    @classmethod
    def from_momentum(cls, lattice: MomentumLattice, momentum: np.ndarray,
                      imag_tol: float = 1e-10) -> "ChargeDensity":
        pos = np.fft.ifftn(momentum, norm="ortho")
        resid = float(np.max(np.abs(pos.imag))) if pos.size else 0.0
        scale = max(1.0, float(np.max(np.abs(pos.real))))
        if resid > imag_tol * scale:
            raise ValueError(
                f"momentum data is not conjugation-symmetric: imaginary residue {resid:.3e}"
            )
        return cls(lattice, np.ascontiguousarray(pos.real), momentum)

    @property
    def total_charge(self) -> float:
        return float(self.lattice.cell_volume * np.sum(self.position))

    def scaled(self, factor: float) -> "ChargeDensity":
        return ChargeDensity(self.lattice, factor * self.position, factor * self.momentum)


def gaussian_density(lattice: MomentumLattice, charge: float, width: float) -> ChargeDensity:
    """Normalized Gaussian of total charge ``charge`` centered at the origin.

    Evaluated at the minimum-image radius, so the bump is periodic and its
    center sits on a grid point.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    r2 = np.sum(lattice.min_image_coords**2, axis=-1)
    pos = charge * (2 * np.pi * width**2) ** -1.5 * np.exp(-r2 / (2 * width**2))
    return ChargeDensity(lattice, pos)


def _k2(lattice: MomentumLattice) -> np.ndarray:
    n = lattice.n
    return lattice.k2_grid.reshape(n, n, n)


def coulomb_inner(f: ChargeDensity, g: ChargeDensity) -> float:
    """Electrostatic pairing D(f, g); symmetric, positive on the diagonal."""
    if f.lattice is not g.lattice and f.lattice.spec != g.lattice.spec:
        raise ValueError("densities live on different lattices")
    k2 = _k2(f.lattice)
    nz = k2 > 1e-14
    val = 4 * np.pi * f.lattice.cell_volume * np.sum(
        f.momentum[nz] * np.conj(g.momentum[nz]) / k2[nz]
    )
    return float(np.real(val))


def coulomb_potential(rho: ChargeDensity) -> np.ndarray:
    """Position-space potential generated by rho: multiplier 4 pi / |k|^2, k=0 dropped."""
    k2 = _k2(rho.lattice)
    vhat = np.zeros_like(rho.momentum)
    nz = k2 > 1e-14
    vhat[nz] = 4 * np.pi * rho.momentum[nz] / k2[nz]
    return np.fft.ifftn(vhat, norm="ortho").real


def l2_norm(rho: ChargeDensity) -> float:
    return float(np.sqrt(rho.lattice.cell_volume * np.sum(rho.position**2)))


def coulomb_norm(rho: ChargeDensity) -> float:
    return float(np.sqrt(max(coulomb_inner(rho, rho), 0.0)))


def l2c_norm(rho: ChargeDensity) -> float:
    """Intersection norm, realized as max of the L2 and Coulomb norms."""
    return max(l2_norm(rho), coulomb_norm(rho))


# ---------------------------------------------------------------------------
# screening functions (continuum quadrature)
# ---------------------------------------------------------------------------


def z_cutoff(r: float, cutoff: float) -> float:
    """Endpoint function (sqrt(1+cutoff^2) - sqrt(1+(cutoff-r)^2)) / r with analytic r->0 limit."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0.0:
        return cutoff / np.sqrt(1.0 + cutoff**2)
    return (np.sqrt(1.0 + cutoff**2) - np.sqrt(1.0 + (cutoff - r) ** 2)) / r


def _quad(fun, lo, hi, abs_tol, rel_tol):
    val, err = quad(fun, lo, hi, epsabs=abs_tol, epsrel=rel_tol, limit=400)
    if not np.isfinite(val) or err > max(abs_tol, rel_tol * abs(val)) * 1e3:
        raise ArithmeticError(f"quadrature failed to converge: value {val}, error {err}")
    return val


def b_constant(cutoff: float, abs_tol: float = QUAD_ABS_TOL, rel_tol: float = QUAD_REL_TOL) -> float:
    """Zero-momentum screening constant (1/pi) * int_0^t (z^2 - z^4/3)/(1 - z^2) dz,
    t = cutoff/sqrt(1+cutoff^2)."""
    if cutoff <= 1:
        raise ValueError("cutoff must exceed 1")
    t = cutoff / np.sqrt(1.0 + cutoff**2)
    val = _quad(lambda z: (z**2 - z**4 / 3) / (1 - z**2), 0.0, t, abs_tol, rel_tol)
    return val / np.pi


def b_constant_asymptotic(cutoff: float) -> float:
    """Large-cutoff expansion (2/3pi) log(cutoff) - 5/(9 pi) + 2 log 2/(3 pi)."""
    return (2 / (3 * np.pi)) * np.log(cutoff) - 5 / (9 * np.pi) + 2 * np.log(2) / (3 * np.pi)


def b_function(k_norm: float, cutoff: float,
               abs_tol: float = QUAD_ABS_TOL, rel_tol: float = QUAD_REL_TOL) -> float:
    """Momentum-dependent screening multiplier; vanishes identically beyond 2*cutoff."""
    if k_norm < 0:
        raise ValueError("momentum norm must be nonnegative")
    if k_norm > 2 * cutoff:
        return 0.0
    if k_norm == 0.0:
        return b_constant(cutoff, abs_tol, rel_tol)
    zc = z_cutoff(k_norm, cutoff)
    e_lam = np.sqrt(1.0 + cutoff**2)
    i1 = _quad(
        lambda z: (z**2 - z**4 / 3) / ((1 - z**2) * (1 + k_norm**2 * (1 - z**2) / 4)),
        0.0, zc, abs_tol, rel_tol,
    )
    i2 = _quad(lambda z: (z - z**3 / 3) / (e_lam - k_norm * z / 2), 0.0, zc, abs_tol, rel_tol)
    return i1 / np.pi + k_norm * i2 / (2 * np.pi)


def u_function(r: float, cutoff: float,
               abs_tol: float = QUAD_ABS_TOL, rel_tol: float = QUAD_REL_TOL) -> float:
    """Screening defect b_constant - b_function(r); nonnegative, 0 at r = 0."""
    return b_constant(cutoff, abs_tol, rel_tol) - b_function(r, cutoff, abs_tol, rel_tol)


KAPPA_ONE = 258.0 / np.pi


def u_envelope(r: float) -> float:
    """Cutoff-uniform upper envelope (258/pi) (1 + log(1 + r^2)/(3 pi)) for u_function."""
    return KAPPA_ONE * (1.0 + np.log1p(r**2) / (3 * np.pi))


def renormalize_density(nu: ChargeDensity, alpha: float, cutoff: float) -> ChargeDensity:
    """Observable external density nu / (1 + alpha * b_constant(cutoff))."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0.0:
        return nu
    return nu.scaled(1.0 / (1.0 + alpha * b_constant(cutoff)))


@dataclass(frozen=True)
class ScreeningTable:
    """Screening multiplier tabulated on the lattice momentum radii.

    Values come from the continuum quadrature; the table is immutable and
    shared by concurrent solver instances.
    """

    cutoff: float
    radii: np.ndarray          # sorted unique |k| on the grid
    b_values: np.ndarray       # b_function at each radius
    b_zero: float              # b_constant(cutoff)
    abs_tol: float = QUAD_ABS_TOL
    rel_tol: float = QUAD_REL_TOL

    @classmethod
    def build(cls, lattice: MomentumLattice, cutoff: float | None = None,
              abs_tol: float = QUAD_ABS_TOL, rel_tol: float = QUAD_REL_TOL) -> "ScreeningTable":
        lam = lattice.cutoff if cutoff is None else cutoff
        radii = np.unique(np.round(np.sqrt(lattice.k2_grid), 12))
        vals = np.array([b_function(r, lam, abs_tol, rel_tol) for r in radii])
        table = cls(lam, radii, vals, b_constant(lam, abs_tol, rel_tol), abs_tol, rel_tol)
        table.validate()
        return table

    def validate(self):
        if np.any(self.b_values < -1e-12):
            raise AssertionError("screening multiplier went negative")
        u = self.u_values
        if np.any(u < -1e-10):
            raise AssertionError("screening defect went negative")
        env = np.array([u_envelope(r) for r in self.radii])
        if np.any(u > env + 1e-10):
            raise AssertionError("screening defect exceeds its envelope")
        beyond = self.radii > 2 * self.cutoff
        if np.any(np.abs(self.b_values[beyond]) > 1e-12):
            raise AssertionError("screening multiplier nonzero beyond 2*cutoff")

    @property
    def u_values(self) -> np.ndarray:
        return self.b_zero - self.b_values

    def b_at(self, r: float) -> float:
        """Value at radius r: exact table hit, else fresh quadrature."""
        i = np.searchsorted(self.radii, r)
        if i < len(self.radii) and abs(self.radii[i] - r) < 1e-9:
            return float(self.b_values[i])
        return b_function(r, self.cutoff, self.abs_tol, self.rel_tol)

    def grid_values(self, lattice: MomentumLattice) -> np.ndarray:
        """b_function sampled on the full (n, n, n) momentum grid."""
        rr = np.round(np.sqrt(lattice.k2_grid), 12)
        idx = np.searchsorted(self.radii, rr)
        idx = np.clip(idx, 0, len(self.radii) - 1)
        if not np.allclose(self.radii[idx], rr, atol=1e-9):
            raise ValueError("table was built for a different lattice")
        n = lattice.n
        return self.b_values[idx].reshape(n, n, n)
