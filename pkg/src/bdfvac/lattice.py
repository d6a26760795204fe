"""Cutoff one-particle space on a periodic box.

The continuum Fourier-ball space is replaced by a finite periodic box of
side L with n grid points per axis.  Momenta live on (2*pi/L) * Z^3 folded
to the symmetric window, and the cutoff keeps the ball |k| <= Lambda.  The
discrete Fourier transform is the unitary one (numpy's norm="ortho"); every
continuum formula used elsewhere in the package is translated once to this
convention, see docs/conventions.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "LatticeSpec",
    "MomentumLattice",
    "SpinorField",
    "build_lattice",
    "to_momentum",
    "to_position",
    "cutoff_project",
    "l2_norm",
]


@dataclass(frozen=True)
class LatticeSpec:
    """Grid parameters: points per axis, box side L, momentum cutoff Lambda.

    Natural units (hbar = c = m_e = 1) throughout: momenta in inverse
    Compton lengths, energies in electron masses.
    """

    n_per_axis: int
    box_length: float
    cutoff: float

    def __post_init__(self):
        n, L, lam = self.n_per_axis, self.box_length, self.cutoff
        if n <= 0 or n % 2 != 0:
            raise ValueError(f"n_per_axis must be positive and even, got {n}")
        if L <= 0:
            raise ValueError(f"box_length must be positive, got {L}")
        if lam <= 1.0:
            raise ValueError(f"cutoff must exceed the mass gap 1, got {lam}")
        dk = 2 * np.pi / L
        if (n // 2) * dk < lam:
            raise ValueError(
                f"cutoff ball does not fit the grid: (n/2)*dk = {(n // 2) * dk:.6g} < cutoff = {lam:.6g}"
            )


class MomentumLattice:
    """Momentum grid with cutoff mask and the pair tables used by operators.

    Immutable after construction; instances are shared freely between
    solver runs.  The retained momenta (the "ball") carry the index order
    used by every dense operator: basis vector 4*a + s is momentum
    ``k_ball[a]``, spinor component s.
    """

    def __init__(self, spec: LatticeSpec):
        self.spec = spec
        self.n = spec.n_per_axis
        self.box_length = spec.box_length
        self.cutoff = spec.cutoff
        self.dk = 2 * np.pi / self.box_length
        self.dx = self.box_length / self.n
        self.cell_volume = self.dx**3

        n = self.n
        idx = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)
        gi, gj, gk = np.meshgrid(idx, idx, idx, indexing="ij")
        self.k_index = np.stack([gi, gj, gk], axis=-1).reshape(-1, 3)
        self.k_vec = self.k_index * self.dk
        self.k2_grid = np.sum(self.k_vec**2, axis=1)

        radii = np.sqrt(self.k2_grid)
        self.ball = np.where(radii <= self.cutoff + 1e-12)[0]
        self.m = int(len(self.ball))
        self.dim = 4 * self.m
        self.k_ball = self.k_vec[self.ball]
        self.i_ball = self.k_index[self.ball]
        self.e_ball = np.sqrt(1.0 + np.sum(self.k_ball**2, axis=1))

        # flat grid index of each retained momentum, for scatter/gather
        self.ball_flat = (
            (np.mod(self.i_ball[:, 0], n) * n + np.mod(self.i_ball[:, 1], n)) * n
            + np.mod(self.i_ball[:, 2], n)
        )

    # ---- pair tables (built lazily, cached) ----

    @cached_property
    def pair_diff_index(self) -> np.ndarray:
        """Integer momentum differences i_ball[p] - i_ball[q], shape (m, m, 3)."""
        return self.i_ball[:, None, :] - self.i_ball[None, :, :]

    @cached_property
    def pair_in_window(self) -> np.ndarray:
        """True where the pair difference lies in the symmetric band |d_i| <= n/2 - 1.

        The symmetric band (Nyquist plane excluded) keeps difference kernels
        Hermitian; differences outside it are dropped rather than aliased.
        """
        half = self.n // 2
        d = self.pair_diff_index
        return np.all((d >= -(half - 1)) & (d <= half - 1), axis=-1)

    @cached_property
    def pair_diff_flat(self) -> np.ndarray:
        """Flat grid index of the wrapped pair difference, shape (m, m)."""
        d = np.mod(self.pair_diff_index, self.n)
        return (d[..., 0] * self.n + d[..., 1]) * self.n + d[..., 2]

    @cached_property
    def pair_weight(self) -> np.ndarray:
        """Kernel-space weight E(p-q)^2 * E(p+q) on retained pairs, shape (m, m)."""
        dvec = self.k_ball[:, None, :] - self.k_ball[None, :, :]
        svec = self.k_ball[:, None, :] + self.k_ball[None, :, :]
        return (1.0 + np.sum(dvec**2, axis=-1)) * np.sqrt(1.0 + np.sum(svec**2, axis=-1))

    @cached_property
    def ball_position(self) -> np.ndarray:
        """Inverse of ball_flat: grid flat index -> position in the ball, -1 outside."""
        inv = np.full(self.n**3, -1, dtype=np.int64)
        inv[self.ball_flat] = np.arange(self.m)
        return inv

    @cached_property
    def min_image_coords(self) -> np.ndarray:
        """Position coordinates folded to [-L/2, L/2), shape (n, n, n, 3)."""
        x = np.arange(self.n) * self.dx
        x = np.where(x > self.box_length / 2, x - self.box_length, x)
        gx, gy, gz = np.meshgrid(x, x, x, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1)

    def __repr__(self):
        return (
            f"MomentumLattice(n={self.n}, L={self.box_length:g}, "
            f"cutoff={self.cutoff:g}, m={self.m})"
        )


def build_lattice(spec: LatticeSpec) -> MomentumLattice:
    """Construct the lattice; raises ValueError on invalid parameters."""
    return MomentumLattice(spec)


POSITION = "position"
MOMENTUM = "momentum"


@dataclass
class SpinorField:
    """A 4-spinor field on the grid, in position or momentum representation.

    Momentum values are unitary-DFT coefficients; a field representing an
    element of the cutoff space vanishes outside the ball (enforce with
    :func:`cutoff_project`, not by the constructor).
    """

    lattice: MomentumLattice
    values: np.ndarray  # (n, n, n, 4) complex
    rep: str = POSITION

    def __post_init__(self):
        n = self.lattice.n
        if self.values.shape != (n, n, n, 4):
            raise ValueError(f"spinor values must have shape {(n, n, n, 4)}")
        if self.rep not in (POSITION, MOMENTUM):
            raise ValueError(f"unknown representation {self.rep!r}")


def to_momentum(f: SpinorField) -> SpinorField:
    """Unitary transform to momentum representation (componentwise FFT)."""
    if not np.all(np.isfinite(f.values)):
        raise ValueError("non-finite spinor field")
    if f.rep == MOMENTUM:
        return f
    vals = np.fft.fftn(f.values, axes=(0, 1, 2), norm="ortho")
    return SpinorField(f.lattice, vals, MOMENTUM)


def to_position(f: SpinorField) -> SpinorField:
    """Unitary transform to position representation."""
    if not np.all(np.isfinite(f.values)):
        raise ValueError("non-finite spinor field")
    if f.rep == POSITION:
        return f
    vals = np.fft.ifftn(f.values, axes=(0, 1, 2), norm="ortho")
    return SpinorField(f.lattice, vals, POSITION)


def cutoff_project(f: SpinorField) -> SpinorField:
    """Zero all momentum components outside the cutoff ball.

    Idempotent; returns a field in the representation of the input.
    """
    lat = f.lattice
    g = to_momentum(f)
    n = lat.n
    vals = g.values.reshape(n**3, 4).copy()
    mask = np.zeros(n**3, dtype=bool)
    mask[lat.ball] = True
    vals[~mask] = 0.0
    out = SpinorField(lat, vals.reshape(n, n, n, 4), MOMENTUM)
    if f.rep == POSITION:
        return to_position(out)
    return out


def l2_norm(f: SpinorField) -> float:
    """Physical L2 norm: sqrt(dV * sum |f|^2); identical in both representations."""
    return float(np.sqrt(f.lattice.cell_volume * np.sum(np.abs(f.values) ** 2)))
