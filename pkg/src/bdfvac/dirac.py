"""Free Dirac operator on the cutoff lattice and its spectral structure.

Operators on the cutoff space are dense complex Hermitian matrices of
dimension 4m in the (momentum, spinor) basis fixed by MomentumLattice.
Momentum-diagonal operators additionally carry a compact (m, 4, 4) block
form for fast assembly.
"""

from __future__ import annotations

import numpy as np

from .lattice import MomentumLattice

__all__ = [
    "ALPHA",
    "BETA",
    "dirac_block",
    "projector_block",
    "m_kernel",
    "free_blocks",
    "free_operator",
    "free_projectors",
    "abs_free_diagonal",
    "block_split",
    "blocks_to_dense",
    "hermiticity_residual",
]

_sigma1 = np.array([[0, 1], [1, 0]], dtype=complex)
_sigma2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_sigma3 = np.array([[1, 0], [0, -1]], dtype=complex)
_z2 = np.zeros((2, 2), dtype=complex)
_i2 = np.eye(2, dtype=complex)

# Pauli-block convention: upper two spinor components are the large ones.
ALPHA = np.array([np.block([[_z2, s], [s, _z2]]) for s in (_sigma1, _sigma2, _sigma3)])
BETA = np.block([[_i2, _z2], [_z2, -_i2]])


def _algebra_selftest():
    # anticommutation relations; failure means a broken constant table
    for i in range(3):
        for j in range(3):
            anti = ALPHA[i] @ ALPHA[j] + ALPHA[j] @ ALPHA[i]
            assert np.allclose(anti, 2 * np.eye(4) * (i == j)), "alpha anticommutator"
        assert np.allclose(ALPHA[i] @ BETA + BETA @ ALPHA[i], 0), "alpha-beta anticommutator"
    assert np.allclose(BETA @ BETA, np.eye(4)), "beta squared"


_algebra_selftest()


def energy(k) -> np.ndarray:
    """Relativistic dispersion E(k) = sqrt(1 + |k|^2)."""
    k = np.asarray(k, dtype=float)
    return np.sqrt(1.0 + np.sum(k * k, axis=-1))


def dirac_block(k) -> np.ndarray:
    """4x4 Hermitian block alpha.k + beta at a single momentum."""
    k = np.asarray(k, dtype=float)
    return k[0] * ALPHA[0] + k[1] * ALPHA[1] + k[2] * ALPHA[2] + BETA


def projector_block(k, sign: int) -> np.ndarray:
    """Spectral projector of alpha.k + beta onto the sign * E(k) eigenspace (rank 2)."""
    e = energy(k)
    return 0.5 * (np.eye(4) + sign * dirac_block(k) / e)


def m_kernel(p, q) -> np.ndarray:
    """Polarization kernel (E(p)+E(q))^-1 [ (a.p+b)/E(p) (a.q+b)/E(q) - 1 ]."""
    ep, eq = energy(p), energy(q)
    return (dirac_block(p) / ep @ (dirac_block(q) / eq) - np.eye(4)) / (ep + eq)


def free_blocks(lattice: MomentumLattice) -> np.ndarray:
    """Compact form of the free operator: (m, 4, 4) blocks alpha.k + beta."""
    return np.einsum("mj,jab->mab", lattice.k_ball, ALPHA) + BETA[None, :, :]


def blocks_to_dense(blocks: np.ndarray) -> np.ndarray:
    """Expand momentum-diagonal (m, 4, 4) blocks into a dense (4m, 4m) matrix."""
    m = blocks.shape[0]
    out = np.zeros((4 * m, 4 * m), dtype=complex)
    for a in range(m):
        out[4 * a : 4 * a + 4, 4 * a : 4 * a + 4] = blocks[a]
    return out


def free_operator(lattice: MomentumLattice) -> np.ndarray:
    """Dense free Dirac operator restricted to the cutoff ball."""
    return blocks_to_dense(free_blocks(lattice))


def free_projectors(lattice: MomentumLattice) -> tuple[np.ndarray, np.ndarray]:
    """Dense (P_plus, P_minus): spectral projectors of the free operator."""
    h = free_blocks(lattice)
    e = lattice.e_ball[:, None, None]
    eye = np.eye(4)[None, :, :]
    p_plus = blocks_to_dense(0.5 * (eye + h / e))
    p_minus = blocks_to_dense(0.5 * (eye - h / e))
    return p_plus, p_minus


def abs_free_diagonal(lattice: MomentumLattice) -> np.ndarray:
    """Diagonal of |D0| in the lattice basis: E(k) repeated per spinor component."""
    return np.repeat(lattice.e_ball, 4)


def block_split(a: np.ndarray, projectors: tuple[np.ndarray, np.ndarray]):
    """Split an operator into the four free-sea blocks (a_pp, a_pm, a_mp, a_mm)."""
    p_plus, p_minus = projectors
    return (
        p_plus @ a @ p_plus,
        p_plus @ a @ p_minus,
        p_minus @ a @ p_plus,
        p_minus @ a @ p_minus,
    )


def hermiticity_residual(a: np.ndarray) -> float:
    """Frobenius norm of the anti-Hermitian part."""
    return float(np.linalg.norm(a - a.conj().T))
