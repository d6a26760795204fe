"""Serialization of dense operators and vacuum states.

Operators use the .npy format (self-describing header: dtype, shape,
row-major order).  States use .npz with the lattice parameters alongside
the matrix so a file can be validated against the lattice it is loaded on.
"""

from __future__ import annotations

import numpy as np

from .lattice import LatticeSpec, MomentumLattice, build_lattice
from .states import VacuumState

__all__ = ["save_operator", "load_operator", "save_state", "load_state"]


def save_operator(path, a: np.ndarray):
    np.save(path, np.asarray(a, dtype=complex))


def load_operator(path) -> np.ndarray:
    a = np.load(path)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"not a square operator file: shape {a.shape}")
    return a


def save_state(path, state: VacuumState):
    lat = state.lattice
    np.savez(
        path,
        n_per_axis=lat.n,
        box_length=lat.box_length,
        cutoff=lat.cutoff,
        fermi_level=state.fermi_level,
        provenance=state.provenance,
        q_matrix=state.q_matrix,
    )


def load_state(path, lattice: MomentumLattice | None = None) -> VacuumState:
    data = np.load(path, allow_pickle=False)
    spec = LatticeSpec(
        n_per_axis=int(data["n_per_axis"]),
        box_length=float(data["box_length"]),
        cutoff=float(data["cutoff"]),
    )
    if lattice is None:
        lattice = build_lattice(spec)
    elif lattice.spec != spec:
        raise ValueError(f"state file was written for lattice {spec}, not {lattice.spec}")
    return VacuumState(
        lattice,
        data["q_matrix"],
        fermi_level=float(data["fermi_level"]),
        provenance=str(data["provenance"]),
    )
