"""Mean-field vacuum energy functional and the pair-production difference.

All energies are reported in electron rest-mass units.  The external
coupling enters as kappa = alpha * Z, so the external term carries kappa
and not alpha; at alpha = 0 with kappa fixed the functional degenerates to
the linear form tr(D_kappa_nu Q).
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import dirac, states
from .coulomb import ChargeDensity, coulomb_inner
from .lattice import MomentumLattice
from .states import VacuumState

__all__ = [
    "EnergyBreakdown",
    "bdf_energy",
    "kinetic_energy_absolute",
    "pair_energy_difference",
    "lower_bound",
    "ALPHA_MAX",
]

ALPHA_MAX = 4.0 / np.pi


@dataclass
class EnergyBreakdown:
    kinetic: float
    external: float
    direct: float
    exchange: float

    @property
    def total(self) -> float:
        return self.kinetic + self.external + self.direct + self.exchange

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


def kinetic_energy_absolute(lattice: MomentumLattice, q_matrix: np.ndarray) -> float:
    """Kinetic term in the manifestly nonnegative form tr(|D0| (Q_pp - Q_mm))."""
    absd = dirac.abs_free_diagonal(lattice)
    tp_blocks = states.projector_blocks(lattice, +1)
    tm_blocks = states.projector_blocks(lattice, -1)
    q4 = q_matrix.reshape(lattice.m, 4, lattice.m, 4)
    e = lattice.e_ball
    tp = np.einsum("i,iab,ibia->", e, tp_blocks, q4)
    tm = np.einsum("i,iab,ibia->", e, tm_blocks, q4)
    return float(np.real(tp - tm))


def bdf_energy(state: VacuumState, nu: ChargeDensity, alpha: float, kappa: float,
               rho: ChargeDensity | None = None,
               exchange_op: np.ndarray | None = None) -> EnergyBreakdown:
    """Energy breakdown of a state against the external density nu.

    ``rho`` may be passed to reuse an already-computed density of the state;
    likewise ``exchange_op``.  The exchange term is skipped entirely at
    alpha = 0.
    """
    if not (0.0 <= alpha < ALPHA_MAX):
        raise ValueError(f"alpha must lie in [0, 4/pi), got {alpha}")
    lat = state.lattice
    if rho is None:
        rho = states.density_of(state)
    d0 = dirac.free_blocks(lat)
    q4 = state.q_matrix.reshape(lat.m, 4, lat.m, 4)
    kinetic = float(np.real(np.einsum("iab,ibia->", d0, q4)))
    external = -kappa * coulomb_inner(rho, nu)
    if alpha == 0.0:
        return EnergyBreakdown(kinetic, external, 0.0, 0.0)
    direct = 0.5 * alpha * coulomb_inner(rho, rho)
    exch = -0.5 * alpha * states.exchange_energy(lat, state.q_matrix, exchange_op)
    return EnergyBreakdown(kinetic, external, direct, exch)


def pair_energy_difference(plus: VacuumState, minus: VacuumState,
                           nu: ChargeDensity, alpha: float, kappa: float,
                           rho_plus: ChargeDensity | None = None,
                           rho_minus: ChargeDensity | None = None):
    """E(plus) - E(minus) with the per-term differences for diagnostics."""
    if plus.lattice.spec != minus.lattice.spec:
        raise ValueError("states live on different lattices")
    ep = bdf_energy(plus, nu, alpha, kappa, rho=rho_plus)
    em = bdf_energy(minus, nu, alpha, kappa, rho=rho_minus)
    diff = ep.total - em.total
    per_term = {
        "kinetic": ep.kinetic - em.kinetic,
        "external": ep.external - em.external,
        "direct": ep.direct - em.direct,
        "exchange": ep.exchange - em.exchange,
    }
    return diff, per_term


def lower_bound(nu: ChargeDensity, alpha: float, kappa: float) -> float:
    """Universal floor -(kappa^2 / (2 alpha)) D(nu, nu) of the functional for alpha > 0."""
    if alpha <= 0:
        raise ValueError("lower bound only applies for alpha > 0")
    return -(kappa**2 / (2 * alpha)) * coulomb_inner(nu, nu)
