import numpy as np
import pytest

from bdfvac import states
from bdfvac.coulomb import ChargeDensity, coulomb_inner, gaussian_density
from bdfvac.energy import (
    bdf_energy,
    kinetic_energy_absolute,
    lower_bound,
    pair_energy_difference,
)
from bdfvac.invariants import random_admissible_state, random_density
from bdfvac.lattice import LatticeSpec, build_lattice
from bdfvac.spectral import gap_eigenpair, linear_vacuum
from bdfvac.states import VacuumState, density_of
from conftest import MU_MINUS, MU_PLUS


def test_zero_state_zero_energy(lat4, rng):
    nu = random_density(lat4, rng)
    zero = VacuumState(lat4, np.zeros((lat4.dim, lat4.dim), dtype=complex))
    breakdown = bdf_energy(zero, nu, 0.05, 1.0)
    assert breakdown.kinetic == 0.0
    assert breakdown.external == 0.0
    assert breakdown.direct == 0.0
    assert breakdown.exchange == 0.0
    assert breakdown.total == 0.0


def test_breakdown_additivity_and_signs(lat4, rng):
    nu = gaussian_density(lat4, 2.0, 1.0)
    st = random_admissible_state(lat4, rng)
    b = bdf_energy(st, nu, 0.1, 0.5)
    assert b.total == b.kinetic + b.external + b.direct + b.exchange
    assert b.direct >= 0.0
    assert b.exchange <= 0.0  # exchange energy of these states is positive


def test_kinetic_dual_forms(lat4, rng):
    nu = gaussian_density(lat4, 2.0, 1.0)
    for _ in range(10):
        st = random_admissible_state(lat4, rng)
        signed = bdf_energy(st, nu, 0.0, 0.0).kinetic
        absolute = kinetic_energy_absolute(lat4, st.q_matrix)
        assert signed == pytest.approx(absolute, abs=1e-8)
        assert absolute >= -1e-10  # nonnegative for admissible states


def test_alpha_zero_reduces_to_linear_trace(lat4):
    nu = gaussian_density(lat4, 3.0, 1.0)
    st = linear_vacuum(nu, 1.0, 0.0, lat4)
    b = bdf_energy(st, nu, 0.0, 1.0)
    h = np.asarray(states.potential_operator(lat4, nu))
    from bdfvac.dirac import free_operator

    trace = float(np.real(np.trace((free_operator(lat4) - 1.0 * h) @ st.q_matrix)))
    assert b.total == pytest.approx(trace, abs=1e-10)


def test_gauge_shift_moves_only_external(lat4, rng):
    nu = gaussian_density(lat4, 2.0, 1.0)
    delta = random_density(lat4, rng)
    shifted = ChargeDensity(lat4, nu.position + delta.position)
    st = random_admissible_state(lat4, rng)
    rho = density_of(st)
    kappa = 0.8
    b0 = bdf_energy(st, nu, 0.05, kappa, rho=rho)
    b1 = bdf_energy(st, shifted, 0.05, kappa, rho=rho)
    assert b1.kinetic == b0.kinetic
    assert b1.direct == b0.direct
    assert b1.exchange == b0.exchange
    assert b1.external - b0.external == pytest.approx(
        -kappa * coulomb_inner(rho, delta), abs=1e-10
    )


def test_lower_bound(lat4, rng):
    nu = gaussian_density(lat4, 2.0, 1.0)
    alpha, kappa = 0.1, 0.7
    floor = lower_bound(nu, alpha, kappa)
    for _ in range(10):
        st = random_admissible_state(lat4, rng)
        assert bdf_energy(st, nu, alpha, kappa).total >= floor - 1e-10
    zero = VacuumState(lat4, np.zeros((lat4.dim, lat4.dim), dtype=complex))
    assert bdf_energy(zero, nu, alpha, kappa).total >= floor


def test_alpha_range_validated(lat4, rng):
    nu = gaussian_density(lat4, 2.0, 1.0)
    st = random_admissible_state(lat4, rng)
    with pytest.raises(ValueError, match="alpha"):
        bdf_energy(st, nu, 4 / np.pi, 1.0)


def test_pair_difference_zero_for_equal_states(lat4, rng):
    nu = gaussian_density(lat4, 2.0, 1.0)
    st = random_admissible_state(lat4, rng)
    diff, per_term = pair_energy_difference(st, st, nu, 0.05, 1.0)
    assert diff == 0.0
    assert all(v == 0.0 for v in per_term.values())


def test_pair_difference_alpha_zero_is_cluster_sum(lat8, canonical_nu):
    """Forced identity: the two linear vacua differ by the crossing-cluster
    projector, so F(kappa, 0) equals the sum of the cluster eigenvalues."""
    nu, _ = canonical_nu
    kappa = 1.03
    v_minus = linear_vacuum(nu, kappa, MU_MINUS, lat8)
    v_plus = linear_vacuum(nu, kappa, MU_PLUS, lat8)
    diff, _ = pair_energy_difference(v_plus, v_minus, nu, 0.0, kappa)
    pair = gap_eigenpair(nu, kappa, (MU_MINUS, MU_PLUS), lat8)
    assert pair.multiplicity == 2  # exact time-reversal doublet
    assert diff == pytest.approx(float(np.sum(pair.cluster)), abs=1e-10)


def test_pair_difference_rejects_mismatched_lattices(lat4, rng):
    other = build_lattice(LatticeSpec(4, 7.0, 1.6))
    nu = gaussian_density(lat4, 2.0, 1.0)
    a = random_admissible_state(lat4, rng)
    b = random_admissible_state(other, rng)
    with pytest.raises(ValueError, match="different lattices"):
        pair_energy_difference(a, b, nu, 0.0, 1.0)
