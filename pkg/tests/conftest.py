"""Shared fixtures: canonical lattices, the normalized external density, and
the screening table.  Session-scoped because diagonalization-backed setup
(crossing normalization) costs seconds."""

import numpy as np
import pytest

from bdfvac.coulomb import ScreeningTable, gaussian_density
from bdfvac.lattice import LatticeSpec, build_lattice
from bdfvac.spectral import normalize_crossing

# canonical Fermi window for the production lattice: the crossing doublet is
# the only cluster inside it over the coupling window 1 +- 0.12
MU_MINUS = -0.25
MU_PLUS = 0.25


@pytest.fixture(scope="session")
def lat4():
    return build_lattice(LatticeSpec(4, 6.0, 1.6))


@pytest.fixture(scope="session")
def lat8():
    return build_lattice(LatticeSpec(8, 10.0, 2.0))


@pytest.fixture(scope="session")
def lat_noalias():
    # window wide enough that no retained pair difference leaves the band
    return build_lattice(LatticeSpec(8, 2 * np.pi, 1.8))


@pytest.fixture(scope="session")
def canonical_nu(lat8):
    """Gaussian external density rescaled so the crossing sits at unit coupling."""
    raw = gaussian_density(lat8, 1.0, 1.2)
    nu, kappa_c0 = normalize_crossing(raw, (MU_MINUS, MU_PLUS), (2.0, 9.0), lat8)
    return nu, kappa_c0


@pytest.fixture(scope="session")
def screening8(lat8):
    return ScreeningTable.build(lat8)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
